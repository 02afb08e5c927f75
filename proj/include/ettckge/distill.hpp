#pragma once

#include <span>

#include "ettckge/matrix.hpp"
#include "ettckge/tokens.hpp"

namespace ettckge {

// Joint mask M = M_prev (.) M_cur over the overlap rows.
template <typename S>
Matrix<S> aligned_mask(const Matrix<S>& mask_prev, const Matrix<S>& mask_cur) {
  if (!mask_prev.same_shape(mask_cur)) {
    throw ShapeError("aligned_mask: mask shapes differ");
  }
  Matrix<S> out(mask_prev.rows(), mask_prev.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = mask_prev.data()[i] * mask_cur.data()[i];
  }
  return out;
}

// L = (1 / (T * N_ov)) sum_t sum_{n in overlap} M[t][n] * ||e_prev_n - e_cur_n||^2
// with M the joint mask computed over the overlap prefix of both tables.
// Rows outside the overlap contribute nothing. Empty overlap yields 0.
template <typename S>
S distill_loss(const Matrix<S>& prev, const Matrix<S>& cur, const Matrix<S>& tokens,
               std::size_t n_overlap) {
  if (n_overlap == 0) return S(0);
  if (n_overlap > prev.rows() || n_overlap > cur.rows()) {
    throw ShapeError("distill_loss: overlap exceeds table rows");
  }
  if (prev.cols() != cur.cols()) throw ShapeError("distill_loss: dims differ");
  Matrix<S> mask_prev = compute_mask(tokens, prev, n_overlap);
  Matrix<S> mask_cur = compute_mask(tokens, cur, n_overlap);
  const std::size_t tcount = tokens.rows();
  S total = 0;
  for (std::size_t n = 0; n < n_overlap; ++n) {
    auto p = prev.row(n);
    auto c = cur.row(n);
    S dist = 0;
    for (std::size_t d = 0; d < prev.cols(); ++d) {
      S x = p[d] - c[d];
      dist += x * x;
    }
    S msum = 0;
    for (std::size_t t = 0; t < tcount; ++t) msum += mask_prev(t, n) * mask_cur(t, n);
    total += msum * dist;
  }
  return total / S(tcount * n_overlap);
}

// Analytic gradient w.r.t. the current table, accumulated (scaled) into
// grad_cur. Two paths: the distance term, and (when mask_path) the current
// mask M_cur = sigma(Z E_cur^T) which also depends on E_cur.
template <typename S>
S distill_loss_grad(const Matrix<S>& prev, const Matrix<S>& cur, const Matrix<S>& tokens,
                    std::size_t n_overlap, S scale, Matrix<S>& grad_cur,
                    bool mask_path = true) {
  if (n_overlap == 0) return S(0);
  if (n_overlap > prev.rows() || n_overlap > cur.rows()) {
    throw ShapeError("distill_loss_grad: overlap exceeds table rows");
  }
  Matrix<S> mask_prev = compute_mask(tokens, prev, n_overlap);
  Matrix<S> mask_cur = compute_mask(tokens, cur, n_overlap);
  const std::size_t tcount = tokens.rows();
  const std::size_t dim = prev.cols();
  const S norm = S(1) / S(tcount * n_overlap);
  S total = 0;
  for (std::size_t n = 0; n < n_overlap; ++n) {
    auto p = prev.row(n);
    auto c = cur.row(n);
    auto g = grad_cur.row(n);
    S dist = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      S x = p[d] - c[d];
      dist += x * x;
    }
    S msum = 0;
    for (std::size_t t = 0; t < tcount; ++t) msum += mask_prev(t, n) * mask_cur(t, n);
    total += msum * dist;

    // distance path: d/dc ||p - c||^2 = -2 (p - c)
    const S w = scale * norm * msum * S(2);
    for (std::size_t d = 0; d < dim; ++d) g[d] -= w * (p[d] - c[d]);

    if (mask_path) {
      // mask path: d M_cur[t][n] / d c = M(1-M) z_t, weighted by M_prev[t][n] * dist
      for (std::size_t t = 0; t < tcount; ++t) {
        const S m = mask_cur(t, n);
        const S coeff = scale * norm * mask_prev(t, n) * dist * m * (S(1) - m);
        if (coeff == S(0)) continue;
        auto z = tokens.row(t);
        for (std::size_t d = 0; d < dim; ++d) g[d] += coeff * z[d];
      }
    }
  }
  return total * norm;
}

}  // namespace ettckge
