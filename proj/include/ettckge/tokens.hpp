#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "ettckge/matrix.hpp"
#include "ettckge/scoring.hpp"
#include "ettckge/types.hpp"

namespace ettckge {

template <typename S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

// Tokens start at the TransE init scale so initial logits stay out of
// sigmoid saturation.
template <typename S>
Matrix<S> init_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const S bound = S(6.0 / std::sqrt(double(cols)));
  std::uniform_real_distribution<double> unif(-double(bound), double(bound));
  Matrix<S> m(rows, cols);
  for (S& v : m.data()) v = S(unif(rng));
  return m;
}

// M = sigma(Z E^T), shape T x N. `limit_rows` restricts E to its first rows
// (the overlap prefix) when nonzero.
template <typename S>
Matrix<S> compute_mask(const Matrix<S>& tokens, const Matrix<S>& table,
                       std::size_t limit_rows = 0) {
  if (tokens.cols() != table.cols()) {
    throw ShapeError("compute_mask: token and embedding dimensions differ");
  }
  const std::size_t n = limit_rows == 0 ? table.rows() : limit_rows;
  if (n > table.rows()) throw ShapeError("compute_mask: row limit exceeds table");
  Matrix<S> mask(tokens.rows(), n);
  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    auto z = tokens.row(t);
    for (std::size_t i = 0; i < n; ++i) {
      auto e = table.row(i);
      S dot = 0;
      for (std::size_t d = 0; d < z.size(); ++d) dot += z[d] * e[d];
      mask(t, i) = sigmoid(dot);
    }
  }
  return mask;
}

// Column sums of the mask: the per-row scaling applied by the token-wise
// weighted sum.
template <typename S>
std::vector<S> mask_colsum(const Matrix<S>& mask) {
  std::vector<S> s(mask.cols(), S(0));
  for (std::size_t t = 0; t < mask.rows(); ++t) {
    for (std::size_t n = 0; n < mask.cols(); ++n) s[n] += mask(t, n);
  }
  return s;
}

// E_hat = sum_t M_t (.) E: each row of E scaled by the mask column sum.
template <typename S>
Matrix<S> masked_embeddings(const Matrix<S>& mask, const Matrix<S>& table) {
  if (mask.cols() != table.rows()) {
    throw ShapeError("masked_embeddings: mask columns must equal table rows");
  }
  std::vector<S> s = mask_colsum(mask);
  Matrix<S> out(table.rows(), table.cols());
  for (std::size_t n = 0; n < table.rows(); ++n) {
    auto src = table.row(n);
    auto dst = out.row(n);
    for (std::size_t d = 0; d < table.cols(); ++d) dst[d] = s[n] * src[d];
  }
  return out;
}

// Mean pairwise Dice similarity over ordered token pairs j != k; in [0, 1]
// for sigmoid-range masks, 1 when all rows are identical and nonzero.
// T == 1 has no pairs and is defined as 0.
template <typename S>
S diversity_loss(const Matrix<S>& mask) {
  static constexpr S kEps = S(1e-12);
  const std::size_t tcount = mask.rows();
  if (tcount < 2) return S(0);
  std::vector<S> sq(tcount, S(0));
  for (std::size_t j = 0; j < tcount; ++j) {
    auto row = mask.row(j);
    for (S v : row) sq[j] += v * v;
  }
  S total = 0;
  for (std::size_t j = 0; j < tcount; ++j) {
    for (std::size_t k = j + 1; k < tcount; ++k) {
      S dot = 0;
      auto rj = mask.row(j), rk = mask.row(k);
      for (std::size_t n = 0; n < mask.cols(); ++n) dot += rj[n] * rk[n];
      total += S(2) * dot / (sq[j] + sq[k] + kEps);
    }
  }
  // ordered pairs double each unordered one; the factors cancel.
  return S(2) * total / S(tcount * (tcount - 1));
}

// d diversity_loss / d M, accumulated into grad (scaled).
template <typename S>
void diversity_loss_grad(const Matrix<S>& mask, S scale, Matrix<S>& grad) {
  static constexpr S kEps = S(1e-12);
  const std::size_t tcount = mask.rows();
  if (tcount < 2) return;
  require_shape(grad, mask.rows(), mask.cols(), "diversity_loss_grad");
  std::vector<S> sq(tcount, S(0));
  for (std::size_t j = 0; j < tcount; ++j) {
    auto row = mask.row(j);
    for (S v : row) sq[j] += v * v;
  }
  const S w = scale * S(2) / S(tcount * (tcount - 1));
  for (std::size_t j = 0; j < tcount; ++j) {
    for (std::size_t k = j + 1; k < tcount; ++k) {
      auto rj = mask.row(j), rk = mask.row(k);
      S dot = 0;
      for (std::size_t n = 0; n < mask.cols(); ++n) dot += rj[n] * rk[n];
      const S denom = sq[j] + sq[k] + kEps;
      const S dice = S(2) * dot / denom;
      for (std::size_t n = 0; n < mask.cols(); ++n) {
        grad(j, n) += w * (S(2) * rk[n] - dice * S(2) * rj[n]) / denom;
        grad(k, n) += w * (S(2) * rj[n] - dice * S(2) * rk[n]) / denom;
      }
    }
  }
}

// Stage-I objective: hinge loss over masked entity and relation rows plus
// lambda times the mean of the two diversity losses. Pure in the token
// matrices; the embedding tables are frozen inputs.
template <typename S>
S token_objective(const Matrix<S>& ent, const Matrix<S>& rel, const Matrix<S>& ent_tokens,
                  const Matrix<S>& rel_tokens, std::span<const Triple> positives,
                  std::span<const Triple> negatives, S gamma, S lambda) {
  Matrix<S> ent_mask = compute_mask(ent_tokens, ent);
  Matrix<S> rel_mask = compute_mask(rel_tokens, rel);
  Matrix<S> ent_hat = masked_embeddings(ent_mask, ent);
  Matrix<S> rel_hat = masked_embeddings(rel_mask, rel);
  S trans = transe_batch_loss<S>(ent_hat, rel_hat, positives, negatives, gamma);
  S div = (diversity_loss(ent_mask) + diversity_loss(rel_mask)) / S(2);
  return trans + lambda * div;
}

// Gradient of token_objective w.r.t. both token sets, accumulated (scaled).
// Chain: the hinge sees e_hat_n = s_n e_n with s_n the mask column sum, so the
// translational term reaches M through ds/dM = 1 with weight <dL/de_hat_n, e_n>;
// the diversity term reaches M directly; then dM_tn/dz_t = M(1-M) e_n.
template <typename S>
S token_objective_grad(const Matrix<S>& ent, const Matrix<S>& rel,
                       const Matrix<S>& ent_tokens, const Matrix<S>& rel_tokens,
                       std::span<const Triple> positives, std::span<const Triple> negatives,
                       S gamma, S lambda, S scale, Matrix<S>& grad_ent_tokens,
                       Matrix<S>& grad_rel_tokens) {
  Matrix<S> ent_mask = compute_mask(ent_tokens, ent);
  Matrix<S> rel_mask = compute_mask(rel_tokens, rel);
  Matrix<S> ent_hat = masked_embeddings(ent_mask, ent);
  Matrix<S> rel_hat = masked_embeddings(rel_mask, rel);

  // dL_trans/de_hat rows, then collapse each to the scalar weight c_n.
  Matrix<S> ghat_ent(ent.rows(), ent.cols());
  Matrix<S> ghat_rel(rel.rows(), rel.cols());
  S trans = transe_batch_loss_grad<S>(ent_hat, rel_hat, positives, negatives, gamma, S(1),
                                      ghat_ent, ghat_rel);

  auto collapse = [](const Matrix<S>& ghat, const Matrix<S>& table) {
    std::vector<S> c(table.rows(), S(0));
    for (std::size_t n = 0; n < table.rows(); ++n) {
      auto g = ghat.row(n);
      auto e = table.row(n);
      S dot = 0;
      for (std::size_t d = 0; d < table.cols(); ++d) dot += g[d] * e[d];
      c[n] = dot;
    }
    return c;
  };
  std::vector<S> c_ent = collapse(ghat_ent, ent);
  std::vector<S> c_rel = collapse(ghat_rel, rel);

  auto backprop = [scale](const Matrix<S>& mask, const Matrix<S>& table,
                          const std::vector<S>& c, S lambda_half, Matrix<S>& grad_tokens) {
    Matrix<S> grad_mask(mask.rows(), mask.cols());
    for (std::size_t t = 0; t < mask.rows(); ++t) {
      for (std::size_t n = 0; n < mask.cols(); ++n) grad_mask(t, n) = c[n];
    }
    diversity_loss_grad(mask, lambda_half, grad_mask);
    for (std::size_t t = 0; t < mask.rows(); ++t) {
      auto gz = grad_tokens.row(t);
      for (std::size_t n = 0; n < mask.cols(); ++n) {
        const S m = mask(t, n);
        const S coeff = scale * grad_mask(t, n) * m * (S(1) - m);
        if (coeff == S(0)) continue;
        auto e = table.row(n);
        for (std::size_t d = 0; d < table.cols(); ++d) gz[d] += coeff * e[d];
      }
    }
  };
  backprop(ent_mask, ent, c_ent, lambda / S(2), grad_ent_tokens);
  backprop(rel_mask, rel, c_rel, lambda / S(2), grad_rel_tokens);

  S div = (diversity_loss(ent_mask) + diversity_loss(rel_mask)) / S(2);
  return trans + lambda * div;
}

}  // namespace ettckge
