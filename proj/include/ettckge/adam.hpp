#pragma once

#include <cmath>

#include "ettckge/matrix.hpp"

namespace ettckge {

template <typename S>
struct AdamState {
  Matrix<S> m;  // first moment
  Matrix<S> v;  // second moment
  std::size_t step = 0;

  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols) : m(rows, cols), v(rows, cols) {}

  void reset(std::size_t rows, std::size_t cols) {
    m = Matrix<S>(rows, cols);
    v = Matrix<S>(rows, cols);
    step = 0;
  }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected Adam. Non-finite gradients abort; nothing is
// clamped silently.
template <typename S>
void adam_step(Matrix<S>& params, const Matrix<S>& grads, AdamState<S>& state,
               const AdamConfig& cfg) {
  if (!params.same_shape(grads) || !params.same_shape(state.m)) {
    throw ShapeError("adam_step: parameter/gradient/moment shapes differ");
  }
  ++state.step;
  const S b1 = S(cfg.beta1), b2 = S(cfg.beta2);
  const S corr1 = S(1) - S(std::pow(cfg.beta1, double(state.step)));
  const S corr2 = S(1) - S(std::pow(cfg.beta2, double(state.step)));
  const S lr = S(cfg.lr), eps = S(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const S g = grads.data()[i];
    if (!std::isfinite(double(g))) {
      throw NumericError("adam_step: non-finite gradient at flat index " + std::to_string(i));
    }
    S& m = state.m.data()[i];
    S& v = state.v.data()[i];
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g * g;
    const S mhat = m / corr1;
    const S vhat = v / corr2;
    params.data()[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
  if (!params.all_finite()) {
    throw NumericError("adam_step: parameters became non-finite");
  }
}

}  // namespace ettckge
