#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ettckge/distill.hpp"
#include "ettckge/matrix.hpp"
#include "ettckge/rng.hpp"
#include "ettckge/scoring.hpp"
#include "ettckge/tokens.hpp"

namespace ettckge {

enum class GradComponent { Margin, Diversity, Distill, TokenObjective, Total };

inline GradComponent parse_grad_component(const std::string& name) {
  if (name == "margin") return GradComponent::Margin;
  if (name == "diversity") return GradComponent::Diversity;
  if (name == "distill") return GradComponent::Distill;
  if (name == "token_objective") return GradComponent::TokenObjective;
  if (name == "total") return GradComponent::Total;
  throw ParseError("unknown gradient component: " + name);
}

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst_coordinate;

  void update(double err, const std::string& coord) {
    if (err > max_rel_error) {
      max_rel_error = err;
      worst_coordinate = coord;
    }
  }
};

namespace gradcheck_detail {

inline constexpr double kFdStep = 1e-5;

// Central finite differences over every entry of `params`, compared against
// the analytic gradient. The relative-error floor keeps near-zero gradients
// from amplifying FD truncation noise.
inline void check_matrix(Matrix<double>& params, const Matrix<double>& analytic,
                         const std::function<double()>& loss, const std::string& label,
                         GradCheckResult& result) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& p = params.data()[i];
    const double orig = p;
    p = orig + kFdStep;
    const double up = loss();
    p = orig - kFdStep;
    const double down = loss();
    p = orig;
    const double fd = (up - down) / (2 * kFdStep);
    const double a = analytic.data()[i];
    const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-3});
    result.update(err, label + "[" + std::to_string(i) + "] analytic=" + std::to_string(a) +
                           " fd=" + std::to_string(fd));
  }
}

inline Matrix<double> random_matrix(std::size_t rows, std::size_t cols,
                                    std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Matrix<double> m(rows, cols);
  for (double& v : m.data()) v = unif(rng);
  return m;
}

inline std::vector<Triple> random_triples(std::size_t count, std::size_t ne, std::size_t nr,
                                          std::mt19937_64& rng) {
  std::uniform_int_distribution<Id> pe(0, Id(ne - 1));
  std::uniform_int_distribution<Id> pr(0, Id(nr - 1));
  std::vector<Triple> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back({pe(rng), pr(rng), pe(rng)});
  return out;
}

// FD with step h straddles the hinge kink when |gamma + f+ - f-| is tiny;
// such instances are rejected and redrawn.
inline bool hinge_safe(const Matrix<double>& ent, const Matrix<double>& rel,
                       const std::vector<Triple>& pos, const std::vector<Triple>& negs,
                       double gamma) {
  const std::size_t k = negs.size() / pos.size();
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const Triple& p = pos[i];
    double fp = transe_score<double>(ent.row(p.head), rel.row(p.relation), ent.row(p.tail));
    for (std::size_t j = 0; j < k; ++j) {
      const Triple& q = negs[i * k + j];
      double fn = transe_score<double>(ent.row(q.head), rel.row(q.relation), ent.row(q.tail));
      if (std::abs(gamma + fp - fn) < 1e-3) return false;
    }
  }
  return true;
}

}  // namespace gradcheck_detail

// Checks analytic gradients of one loss component against central finite
// differences on random small instances. 64-bit only.
inline GradCheckResult grad_check(GradComponent component, std::size_t trials,
                                  std::uint64_t seed) {
  using namespace gradcheck_detail;
  GradCheckResult result;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    auto rng = make_engine(seed, 0x9cad, trial);
    std::uniform_int_distribution<std::size_t> pick_n(2, 8), pick_d(2, 6), pick_t(2, 3);
    const std::size_t ne = pick_n(rng), nr = std::max<std::size_t>(2, pick_n(rng) / 2);
    const std::size_t dim = pick_d(rng), tcount = pick_t(rng);
    const std::string tag = "trial" + std::to_string(trial) + ":";

    switch (component) {
      case GradComponent::Margin: {
        const double gamma = 1.0;
        Matrix<double> ent, rel;
        std::vector<Triple> pos, negs;
        do {
          ent = random_matrix(ne, dim, rng, -1, 1);
          rel = random_matrix(nr, dim, rng, -1, 1);
          pos = random_triples(3, ne, nr, rng);
          negs = random_triples(6, ne, nr, rng);
        } while (!hinge_safe(ent, rel, pos, negs, gamma));
        Matrix<double> gent(ne, dim), grel(nr, dim);
        transe_batch_loss_grad<double>(ent, rel, pos, negs, gamma, 1.0, gent, grel);
        auto loss = [&] { return transe_batch_loss<double>(ent, rel, pos, negs, gamma); };
        check_matrix(ent, gent, loss, tag + "ent", result);
        check_matrix(rel, grel, loss, tag + "rel", result);
        break;
      }
      case GradComponent::Diversity: {
        Matrix<double> mask = random_matrix(tcount, ne, rng, 0.05, 0.95);
        Matrix<double> gmask(tcount, ne);
        diversity_loss_grad(mask, 1.0, gmask);
        auto loss = [&] { return double(diversity_loss(mask)); };
        check_matrix(mask, gmask, loss, tag + "mask", result);
        break;
      }
      case GradComponent::Distill: {
        Matrix<double> prev = random_matrix(ne, dim, rng, -1, 1);
        Matrix<double> cur = random_matrix(ne, dim, rng, -1, 1);
        Matrix<double> tokens = random_matrix(tcount, dim, rng, -1, 1);
        const std::size_t overlap = std::max<std::size_t>(1, ne - 1);
        Matrix<double> gcur(ne, dim);
        distill_loss_grad<double>(prev, cur, tokens, overlap, 1.0, gcur, true);
        auto loss = [&] { return distill_loss<double>(prev, cur, tokens, overlap); };
        check_matrix(cur, gcur, loss, tag + "cur", result);
        break;
      }
      case GradComponent::TokenObjective: {
        Matrix<double> ent = random_matrix(ne, dim, rng, -1, 1);
        Matrix<double> rel = random_matrix(nr, dim, rng, -1, 1);
        Matrix<double> ze = random_matrix(tcount, dim, rng, -1, 1);
        Matrix<double> zr = random_matrix(tcount, dim, rng, -1, 1);
        std::vector<Triple> pos = random_triples(3, ne, nr, rng);
        std::vector<Triple> negs = random_triples(6, ne, nr, rng);
        const double gamma = 1.0, lambda = 0.5;
        Matrix<double> gze(tcount, dim), gzr(tcount, dim);
        token_objective_grad<double>(ent, rel, ze, zr, pos, negs, gamma, lambda, 1.0, gze, gzr);
        auto loss = [&] {
          return token_objective<double>(ent, rel, ze, zr, pos, negs, gamma, lambda);
        };
        check_matrix(ze, gze, loss, tag + "ent_tokens", result);
        check_matrix(zr, gzr, loss, tag + "rel_tokens", result);
        break;
      }
      case GradComponent::Total: {
        const double gamma = 1.0, alpha = 2.0;
        Matrix<double> ent_prev = random_matrix(ne, dim, rng, -1, 1);
        Matrix<double> rel_prev = random_matrix(nr, dim, rng, -1, 1);
        Matrix<double> ze = random_matrix(tcount, dim, rng, -1, 1);
        Matrix<double> zr = random_matrix(tcount, dim, rng, -1, 1);
        Matrix<double> ent, rel;
        std::vector<Triple> pos, negs;
        do {
          ent = random_matrix(ne, dim, rng, -1, 1);
          rel = random_matrix(nr, dim, rng, -1, 1);
          pos = random_triples(3, ne, nr, rng);
          negs = random_triples(6, ne, nr, rng);
        } while (!hinge_safe(ent, rel, pos, negs, gamma));
        const std::size_t e_ov = ne - 1, r_ov = nr - 1;
        Matrix<double> gent(ne, dim), grel(nr, dim);
        transe_batch_loss_grad<double>(ent, rel, pos, negs, gamma, 1.0, gent, grel);
        distill_loss_grad<double>(ent_prev, ent, ze, e_ov, alpha, gent, true);
        distill_loss_grad<double>(rel_prev, rel, zr, r_ov, alpha, grel, true);
        auto loss = [&] {
          return transe_batch_loss<double>(ent, rel, pos, negs, gamma) +
                 alpha * (distill_loss<double>(ent_prev, ent, ze, e_ov) +
                          distill_loss<double>(rel_prev, rel, zr, r_ov));
        };
        check_matrix(ent, gent, loss, tag + "ent", result);
        check_matrix(rel, grel, loss, tag + "rel", result);
        break;
      }
    }
  }
  return result;
}

}  // namespace ettckge
