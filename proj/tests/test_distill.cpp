#include <doctest.h>

#include <algorithm>
#include <vector>

#include "ettckge/distill.hpp"
#include "ettckge/rng.hpp"

using namespace ettckge;

namespace {

Matrix<double> random_mat(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1,
                          double hi = 1) {
  auto rng = make_engine(seed, 1);
  std::uniform_real_distribution<double> unif(lo, hi);
  Matrix<double> m(r, c);
  for (double& v : m.data()) v = unif(rng);
  return m;
}

// Formula-level oracle: joint mask and per-row squared distances given
// explicitly.
double distill_oracle(const Matrix<double>& joint, const std::vector<double>& dist) {
  double total = 0;
  for (std::size_t t = 0; t < joint.rows(); ++t) {
    for (std::size_t n = 0; n < joint.cols(); ++n) total += joint(t, n) * dist[n];
  }
  return total / double(joint.rows() * joint.cols());
}

}  // namespace

TEST_CASE("aligned mask is the elementwise product") {
  Matrix<double> a(2, 3, 0.5), b(2, 3, 0.5);
  Matrix<double> joint = aligned_mask(a, b);
  for (double v : joint.data()) CHECK(v == 0.25);

  SUBCASE("limit toward 1 recovers the other mask") {
    Matrix<double> almost_one(2, 3, 1.0 - 1e-12);
    Matrix<double> other = random_mat(2, 3, 2, 0.1, 0.9);
    Matrix<double> j = aligned_mask(other, almost_one);
    for (std::size_t i = 0; i < j.size(); ++i) {
      CHECK(j.data()[i] == doctest::Approx(other.data()[i]).epsilon(1e-9));
    }
  }

  SUBCASE("joint <= min of the inputs elementwise") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Matrix<double> p = random_mat(3, 7, 10 + seed, 0.01, 0.99);
      Matrix<double> c = random_mat(3, 7, 60 + seed, 0.01, 0.99);
      Matrix<double> j = aligned_mask(p, c);
      for (std::size_t i = 0; i < j.size(); ++i) {
        CHECK(j.data()[i] <= std::min(p.data()[i], c.data()[i]));
      }
    }
  }

  SUBCASE("shape mismatch throws") {
    Matrix<double> c(2, 4);
    CHECK_THROWS_AS(aligned_mask(a, c), ShapeError);
  }
}

TEST_CASE("distill oracle closed form") {
  // T=1, N_ov=2, joint mask [0.5, 0.5], squared distances [0, 1] -> 0.25
  Matrix<double> joint(1, 2, 0.5);
  CHECK(distill_oracle(joint, {0.0, 1.0}) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("distill loss matches the mask-and-distance oracle") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Matrix<double> prev = random_mat(6, 3, 100 + seed);
    Matrix<double> cur = random_mat(6, 3, 200 + seed);
    Matrix<double> tokens = random_mat(2, 3, 300 + seed);
    const std::size_t overlap = 4;

    Matrix<double> joint = aligned_mask(compute_mask(tokens, prev, overlap),
                                        compute_mask(tokens, cur, overlap));
    std::vector<double> dist(overlap, 0.0);
    for (std::size_t n = 0; n < overlap; ++n) {
      for (std::size_t d = 0; d < 3; ++d) {
        double x = prev(n, d) - cur(n, d);
        dist[n] += x * x;
      }
    }
    CHECK(distill_loss(prev, cur, tokens, overlap) ==
          doctest::Approx(distill_oracle(joint, dist)).epsilon(1e-12));
  }
}

TEST_CASE("distill loss is zero iff overlap rows agree") {
  Matrix<double> prev = random_mat(5, 4, 1);
  Matrix<double> cur = prev;
  Matrix<double> tokens = random_mat(3, 4, 2);
  CHECK(distill_loss(prev, cur, tokens, 5) == 0.0);

  cur(4, 2) += 0.5;  // non-overlap row when overlap = 4
  CHECK(distill_loss(prev, cur, tokens, 4) == 0.0);

  cur(1, 0) += 0.5;
  CHECK(distill_loss(prev, cur, tokens, 4) > 0.0);
}

TEST_CASE("rows outside the overlap never contribute") {
  Matrix<double> prev = random_mat(6, 3, 3);
  Matrix<double> cur = random_mat(6, 3, 4);
  Matrix<double> tokens = random_mat(2, 3, 5);
  double before = distill_loss(prev, cur, tokens, 4);
  cur(5, 1) += 10.0;
  CHECK(distill_loss(prev, cur, tokens, 4) == before);
}

TEST_CASE("empty overlap yields zero") {
  Matrix<double> prev(0, 3), cur = random_mat(4, 3, 6), tokens = random_mat(2, 3, 7);
  CHECK(distill_loss(prev, cur, tokens, 0) == 0.0);
}

TEST_CASE("distill loss is invariant to token order") {
  Matrix<double> prev = random_mat(5, 3, 8);
  Matrix<double> cur = random_mat(5, 3, 9);
  Matrix<double> tokens = random_mat(3, 3, 10);
  Matrix<double> reversed(3, 3);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t d = 0; d < 3; ++d) reversed(t, d) = tokens(2 - t, d);
  }
  CHECK(distill_loss(prev, cur, tokens, 5) ==
        doctest::Approx(distill_loss(prev, cur, reversed, 5)).epsilon(1e-12));
}

TEST_CASE("total loss composition: alpha scaling and reductions") {
  Matrix<double> prev = random_mat(5, 3, 11);
  Matrix<double> cur = random_mat(5, 3, 12);
  Matrix<double> rel = random_mat(2, 3, 13);
  Matrix<double> tokens = random_mat(2, 3, 14);
  std::vector<Triple> pos = {{0, 0, 1}};
  std::vector<Triple> negs = {{0, 0, 2}, {3, 0, 1}};
  const double gamma = 1.0;

  double trans = transe_batch_loss<double>(cur, rel, pos, negs, gamma);
  double dist = distill_loss(prev, cur, tokens, 5);
  REQUIRE(dist > 0.0);

  // alpha = 0 reduces to fine-tuning; doubling alpha doubles the gap
  CHECK(trans + 0.0 * dist == trans);
  double total1 = trans + 100.0 * dist;
  double total2 = trans + 200.0 * dist;
  CHECK(total2 - trans == doctest::Approx(2.0 * (total1 - trans)).epsilon(1e-12));

  // equal overlap removes the distillation term entirely
  CHECK(trans + 100.0 * distill_loss(prev, prev, tokens, 5) == trans);
}
