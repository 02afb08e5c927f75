#include <doctest.h>

#include <cmath>
#include <vector>

#include "ettckge/rng.hpp"
#include "ettckge/scoring.hpp"

using namespace ettckge;

TEST_CASE("transe score closed forms") {
  std::vector<double> h = {1, 0}, r = {0, 1}, t = {1, 1};
  CHECK(transe_score<double>(h, r, t) == 0.0);

  std::vector<double> h2 = {1, 2}, r2 = {3, 4}, t2 = {0, 0};
  CHECK(transe_score<double>(h2, r2, t2) == 52.0);  // 4^2 + 6^2
}

TEST_CASE("transe score is non-negative and symmetric under swap-negate") {
  auto rng = make_engine(11, 0);
  std::uniform_real_distribution<double> unif(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> h(4), r(4), t(4), neg_r(4);
    for (int d = 0; d < 4; ++d) {
      h[d] = unif(rng);
      r[d] = unif(rng);
      t[d] = unif(rng);
      neg_r[d] = -r[d];
    }
    double s = transe_score<double>(h, r, t);
    CHECK(s >= 0.0);
    CHECK(transe_score<double>(t, neg_r, h) == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("transe score rejects mismatched dims") {
  std::vector<double> h = {1, 0}, r = {0, 1, 2}, t = {1, 1};
  CHECK_THROWS_AS(transe_score<double>(h, r, t), ShapeError);
}

TEST_CASE("margin loss closed forms") {
  std::vector<double> pos = {1}, neg = {12};
  CHECK(margin_loss<double>(pos, neg, 9.0) == 0.0);
  neg = {5};
  CHECK(margin_loss<double>(pos, neg, 9.0) == 5.0);
  pos = {3.5};
  neg = {3.5};
  CHECK(margin_loss<double>(pos, neg, 0.0) == 0.0);
}

TEST_CASE("margin loss monotone in scores") {
  std::vector<double> pos = {2, 3}, neg = {4, 1};
  double base = margin_loss<double>(pos, neg, 9.0);
  std::vector<double> worse_neg = {3.5, 0.5};
  CHECK(margin_loss<double>(pos, worse_neg, 9.0) >= base);
  std::vector<double> worse_pos = {2.5, 3.5};
  CHECK(margin_loss<double>(worse_pos, neg, 9.0) >= base);
}

TEST_CASE("negative sampling with two entities has one alternative") {
  auto rng = make_engine(1, 2);
  Triple t{0, 0, 1};
  for (int i = 0; i < 50; ++i) {
    for (const Triple& neg : sample_negatives(t, 2, 4, rng)) {
      const bool head_corrupted = neg.head != t.head;
      if (head_corrupted) {
        CHECK(neg.head == 1);
        CHECK(neg.tail == 1);
      } else {
        CHECK(neg.tail == 0);
      }
      CHECK(neg.relation == t.relation);
    }
  }
}

TEST_CASE("negative sampling is deterministic per seed") {
  auto rng1 = make_engine(42, 7);
  auto rng2 = make_engine(42, 7);
  Triple t{3, 1, 5};
  for (int i = 0; i < 20; ++i) {
    CHECK(sample_negatives(t, 10, 5, rng1) == sample_negatives(t, 10, 5, rng2));
  }
}

TEST_CASE("negative sampling cannot corrupt a singleton vocabulary") {
  auto rng = make_engine(0, 0);
  CHECK_THROWS_AS(sample_negatives(Triple{0, 0, 0}, 1, 1, rng), StructuralError);
}

TEST_CASE("replacement ids are uniform (5 sigma)") {
  auto rng = make_engine(123, 9);
  const std::size_t ne = 10;
  Triple t{0, 0, 1};
  std::vector<std::size_t> head_counts(ne, 0), tail_counts(ne, 0);
  std::size_t head_draws = 0, tail_draws = 0;
  for (int i = 0; i < 100000; ++i) {
    Triple neg = sample_negatives(t, ne, 1, rng)[0];
    if (neg.head != t.head) {
      ++head_counts[neg.head];
      ++head_draws;
    } else {
      ++tail_counts[neg.tail];
      ++tail_draws;
    }
  }
  auto check_uniform = [](const std::vector<std::size_t>& counts, std::size_t draws,
                          Id excluded) {
    const double p = 1.0 / 9.0;
    const double mean = double(draws) * p;
    const double sigma = std::sqrt(double(draws) * p * (1 - p));
    for (Id e = 0; e < counts.size(); ++e) {
      if (e == excluded) {
        CHECK(counts[e] == 0);
        continue;
      }
      CHECK(std::abs(double(counts[e]) - mean) < 5 * sigma);
    }
  };
  check_uniform(head_counts, head_draws, 0);
  check_uniform(tail_counts, tail_draws, 1);
  // the corrupted side itself is a fair coin
  CHECK(std::abs(double(head_draws) - 50000.0) < 5 * std::sqrt(100000 * 0.25));
}
