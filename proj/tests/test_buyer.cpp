#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fisherlab/buyer.hpp"
#include "fisherlab/distributions.hpp"

using namespace fisherlab;

TEST_CASE("bang_per_buck_set picks ratio maximizers", "[buyer]") {
  CHECK(bang_per_buck_set({5.0, 10.0}, {1.0, 1.0}) == std::vector<std::size_t>{1});
  CHECK(bang_per_buck_set({1.0, 2.0}, {0.5, 1.0}) == std::vector<std::size_t>{0, 1});
  CHECK(bang_per_buck_set({1.0, 0.0}, {0.5, 0.5}) == std::vector<std::size_t>{0});
}

TEST_CASE("bang_per_buck_set rejects bad inputs", "[buyer]") {
  CHECK_THROWS_AS(bang_per_buck_set({1.0, 1.0}, {1.0, 0.0}), NonpositivePriceError);
  CHECK_THROWS_AS(bang_per_buck_set({1.0, 1.0}, {1.0, -2.0}), NonpositivePriceError);
  CHECK_THROWS_AS(bang_per_buck_set({0.0, 0.0}, {1.0, 1.0}), ZeroUtilityError);
}

TEST_CASE("optimal_bundle exhausts the budget under both tie rules", "[buyer]") {
  const Allocation a = optimal_bundle({1.0, {1.0, 0.0}}, {0.5, 0.5}, TieRule::LowestIndex);
  CHECK(a[0] == Catch::Approx(2.0));
  CHECK(a[1] == 0.0);

  const Allocation lo = optimal_bundle({2.0, {1.0, 1.0}}, {1.0, 1.0}, TieRule::LowestIndex);
  CHECK(lo == Allocation{2.0, 0.0});
  const Allocation split = optimal_bundle({2.0, {1.0, 1.0}}, {1.0, 1.0}, TieRule::UniformSplit);
  CHECK(split[0] == Catch::Approx(1.0));
  CHECK(split[1] == Catch::Approx(1.0));
}

TEST_CASE("indirect utility matches hand values", "[buyer]") {
  CHECK(indirect_utility({1.0, {1.0, 0.0}}, {0.5, 0.5}) == Catch::Approx(2.0));
  CHECK(indirect_utility({3.0, {2.0, 1.0}}, {1.0, 1.0}) == Catch::Approx(6.0));
}

TEST_CASE("budget exhaustion and bundle consistency on random draws", "[buyer]") {
  RngStream rng(101, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t m = 1 + static_cast<std::size_t>(rng.next_unit() * 4);
    BuyerProfile b;
    b.budget = 0.1 + 5.0 * rng.next_unit();
    PriceVector p;
    bool any = false;
    for (std::size_t j = 0; j < m; ++j) {
      const double u = rng.next_unit() < 0.2 ? 0.0 : 0.1 + rng.next_unit();
      any = any || u > 0.0;
      b.utilities.push_back(u);
      p.push_back(0.05 + 2.0 * rng.next_unit());
    }
    if (!any) b.utilities[0] = 1.0;

    for (TieRule rule : {TieRule::LowestIndex, TieRule::UniformSplit}) {
      const Allocation x = optimal_bundle(b, p, rule);
      double spent = 0.0, value = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        spent += p[j] * x[j];
        value += b.utilities[j] * x[j];
      }
      CHECK(std::abs(spent - b.budget) <= 1e-12 * b.budget);
      CHECK(value == Catch::Approx(indirect_utility(b, p)).epsilon(1e-12));
    }
  }
}

TEST_CASE("grid search never beats the demand oracle", "[buyer]") {
  RngStream rng(77, 1);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t m = 2 + (rng.next_u64() % 2);
    BuyerProfile b;
    b.budget = 0.2 + 3.0 * rng.next_unit();
    PriceVector p;
    for (std::size_t j = 0; j < m; ++j) {
      b.utilities.push_back(0.05 + rng.next_unit());
      p.push_back(0.1 + rng.next_unit());
    }
    const double opt = indirect_utility(b, p);

    // Budget-share grid over the simplex, step 1e-2 here; the acceptance
    // suite repeats this at the finer 1e-3 resolution.
    const int steps = 100;
    double best = 0.0;
    if (m == 2) {
      for (int i = 0; i <= steps; ++i) {
        const double a1 = static_cast<double>(i) / steps;
        best = std::max(best, b.budget * (a1 * b.utilities[0] / p[0] +
                                          (1.0 - a1) * b.utilities[1] / p[1]));
      }
    } else {
      for (int i = 0; i <= steps; ++i)
        for (int k = 0; k + i <= steps; ++k) {
          const double a1 = static_cast<double>(i) / steps;
          const double a2 = static_cast<double>(k) / steps;
          best = std::max(best, b.budget * (a1 * b.utilities[0] / p[0] +
                                            a2 * b.utilities[1] / p[1] +
                                            (1.0 - a1 - a2) * b.utilities[2] / p[2]));
        }
    }
    CHECK(best <= opt + 1e-9);
  }
}

TEST_CASE("choice set is invariant to scaling of utilities or prices", "[buyer]") {
  RngStream rng(7, 2);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> u;
    PriceVector p;
    for (int j = 0; j < 4; ++j) {
      u.push_back(rng.next_unit());
      p.push_back(0.1 + rng.next_unit());
    }
    if (u[0] <= 0.0) u[0] = 0.5;
    const double alpha = 0.2 + 5.0 * rng.next_unit();
    const double beta = 0.2 + 5.0 * rng.next_unit();

    std::vector<double> au(u);
    for (double& v : au) v *= alpha;
    PriceVector bp(p);
    for (double& v : bp) v *= beta;

    const auto base = bang_per_buck_set(u, p);
    CHECK(bang_per_buck_set(au, p) == base);
    CHECK(bang_per_buck_set(u, bp) == base);

    BuyerProfile buyer{1.5, u};
    const Allocation x = optimal_bundle(buyer, p, TieRule::LowestIndex);
    const Allocation xs = optimal_bundle(buyer, bp, TieRule::LowestIndex);
    for (std::size_t j = 0; j < x.size(); ++j)
      CHECK(xs[j] == Catch::Approx(x[j] / beta).margin(1e-12));
  }
}
