#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "rtmpc/lipnet.hpp"
#include "rtmpc/rtopt.hpp"

using namespace rtmpc;

TEST_CASE("cone envelope picks the lowest cone") {
  LipschitzDataset data;
  CHECK_FALSE(data.query(Vec::Zero(1)).has_value());

  Vec u1 = Vec::Constant(2, 1.0);
  Vec u2 = Vec::Constant(2, 2.0);
  Vec x1 = Vec::Zero(1);
  Vec x2 = Vec::Constant(1, 2.0);
  REQUIRE(data.insert(u1, x1, 1.0, 1.0));
  REQUIRE(data.insert(u2, x2, 0.2, 1.0));

  Vec q = Vec::Constant(1, 0.5);
  const auto result = data.query(q);
  REQUIRE(result.has_value());
  // Cones evaluate to 1.5 and 1.7; the first record wins.
  CHECK(result->index == 0);
  CHECK(result->value == doctest::Approx(1.5).epsilon(1e-14));

  // Zero-distance apex returns the stored cost exactly.
  const auto apex = data.query(x2);
  REQUIRE(apex.has_value());
  CHECK(apex->index == 1);
  CHECK(apex->value == 0.2);
}

TEST_CASE("singleton dataset and tie breaking") {
  LipschitzDataset data;
  data.insert(Vec::Ones(2), Vec::Zero(2), 0.7, 2.0);
  const auto q = data.query(Vec::Ones(2));
  REQUIRE(q.has_value());
  CHECK(q->value == doctest::Approx(0.7 + 2.0 * std::sqrt(2.0)).epsilon(1e-14));

  // Two identical records: the earlier insertion wins the tie.
  LipschitzDataset ties;
  ties.insert(Vec::Ones(1), Vec::Zero(1), 1.0, 1.0);
  ties.insert(Vec::Ones(1), Vec::Zero(1), 1.0, 1.0);
  CHECK(ties.query(Vec::Constant(1, 0.3))->index == 0);
}

TEST_CASE("insert maintains the running maximum and rejects junk") {
  LipschitzDataset data;
  CHECK(data.insert(Vec::Ones(1), Vec::Zero(1), 1.0, 1.0));
  CHECK(data.max_lipschitz() == 1.0);
  CHECK(data.insert(Vec::Ones(1), Vec::Ones(1), 1.0, 3.0));
  CHECK(data.max_lipschitz() == 3.0);
  CHECK_FALSE(data.insert(Vec::Ones(1), Vec::Zero(1), kInfinity, 1.0));
  CHECK_FALSE(data.insert(Vec::Ones(1), Vec::Zero(1), 1.0, 0.0));
  CHECK_FALSE(data.insert(Vec::Ones(1), Vec::Zero(1), 1.0, -2.0));
  CHECK(data.size() == 2);
}

TEST_CASE("inserting a dominated record leaves the envelope unchanged") {
  std::mt19937 rng(3);
  LipschitzDataset data;
  for (int i = 0; i < 10; ++i) {
    data.insert(testing::random_vec(rng, 2, -1, 1), testing::random_vec(rng, 2, -1, 1),
                0.1 + 0.05 * i, 1.0);
  }
  std::vector<Vec> grid;
  for (int i = 0; i < 50; ++i) {
    grid.push_back(testing::random_vec(rng, 2, -2, 2));
  }
  std::vector<double> before;
  for (const Vec& g : grid) {
    before.push_back(data.query(g)->value);
  }
  // A cone lying above the current envelope everywhere on the grid.
  data.insert(Vec::Zero(2), Vec::Zero(2), 50.0, 1.0);
  for (size_t i = 0; i < grid.size(); ++i) {
    CHECK(data.query(grid[i])->value == before[i]);
  }
}

TEST_CASE("envelope is monotone in the data and matches an exhaustive scan") {
  std::mt19937 rng(11);
  LipschitzDataset data;
  std::vector<Vec> probes;
  for (int i = 0; i < 20; ++i) {
    probes.push_back(testing::random_vec(rng, 3, -2, 2));
  }
  std::vector<double> bound(probes.size(), kInfinity);
  for (int step = 0; step < 60; ++step) {
    data.insert(testing::random_vec(rng, 2, -1, 1), testing::random_vec(rng, 3, -2, 2),
                std::abs(testing::random_vec(rng, 1, 0, 3)(0)),
                0.5 + std::abs(testing::random_vec(rng, 1, 0, 2)(0)));
    for (size_t p = 0; p < probes.size(); ++p) {
      const auto q = data.query(probes[p]);
      REQUIRE(q.has_value());
      CHECK(q->value <= bound[p] + 1e-12);
      bound[p] = q->value;
      // The query is definitionally an exhaustive scan; re-verify.
      double best = kInfinity;
      for (int i = 0; i < data.size(); ++i) {
        const auto& rec = data.record(i);
        best = std::min(best, rec.J + rec.L * (rec.x - probes[p]).norm());
      }
      CHECK(q->value == best);
    }
  }
}

TEST_CASE("cone envelope upper-bounds the warm start cost on the unicycle") {
  const Scenario scenario = testing::preset_scenario("unicycle");
  const CostModel& cost = *scenario.cost;
  std::mt19937 rng(17);
  LipschitzDataset data;
  for (int i = 0; i < 60; ++i) {
    const Vec U = testing::random_vec(rng, cost.input_sequence_dim(), -1.0, 1.0);
    const Vec x = testing::random_vec(rng, 3, -2.0, 2.0);
    data.insert(U, x, cost.total(U, x), cost.lipschitz_bound(U));
  }
  const double Lmax = data.max_lipschitz();
  for (int trial = 0; trial < 300; ++trial) {
    const Vec q = testing::random_vec(rng, 3, -2.5, 2.5);
    const auto hit = data.query(q);
    REQUIRE(hit.has_value());
    const Vec warm = data.record(hit->index).U;
    CHECK(cost.total(warm, q) <= hit->value + 1e-9);
    // The envelope itself is Lipschitz with the running maximum constant.
    const Vec q2 = testing::random_vec(rng, 3, -2.5, 2.5);
    const auto hit2 = data.query(q2);
    CHECK(std::abs(hit->value - hit2->value) <= Lmax * (q - q2).norm() + 1e-9);
  }
}

TEST_CASE("dataset dump is line oriented") {
  LipschitzDataset data;
  data.insert(Vec::Ones(2), Vec::Zero(1), 0.5, 1.5);
  std::ostringstream out;
  data.dump(out);
  CHECK(out.str().find("lipschitz_dataset 1") == 0);
  CHECK(out.str().find("r 0 0.5 1.5 1 1") != std::string::npos);
}
