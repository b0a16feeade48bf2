#include <cmath>
#include <vector>

#include "doctest.h"

#include "accguard/eval_metrics.hpp"
#include "accguard/rng.hpp"

#include "json.hpp"

using namespace accguard;
using namespace accguard::metrics;

TEST_CASE("confusion enumerates the four cells") {
  const std::vector<int> truth{1, 1, 0, 0};
  const std::vector<int> pred{1, 0, 0, 1};
  const Confusion c = confusion(truth, pred);
  CHECK(c.tp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 1);
  CHECK(c.fp == 1);

  const Confusion perfect = confusion(truth, truth);
  CHECK(perfect.fp == 0);
  CHECK(perfect.fn == 0);

  const std::vector<int> inverted{0, 0, 1, 1};
  const Confusion worst = confusion(truth, inverted);
  CHECK(worst.tp == 0);
  CHECK(worst.tn == 0);

  CHECK_THROWS_AS(confusion(truth, std::vector<int>{1}), std::invalid_argument);
  CHECK_THROWS_AS(confusion(std::vector<int>{2}, std::vector<int>{1}), std::invalid_argument);
  CHECK_THROWS_AS(confusion(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("metric arithmetic matches the published row shape") {
  // P = 0.78, R = 1.00 -> F1 = 2 * 0.78 / 1.78, rounds to 0.88
  Confusion c;
  c.tp = 78;
  c.fp = 22;
  c.fn = 0;
  c.tn = 78;
  const Metrics m = compute(c);
  CHECK(m.precision == doctest::Approx(0.78));
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == doctest::Approx(2.0 * 0.78 / 1.78).epsilon(1e-12));
  CHECK(std::round(m.f1 * 100.0) / 100.0 == 0.88);
  CHECK(m.accuracy == doctest::Approx(156.0 / 178.0).epsilon(1e-12));
  CHECK(!m.degenerate);

  Confusion all_correct;
  all_correct.tp = 10;
  all_correct.tn = 10;
  const Metrics perfect = compute(all_correct);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
}

TEST_CASE("zero denominators yield 0 with the degeneracy flag") {
  Confusion no_pos_pred;  // tp + fp = 0
  no_pos_pred.tn = 5;
  no_pos_pred.fn = 5;
  const Metrics m = compute(no_pos_pred);
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.degenerate);

  Confusion empty;
  CHECK_THROWS_AS(compute(empty), std::invalid_argument);
}

TEST_CASE("metric invariants hold over randomized confusion matrices") {
  RngStream rng(321);
  for (int i = 0; i < 1000; ++i) {
    Confusion c;
    c.tp = rng.uniform_index(50);
    c.fp = rng.uniform_index(50);
    c.tn = rng.uniform_index(50);
    c.fn = rng.uniform_index(50);
    if (c.total() == 0) c.tn = 1;
    const Metrics m = compute(c);
    for (double v : {m.accuracy, m.precision, m.recall, m.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (m.precision > 0.0 && m.recall > 0.0) {
      CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-12);
      CHECK(m.f1 >= std::min(m.precision, m.recall) - 1e-12);
    }
    // swapping the positive/negative convention swaps the cell roles
    Confusion swapped;
    swapped.tp = c.tn;
    swapped.tn = c.tp;
    swapped.fp = c.fn;
    swapped.fn = c.fp;
    const Metrics ms = compute(swapped);
    CHECK(ms.accuracy == doctest::Approx(m.accuracy).epsilon(1e-12));
    if (c.tn + c.fn > 0) {
      CHECK(ms.precision ==
            doctest::Approx(static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fn))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("identity predictions give all ones for any non-degenerate labels") {
  RngStream rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) y.push_back(rng.uniform01() < 0.4 ? 1 : 0);
    y[0] = 1;
    y[1] = 0;  // both classes present
    const Metrics m = compute(confusion(y, y));
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
  }
}

TEST_CASE("auc ranks separable, reversed, and tied scores correctly") {
  const std::vector<int> labels{1, 1, 1, 0, 0, 0};
  CHECK(auc(std::vector<double>{10, 9, 8, 1, 2, 3}, labels) == 1.0);
  CHECK(auc(std::vector<double>{1, 2, 3, 10, 9, 8}, labels) == 0.0);
  CHECK(auc(std::vector<double>{5, 5, 5, 5, 5, 5}, labels) == 0.5);
  CHECK(auc(std::vector<double>{10, 9, 1, 8, 2, 3}, labels) == doctest::Approx(6.0 / 9.0));
  CHECK_THROWS_AS(auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}),
                  std::invalid_argument);
}

TEST_CASE("metrics json carries the documented fields") {
  Confusion c;
  c.tp = 3;
  c.fp = 1;
  c.tn = 4;
  c.fn = 2;
  const Metrics m = compute(c);
  const nlohmann::json j = nlohmann::json::parse(metrics_json(c, m, 0.9));
  CHECK(j.at("accuracy").get<double>() == m.accuracy);
  CHECK(j.at("precision").get<double>() == m.precision);
  CHECK(j.at("recall").get<double>() == m.recall);
  CHECK(j.at("f1").get<double>() == m.f1);
  CHECK(j.at("auc").get<double>() == 0.9);
  CHECK(j.at("counts").at("tp").get<int>() == 3);
  CHECK(j.at("degenerate").get<bool>() == false);
}
