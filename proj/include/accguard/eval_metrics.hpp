#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace accguard::metrics {

// Binary confusion counts; label 1 = attacked = positive.
struct Confusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::uint64_t total() const { return tp + fp + tn + fn; }
};

Confusion confusion(std::span<const int> truth, std::span<const int> predicted);

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some denominator was zero and defaulted to 0
};

Metrics compute(const Confusion& c);

// Mann-Whitney AUC of scores against binary labels, midranks on ties.
double auc(std::span<const double> scores, std::span<const int> labels);

std::string metrics_json(const Confusion& c, const Metrics& m, double auc_value);

}  // namespace accguard::metrics
