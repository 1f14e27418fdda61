#pragma once

// Loss terms of the MCNet objective that depend only on predictions:
// the logloss, the per-field signed gap DIFF_c and its cross-field spread.

#include <span>
#include <vector>

namespace mcnet {

inline constexpr double kDefaultClamp = 1e-6;

// Mean negative log-likelihood. Predictions must lie strictly inside (0, 1).
double logloss(std::span<const double> preds, std::span<const int> labels);

enum class DiffNormalization {
    total,      // divide by the number of samples N in the batch
    per_field,  // divide by the field's own sample count
};

// DIFF_c = (1/N) sum_i (p_i - y_i) [c_i == c] for every c in 0..field_count-1.
std::vector<double> diff_per_field(std::span<const double> preds, std::span<const int> labels,
                                   std::span<const int> fields, int field_count,
                                   DiffNormalization norm = DiffNormalization::total);

// Population standard deviation of the per-field DIFF values.
double balance_penalty(std::span<const double> diffs);

struct LossTerms {
    double logloss = 0;
    double order = 0;
    double balance = 0;
    double alpha = 0;
    double beta = 0;

    double total() const { return logloss + beta * order + alpha * balance; }
};

} // namespace mcnet
