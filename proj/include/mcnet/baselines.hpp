#pragma once

// Classical post-hoc calibrators used as comparison points.

#include <span>
#include <vector>

#include "mcnet/binning.hpp"

namespace mcnet {

// Step function: value[k] on bin k of the partition.
struct PiecewiseConstantCalibrator {
    BinPartition partition;
    std::vector<double> values;
};

// Linear interpolation through (knot_x[k], knot_y[k]); flat outside the knots.
struct PiecewiseLinearCalibrator {
    std::vector<double> knot_x;
    std::vector<double> knot_y;
};

// sigmoid(slope * logit(s) + intercept)
struct PlattCalibrator {
    double slope = 1.0;
    double intercept = 0.0;
    bool converged = true;
    int iterations = 0;
};

// Weighted pool-adjacent-violators. Returns the non-decreasing sequence
// minimizing sum_i w_i (fit_i - values_i)^2.
std::vector<double> pav(std::span<const double> values, std::span<const double> weights);

// Histogram binning over K equal-frequency bins in [0, 1).
PiecewiseConstantCalibrator histogram_fit(std::span<const double> scores, std::span<const int> labels, int bins);

// Isotonic regression of labels on scores; tied scores share one block.
PiecewiseConstantCalibrator isotonic_fit(std::span<const double> scores, std::span<const int> labels);

PlattCalibrator platt_fit(std::span<const double> scores, std::span<const int> labels, int max_iter = 100,
                          double tol = 1e-10);

// Histogram posteriors, isotonized by PAV, joined by linear interpolation with
// knots on the bin boundaries.
PiecewiseLinearCalibrator sir_fit(std::span<const double> scores, std::span<const int> labels, int bins);

// Knot values at the boundaries of `partition` from isotonized bin posteriors:
// linear interpolation between adjacent bin midpoints, held flat at both ends.
PiecewiseLinearCalibrator sir_knots(const BinPartition& partition, std::span<const double> isotonic_posteriors);

// Evaluation. Scores outside a calibrator's domain are clamped to its nearest edge;
// in_domain reports whether that happened.
double apply(const PiecewiseConstantCalibrator& cal, double score);
double apply(const PiecewiseLinearCalibrator& cal, double score);
double apply(const PlattCalibrator& cal, double score);

bool in_domain(const PiecewiseConstantCalibrator& cal, double score);
bool in_domain(const PiecewiseLinearCalibrator& cal, double score);
bool in_domain(const PlattCalibrator& cal, double score);

} // namespace mcnet
