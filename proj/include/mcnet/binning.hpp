#pragma once

#include <span>
#include <vector>

namespace mcnet {

// K half-open bins [b_0, b_1), ..., [b_{K-1}, b_K) over score space.
struct BinPartition {
    std::vector<double> boundaries;
    // Bin count asked of fit_bins; larger than bins() when tied scores forced a merge.
    int requested = 0;

    int bins() const { return static_cast<int>(boundaries.size()) - 1; }
    double lower() const { return boundaries.front(); }
    double upper() const { return boundaries.back(); }
    bool contains(double score) const { return score >= lower() && score < upper(); }
};

// Equal-frequency partition. Interior boundary k is the midpoint of the
// ceil(kN/K)-th sorted score and its successor; boundaries that collide
// because of tied scores are dropped, merging the affected bins.
BinPartition fit_bins(std::span<const double> scores, int bins, double lower, double upper);

// Validates and wraps explicit boundaries.
BinPartition make_partition(std::vector<double> boundaries);

int bin_index(const BinPartition& partition, double score);

} // namespace mcnet
