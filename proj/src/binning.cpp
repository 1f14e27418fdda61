#include "mcnet/binning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mcnet/error.hpp"

namespace mcnet {

BinPartition fit_bins(std::span<const double> scores, int bins, double lower, double upper) {
    const auto n = static_cast<long long>(scores.size());
    if (bins < 1) throw Error("fit_bins: bin count must be positive");
    if (n < bins) {
        throw Error("fit_bins: " + std::to_string(n) + " scores cannot fill " + std::to_string(bins) + " bins");
    }
    if (!(lower < upper)) throw Error("fit_bins: lower bound must be below upper bound");
    for (double s : scores) {
        if (!(s >= lower && s < upper)) {
            throw Error("fit_bins: score " + std::to_string(s) + " outside [" + std::to_string(lower) + ", " +
                        std::to_string(upper) + ")");
        }
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    BinPartition p;
    p.requested = bins;
    p.boundaries.push_back(lower);
    for (int k = 1; k < bins; ++k) {
        const long long c = (static_cast<long long>(k) * n + bins - 1) / bins;  // ceil(kN/K), 1-based rank
        const double left = scores[order[c - 1]];
        const double right = scores[order[c]];
        const double mid = left + (right - left) / 2;
        if (mid > p.boundaries.back() && mid < upper) p.boundaries.push_back(mid);
    }
    p.boundaries.push_back(upper);
    return p;
}

BinPartition make_partition(std::vector<double> boundaries) {
    if (boundaries.size() < 2) throw Error("make_partition: need at least two boundaries");
    for (std::size_t i = 0; i < boundaries.size(); ++i) {
        if (!std::isfinite(boundaries[i])) throw Error("make_partition: non-finite boundary");
        if (i > 0 && !(boundaries[i] > boundaries[i - 1])) {
            throw Error("make_partition: boundaries must be strictly increasing");
        }
    }
    BinPartition p;
    p.requested = static_cast<int>(boundaries.size()) - 1;
    p.boundaries = std::move(boundaries);
    return p;
}

int bin_index(const BinPartition& partition, double score) {
    if (!partition.contains(score)) {
        throw Error("bin_index: score " + std::to_string(score) + " outside [" + std::to_string(partition.lower()) +
                    ", " + std::to_string(partition.upper()) + ")");
    }
    const auto first = partition.boundaries.begin() + 1;
    const auto last = partition.boundaries.end() - 1;
    return static_cast<int>(std::upper_bound(first, last, score) - first);
}

} // namespace mcnet
