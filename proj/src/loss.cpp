#include "mcnet/loss.hpp"

#include <cmath>
#include <string>

#include "mcnet/error.hpp"

namespace mcnet {

double logloss(std::span<const double> preds, std::span<const int> labels) {
    if (preds.empty()) throw Error("logloss: empty input");
    if (preds.size() != labels.size()) throw Error("logloss: length mismatch");
    double sum = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double p = preds[i];
        if (!(p > 0.0 && p < 1.0)) throw Error("logloss: prediction " + std::to_string(p) + " not in (0, 1)");
        sum += labels[i] == 1 ? -std::log(p) : -std::log1p(-p);
    }
    return sum / static_cast<double>(preds.size());
}

std::vector<double> diff_per_field(std::span<const double> preds, std::span<const int> labels,
                                   std::span<const int> fields, int field_count, DiffNormalization norm) {
    if (preds.empty()) throw Error("diff_per_field: empty input");
    if (preds.size() != labels.size() || preds.size() != fields.size()) {
        throw Error("diff_per_field: length mismatch");
    }
    std::vector<double> diff(static_cast<std::size_t>(field_count), 0.0);
    std::vector<long long> count(static_cast<std::size_t>(field_count), 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int c = fields[i];
        if (c < 0 || c >= field_count) throw Error("diff_per_field: field id " + std::to_string(c) + " not in set");
        diff[c] += preds[i] - labels[i];
        ++count[c];
    }
    for (int c = 0; c < field_count; ++c) {
        const double denom = norm == DiffNormalization::total ? static_cast<double>(preds.size())
                                                              : static_cast<double>(count[c]);
        diff[c] = count[c] > 0 ? diff[c] / denom : 0.0;
    }
    return diff;
}

double balance_penalty(std::span<const double> diffs) {
    if (diffs.empty()) throw Error("balance_penalty: empty field set");
    double mean = 0;
    for (double d : diffs) mean += d;
    mean /= static_cast<double>(diffs.size());
    double ss = 0;
    for (double d : diffs) ss += (d - mean) * (d - mean);
    return std::sqrt(ss / static_cast<double>(diffs.size()));
}

} // namespace mcnet
