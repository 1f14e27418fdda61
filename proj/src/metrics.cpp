#include "mcnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcnet/error.hpp"
#include "mcnet/format.hpp"
#include "mcnet/loss.hpp"

namespace mcnet {
namespace {

void check_lengths(std::size_t a, std::size_t b, const char* who) {
    if (a == 0) throw Error(std::string(who) + ": empty input");
    if (a != b) throw Error(std::string(who) + ": length mismatch");
}

double population_std(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return balance_penalty(xs);
}

} // namespace

double pcoc(std::span<const double> preds, std::span<const int> labels) {
    check_lengths(preds.size(), labels.size(), "pcoc");
    double sp = 0;
    double sy = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        sp += preds[i];
        sy += labels[i];
    }
    if (sy == 0) throw Error("pcoc: undefined without positive labels");
    return sp / sy;
}

double f_rce(std::span<const double> preds, std::span<const int> labels, std::span<const int> fields, double eps) {
    check_lengths(preds.size(), labels.size(), "f_rce");
    if (fields.size() != preds.size()) throw Error("f_rce: length mismatch");
    if (!(eps > 0)) throw Error("f_rce: eps must be positive");
    struct Acc {
        long long n = 0;
        double bias = 0;
        double denom = 0;
    };
    std::map<int, Acc> acc;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto& a = acc[fields[i]];
        ++a.n;
        a.bias += labels[i] - preds[i];
        a.denom += labels[i] + eps;
    }
    double sum = 0;
    for (const auto& [field, a] : acc) sum += static_cast<double>(a.n) * std::abs(a.bias) / a.denom;
    return sum / static_cast<double>(preds.size());
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    check_lengths(scores.size(), labels.size(), "auc");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Rank-sum with mid-ranks over tied groups.
    double rank_sum_pos = 0;
    long long pos = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum_pos += mid_rank;
                ++pos;
            }
        }
        i = j;
    }
    const long long neg = static_cast<long long>(scores.size()) - pos;
    if (pos == 0 || neg == 0) throw Error("auc: both classes must be present");
    const double p = static_cast<double>(pos);
    return (rank_sum_pos - p * (p + 1) / 2) / (p * static_cast<double>(neg));
}

double ece(std::span<const double> preds, std::span<const int> labels, int bins) {
    check_lengths(preds.size(), labels.size(), "ece");
    if (bins < 1) throw Error("ece: bin count must be positive");
    std::vector<double> sp(bins, 0.0);
    std::vector<double> sy(bins, 0.0);
    std::vector<long long> cnt(bins, 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int b = std::clamp(static_cast<int>(std::floor(preds[i] * bins)), 0, bins - 1);
        sp[b] += preds[i];
        sy[b] += labels[i];
        ++cnt[b];
    }
    double total = 0;
    const double n = static_cast<double>(preds.size());
    for (int b = 0; b < bins; ++b) {
        if (cnt[b] == 0) continue;
        total += std::abs(sp[b] - sy[b]) / n;  // (n_b/N) |mean_p - mean_y|
    }
    return total;
}

PerFieldReport per_field_report(std::span<const double> preds, std::span<const int> labels,
                                std::span<const int> fields) {
    check_lengths(preds.size(), labels.size(), "per_field_report");
    if (fields.size() != preds.size()) throw Error("per_field_report: length mismatch");
    PerFieldReport report;
    std::map<int, double> pred_sum;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto& s = report.fields[fields[i]];
        ++s.count;
        s.positives += labels[i];
        s.diff += preds[i] - labels[i];
        pred_sum[fields[i]] += preds[i];
    }
    const double n = static_cast<double>(preds.size());
    std::vector<double> pcocs;
    std::vector<double> diffs;
    for (auto& [field, s] : report.fields) {
        s.diff /= n;
        diffs.push_back(s.diff);
        if (s.positives > 0) {
            s.pcoc = pred_sum[field] / static_cast<double>(s.positives);
            pcocs.push_back(*s.pcoc);
        } else {
            report.undefined_pcoc.push_back(field);
        }
    }
    report.pcoc_std = population_std(pcocs);
    report.diff_std = population_std(diffs);
    return report;
}

MetricsReport evaluate(std::span<const double> preds, std::span<const int> labels, std::span<const int> fields,
                       double eps, int ece_bins) {
    MetricsReport r;
    r.n = static_cast<long long>(preds.size());
    r.pcoc = pcoc(preds, labels);
    r.f_rce = f_rce(preds, labels, fields, eps);
    r.auc = auc(preds, labels);
    r.ece = ece(preds, labels, ece_bins);
    r.per_field = per_field_report(preds, labels, fields);
    return r;
}

std::string to_key_value(const MetricsReport& report) {
    std::ostringstream out;
    out << "n = " << report.n << '\n';
    out << "pcoc = " << format_double(report.pcoc) << '\n';
    out << "f_rce = " << format_double(report.f_rce) << '\n';
    out << "auc = " << format_double(report.auc) << '\n';
    out << "ece = " << format_double(report.ece) << '\n';
    out << "pcoc_std = " << format_double(report.per_field.pcoc_std) << '\n';
    out << "diff_std = " << format_double(report.per_field.diff_std) << '\n';
    for (const auto& [field, s] : report.per_field.fields) {
        const std::string key = "field." + std::to_string(field) + ".";
        out << key << "count = " << s.count << '\n';
        out << key << "positives = " << s.positives << '\n';
        out << key << "pcoc = " << (s.pcoc ? format_double(*s.pcoc) : std::string("nan")) << '\n';
        out << key << "diff = " << format_double(s.diff) << '\n';
    }
    return out.str();
}

std::string reliability_table(std::span<const double> preds, std::span<const int> labels, int bins) {
    check_lengths(preds.size(), labels.size(), "reliability_table");
    if (bins < 1) throw Error("reliability_table: bin count must be positive");
    std::vector<double> sp(bins, 0.0);
    std::vector<double> sy(bins, 0.0);
    std::vector<long long> cnt(bins, 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int b = std::clamp(static_cast<int>(std::floor(preds[i] * bins)), 0, bins - 1);
        sp[b] += preds[i];
        sy[b] += labels[i];
        ++cnt[b];
    }
    std::ostringstream out;
    out << "bin_lo,bin_hi,count,mean_pred,mean_label\n";
    for (int b = 0; b < bins; ++b) {
        out << format_double(static_cast<double>(b) / bins) << ',' << format_double(static_cast<double>(b + 1) / bins)
            << ',' << cnt[b] << ',';
        if (cnt[b] > 0) {
            out << format_double(sp[b] / cnt[b]) << ',' << format_double(sy[b] / cnt[b]) << '\n';
        } else {
            out << "nan,nan\n";
        }
    }
    return out.str();
}

} // namespace mcnet
