#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcnet {

// mean(preds) / mean(labels). Throws when no label is positive.
double pcoc(std::span<const double> preds, std::span<const int> labels);

// Field-level relative calibration error:
//   (1/|D|) sum_c N_c |sum_{i in c} (y_i - p_i)| / sum_{i in c} (y_i + eps)
double f_rce(std::span<const double> preds, std::span<const int> labels, std::span<const int> fields,
             double eps = 0.01);

// Mann-Whitney AUC with half credit for ties.
double auc(std::span<const double> scores, std::span<const int> labels);

// Expected calibration error over equal-width probability bins.
double ece(std::span<const double> preds, std::span<const int> labels, int bins = 10);

struct FieldStats {
    std::optional<double> pcoc;  // empty when the field has no positives
    double diff = 0;
    long long count = 0;
    long long positives = 0;
};

struct PerFieldReport {
    std::map<int, FieldStats> fields;
    double pcoc_std = 0;     // population std over fields with a defined PCOC
    double diff_std = 0;     // population std of per-field DIFF
    std::vector<int> undefined_pcoc;
};

PerFieldReport per_field_report(std::span<const double> preds, std::span<const int> labels,
                                std::span<const int> fields);

struct MetricsReport {
    double pcoc = 0;
    double f_rce = 0;
    double auc = 0;
    double ece = 0;
    long long n = 0;
    PerFieldReport per_field;
};

MetricsReport evaluate(std::span<const double> preds, std::span<const int> labels, std::span<const int> fields,
                       double eps = 0.01, int ece_bins = 10);

// Flat "key = value" text. Keys:
//   n, pcoc, f_rce, auc, ece, pcoc_std, diff_std,
//   field.<id>.count, field.<id>.positives, field.<id>.pcoc, field.<id>.diff
// Undefined per-field PCOC is written as "nan". All values are unitless.
std::string to_key_value(const MetricsReport& report);

// Equal-width reliability-diagram columns: bin_lo, bin_hi, count, mean_pred, mean_label.
std::string reliability_table(std::span<const double> preds, std::span<const int> labels, int bins = 10);

} // namespace mcnet
