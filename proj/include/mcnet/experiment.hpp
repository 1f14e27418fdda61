#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcnet/calibrator.hpp"
#include "mcnet/metrics.hpp"
#include "mcnet/synthetic.hpp"

namespace mcnet {

// Seed offset between the synthetic validation split and the test split.
inline constexpr std::uint64_t kTestSplitSeedOffset = 1000003;

struct ExperimentConfig {
    // Either both paths, or a synthetic spec (validation uses spec.seed, test
    // uses spec.seed + kTestSplitSeedOffset).
    std::optional<std::filesystem::path> validation;
    std::optional<std::filesystem::path> test;
    std::optional<SyntheticSpec> synthetic;

    std::vector<std::string> methods;
    TrainConfig train;
    double frce_eps = 0.01;
    int ece_bins = 10;
    // Empty: nothing is written.
    std::filesystem::path out_dir;
};

struct MethodOutcome {
    std::string method;
    MetricsReport report;
    std::vector<EpochStats> history;
    std::vector<std::string> warnings;
    long long out_of_domain = 0;
    long long clamped = 0;
};

struct ExperimentResult {
    MetricsReport uncalibrated;
    std::vector<MethodOutcome> methods;
    std::string table;
};

// Fits every method on the validation split, scores the test split, and (with
// out_dir set) writes <method>.model.json, <method>.report.txt,
// <method>.history.csv for MCNet runs, uncalibrated.report.txt and comparison.txt.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Aligned plain-text table: method, PCOC, F-RCE, AUC.
std::string comparison_table(const MetricsReport& uncalibrated, const std::vector<MethodOutcome>& methods);

std::string history_csv(const std::vector<EpochStats>& history);

} // namespace mcnet
