#pragma once

// Uniform handle over every calibrator type plus its on-disk format.
//
// Models are stored as a versioned JSON document:
//   { "format": "mcnet-calibrator", "version": 1, "method": "<name>", ... }
// Matrices are written row-major next to their declared [rows, cols] shape.
// Doubles use shortest round-trip formatting, so save -> load is bit-exact.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mcnet/baselines.hpp"
#include "mcnet/dataset.hpp"
#include "mcnet/mcnet.hpp"

namespace mcnet {

inline constexpr int kModelFormatVersion = 1;

// histogram, isotonic, platt, sir, mcnet-none, mcnet-field, mcnet-none-aux, mcnet-field-aux
const std::vector<std::string>& calibrator_names();
bool is_mcnet_method(std::string_view method);

struct FittedCalibrator {
    std::string method;
    std::variant<PiecewiseConstantCalibrator, PiecewiseLinearCalibrator, PlattCalibrator, McnetModel> model;
};

struct FitResult {
    FittedCalibrator calibrator;
    std::vector<EpochStats> history;  // MCNet methods only
    std::vector<std::string> warnings;
};

// `config` supplies K for the binning methods and everything for MCNet; the
// method name overrides its context mode and aux flag.
FitResult fit_calibrator(std::string_view method, const Dataset& validation, const TrainConfig& config);

struct Calibrated {
    std::vector<double> probs;
    long long out_of_domain = 0;  // scores clamped onto the calibrator's domain
    long long clamped = 0;        // MCNet outputs that hit the probability clamp
};

Calibrated calibrate(const FittedCalibrator& cal, const Dataset& data);

std::string serialize(const FittedCalibrator& cal);
FittedCalibrator deserialize(std::string_view text);

void save_calibrator(const FittedCalibrator& cal, const std::filesystem::path& path);
FittedCalibrator load_calibrator(const std::filesystem::path& path);

} // namespace mcnet
