#pragma once

// Synthetic miscalibrated data with a known ground truth.
//
// Each sample draws a true probability q, a label y ~ Bernoulli(q) and a score
// s = d_c(q) through its field's strictly increasing distortion d_c. The
// ideal calibration curve for field c is therefore d_c^{-1}.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mcnet/dataset.hpp"

namespace mcnet {

struct Distortion {
    enum class Kind { identity, power, smoothstep, logit_shift, logit_scale };
    Kind kind = Kind::identity;
    double param = 0.0;  // gamma, delta or a; unused for identity and smoothstep

    static Distortion identity() { return {Kind::identity, 0.0}; }
    static Distortion power(double gamma) { return {Kind::power, gamma}; }
    static Distortion smoothstep() { return {Kind::smoothstep, 0.0}; }
    static Distortion logit_shift(double delta) { return {Kind::logit_shift, delta}; }
    static Distortion logit_scale(double a) { return {Kind::logit_scale, a}; }

    // Throws for parameters that would not give a strictly increasing map of (0,1).
    void validate() const;

    double apply(double q) const;    // q -> score
    double inverse(double s) const;  // score -> q, the ground-truth calibration curve

    // "identity", "power:2", "smoothstep", "logit-shift:0.5", "logit-scale:1.5"
    static Distortion parse(std::string_view text);
    std::string to_string() const;
};

struct TruthDistribution {
    enum class Kind { uniform, beta };
    Kind kind = Kind::uniform;
    double a = 1.0;
    double b = 1.0;

    // "uniform" or "beta:<a>:<b>"
    static TruthDistribution parse(std::string_view text);
    std::string to_string() const;
};

struct SyntheticSpec {
    long long n = 10000;
    int fields = 1;
    // One per field, or a single entry shared by all fields.
    std::vector<Distortion> distortions = {Distortion::identity()};
    TruthDistribution truth;
    std::uint64_t seed = 0;
    // Length of the optional feature vector; features are (q - 0.5) plus N(0, 0.25^2) noise.
    int feature_dim = 0;

    void validate() const;
    const Distortion& distortion(int field) const;
};

struct SyntheticData {
    Dataset data;
    SyntheticSpec spec;

    // Ground-truth calibrated probability for a score observed in `field`.
    double truth(int field, double score) const { return spec.distortion(field).inverse(score); }
};

SyntheticData generate(const SyntheticSpec& spec);

} // namespace mcnet
