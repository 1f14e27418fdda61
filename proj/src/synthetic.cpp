#include "mcnet/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "mcnet/error.hpp"
#include "mcnet/format.hpp"
#include "mcnet/nn.hpp"

namespace mcnet {
namespace {

double logit(double s) { return std::log(s) - std::log1p(-s); }

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto at = s.find(sep, start);
        parts.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
        if (at == std::string_view::npos) break;
        start = at + 1;
    }
    return parts;
}

} // namespace

void Distortion::validate() const {
    switch (kind) {
        case Kind::power:
            if (!(param > 0) || !std::isfinite(param)) throw Error("distortion power: exponent must be positive");
            break;
        case Kind::logit_scale:
            if (!(param > 0) || !std::isfinite(param)) throw Error("distortion logit-scale: factor must be positive");
            break;
        case Kind::logit_shift:
            if (!std::isfinite(param)) throw Error("distortion logit-shift: shift must be finite");
            break;
        case Kind::identity:
        case Kind::smoothstep:
            break;
    }
}

double Distortion::apply(double q) const {
    switch (kind) {
        case Kind::identity:
            return q;
        case Kind::power:
            return std::pow(q, param);
        case Kind::smoothstep:
            return q * q * (3.0 - 2.0 * q);
        case Kind::logit_shift:
            return sigmoid(logit(q) + param);
        case Kind::logit_scale:
            return sigmoid(param * logit(q));
    }
    return q;
}

double Distortion::inverse(double s) const {
    switch (kind) {
        case Kind::identity:
            return s;
        case Kind::power:
            return std::pow(s, 1.0 / param);
        case Kind::smoothstep:
            // Root of 3q^2 - 2q^3 = s on [0, 1].
            return 0.5 - std::sin(std::asin(1.0 - 2.0 * s) / 3.0);
        case Kind::logit_shift:
            return sigmoid(logit(s) - param);
        case Kind::logit_scale:
            return sigmoid(logit(s) / param);
    }
    return s;
}

Distortion Distortion::parse(std::string_view text) {
    const auto parts = split(text, ':');
    const std::string_view name = parts[0];
    auto param = [&]() {
        if (parts.size() != 2) throw Error("distortion '" + std::string(text) + "' needs one parameter");
        return parse_double(parts[1]);
    };
    Distortion d;
    if (name == "identity" && parts.size() == 1) {
        d = identity();
    } else if (name == "smoothstep" && parts.size() == 1) {
        d = smoothstep();
    } else if (name == "power") {
        d = power(param());
    } else if (name == "logit-shift") {
        d = logit_shift(param());
    } else if (name == "logit-scale") {
        d = logit_scale(param());
    } else {
        throw Error("unknown distortion '" + std::string(text) + "'");
    }
    d.validate();
    return d;
}

std::string Distortion::to_string() const {
    switch (kind) {
        case Kind::identity:
            return "identity";
        case Kind::power:
            return "power:" + format_double(param);
        case Kind::smoothstep:
            return "smoothstep";
        case Kind::logit_shift:
            return "logit-shift:" + format_double(param);
        case Kind::logit_scale:
            return "logit-scale:" + format_double(param);
    }
    return "identity";
}

TruthDistribution TruthDistribution::parse(std::string_view text) {
    const auto parts = split(text, ':');
    if (parts[0] == "uniform" && parts.size() == 1) return {};
    if (parts[0] == "beta" && parts.size() == 3) {
        TruthDistribution t{Kind::beta, parse_double(parts[1]), parse_double(parts[2])};
        if (!(t.a > 0 && t.b > 0)) throw Error("beta distribution parameters must be positive");
        return t;
    }
    throw Error("unknown truth distribution '" + std::string(text) + "'");
}

std::string TruthDistribution::to_string() const {
    if (kind == Kind::uniform) return "uniform";
    return "beta:" + format_double(a) + ":" + format_double(b);
}

void SyntheticSpec::validate() const {
    if (n < 1) throw Error("synthetic: n must be positive");
    if (fields < 1) throw Error("synthetic: fields must be positive");
    if (distortions.size() != 1 && static_cast<int>(distortions.size()) != fields) {
        throw Error("synthetic: give one distortion, or one per field");
    }
    for (const auto& d : distortions) d.validate();
    if (truth.kind == TruthDistribution::Kind::beta && !(truth.a > 0 && truth.b > 0)) {
        throw Error("synthetic: beta parameters must be positive");
    }
    if (feature_dim < 0) throw Error("synthetic: feature_dim must be >= 0");
}

const Distortion& SyntheticSpec::distortion(int field) const {
    if (field < 0 || field >= fields) throw Error("synthetic: unknown field id " + std::to_string(field));
    return distortions.size() == 1 ? distortions[0] : distortions[static_cast<std::size_t>(field)];
}

SyntheticData generate(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticData out;
    out.spec = spec;
    out.data.field_count = spec.fields;
    out.data.feature_dim = spec.feature_dim;
    out.data.samples.reserve(static_cast<std::size_t>(spec.n));

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> field_dist(0, spec.fields - 1);
    std::normal_distribution<double> noise(0.0, 0.25);
    std::gamma_distribution<double> ga(spec.truth.a, 1.0);
    std::gamma_distribution<double> gb(spec.truth.b, 1.0);

    auto draw_truth = [&]() {
        if (spec.truth.kind == TruthDistribution::Kind::uniform) return unit(rng);
        const double x = ga(rng);
        const double y = gb(rng);
        return x / (x + y);
    };

    while (static_cast<long long>(out.data.samples.size()) < spec.n) {
        const int c = field_dist(rng);
        const double q = draw_truth();
        const double s = spec.distortion(c).apply(q);
        // Redraw the rare q whose score rounds onto the closed ends of (0, 1).
        if (!(q > 0 && q < 1 && s > 0 && s < 1)) continue;
        Sample sample;
        sample.score = s;
        sample.label = unit(rng) < q ? 1 : 0;
        sample.field = c;
        for (int j = 0; j < spec.feature_dim; ++j) sample.features.push_back((q - 0.5) + noise(rng));
        out.data.samples.push_back(std::move(sample));
    }
    return out;
}

} // namespace mcnet
