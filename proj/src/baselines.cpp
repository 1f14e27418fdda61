#include "mcnet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcnet/error.hpp"
#include "mcnet/nn.hpp"

namespace mcnet {
namespace {

void check_input(std::span<const double> scores, std::span<const int> labels, const char* who) {
    if (scores.empty()) throw Error(std::string(who) + ": empty input");
    if (scores.size() != labels.size()) throw Error(std::string(who) + ": length mismatch");
}

struct BinStats {
    std::vector<double> positives;
    std::vector<double> counts;
};

BinStats bin_stats(const BinPartition& p, std::span<const double> scores, std::span<const int> labels) {
    BinStats s{std::vector<double>(p.bins(), 0.0), std::vector<double>(p.bins(), 0.0)};
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int k = bin_index(p, scores[i]);
        s.positives[k] += labels[i];
        s.counts[k] += 1;
    }
    return s;
}

// Drops boundaries next to empty bins until every bin holds a sample.
BinPartition merge_empty_bins(const BinPartition& p, std::span<const double> scores) {
    BinPartition out = p;
    while (out.bins() > 1) {
        std::vector<int> counts(out.bins(), 0);
        for (double s : scores) ++counts[bin_index(out, s)];
        const auto empty = std::find(counts.begin(), counts.end(), 0);
        if (empty == counts.end()) break;
        const auto k = static_cast<std::size_t>(empty - counts.begin());
        // Merge into the right neighbour, or the left one for the last bin.
        const std::size_t drop = k + 1 < static_cast<std::size_t>(out.bins()) ? k + 1 : k;
        out.boundaries.erase(out.boundaries.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    return out;
}

double logit(double s) { return std::log(s) - std::log1p(-s); }

double platt_loss(std::span<const double> x, std::span<const int> y, double a, double b) {
    double loss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double z = a * x[i] + b;
        // log(1 + e^z) - y z, computed without overflow.
        const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        loss += softplus - y[i] * z;
    }
    return loss / static_cast<double>(x.size());
}

} // namespace

std::vector<double> pav(std::span<const double> values, std::span<const double> weights) {
    if (values.size() != weights.size()) throw Error("pav: length mismatch");
    struct Block {
        double mean;
        double weight;
        std::size_t size;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(weights[i] > 0)) throw Error("pav: weights must be positive");
        blocks.push_back({values[i], weights[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
            const Block top = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            const double w = prev.weight + top.weight;
            prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / w;
            prev.weight = w;
            prev.size += top.size;
        }
    }
    std::vector<double> fit;
    fit.reserve(values.size());
    for (const auto& b : blocks) fit.insert(fit.end(), b.size, b.mean);
    return fit;
}

PiecewiseConstantCalibrator histogram_fit(std::span<const double> scores, std::span<const int> labels, int bins) {
    check_input(scores, labels, "histogram_fit");
    PiecewiseConstantCalibrator cal;
    cal.partition = merge_empty_bins(fit_bins(scores, bins, 0.0, 1.0), scores);
    const BinStats s = bin_stats(cal.partition, scores, labels);
    for (int k = 0; k < cal.partition.bins(); ++k) cal.values.push_back(s.positives[k] / s.counts[k]);
    return cal;
}

PiecewiseConstantCalibrator isotonic_fit(std::span<const double> scores, std::span<const int> labels) {
    check_input(scores, labels, "isotonic_fit");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // One group per distinct score.
    std::vector<double> group_score;
    std::vector<double> group_mean;
    std::vector<double> group_weight;
    for (std::size_t i : order) {
        if (group_score.empty() || scores[i] != group_score.back()) {
            group_score.push_back(scores[i]);
            group_mean.push_back(0);
            group_weight.push_back(0);
        }
        group_mean.back() += labels[i];
        group_weight.back() += 1;
    }
    for (std::size_t g = 0; g < group_mean.size(); ++g) group_mean[g] /= group_weight[g];
    const std::vector<double> fit = pav(group_mean, group_weight);

    PiecewiseConstantCalibrator cal;
    std::vector<double> boundaries{0.0};
    cal.values.push_back(fit[0]);
    for (std::size_t g = 1; g < fit.size(); ++g) {
        if (fit[g] != fit[g - 1]) {
            boundaries.push_back(group_score[g - 1] + (group_score[g] - group_score[g - 1]) / 2);
            cal.values.push_back(fit[g]);
        }
    }
    boundaries.push_back(1.0);
    cal.partition = make_partition(std::move(boundaries));
    return cal;
}

PlattCalibrator platt_fit(std::span<const double> scores, std::span<const int> labels, int max_iter, double tol) {
    check_input(scores, labels, "platt_fit");
    long long pos = 0;
    std::vector<double> x;
    x.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!(scores[i] > 0 && scores[i] < 1)) throw Error("platt_fit: score outside (0, 1)");
        x.push_back(logit(scores[i]));
        pos += labels[i];
    }
    if (pos == 0 || pos == static_cast<long long>(scores.size())) throw Error("platt_fit: both classes required");

    const double n = static_cast<double>(scores.size());
    PlattCalibrator cal;
    cal.converged = false;
    double a = 1.0;
    double b = 0.0;
    double loss = platt_loss(x, labels, a, b);
    for (int it = 1; it <= max_iter; ++it) {
        double ga = 0, gb = 0, haa = 0, hab = 0, hbb = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double p = sigmoid(a * x[i] + b);
            const double r = p - labels[i];
            const double w = p * (1 - p);
            ga += r * x[i];
            gb += r;
            haa += w * x[i] * x[i];
            hab += w * x[i];
            hbb += w;
        }
        ga /= n, gb /= n, haa /= n, hab /= n, hbb /= n;
        cal.iterations = it;
        if (std::hypot(ga, gb) <= tol) {
            cal.converged = true;
            break;
        }
        // Newton direction with a small ridge, then backtracking on the loss.
        const double ridge = 1e-12;
        haa += ridge;
        hbb += ridge;
        const double det = haa * hbb - hab * hab;
        double da = -(hbb * ga - hab * gb) / det;
        double db = -(haa * gb - hab * ga) / det;
        if (!std::isfinite(da) || !std::isfinite(db)) {
            da = -ga;
            db = -gb;
        }
        double step = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 40; ++ls) {
            const double na = a + step * da;
            const double nb = b + step * db;
            const double nl = platt_loss(x, labels, na, nb);
            if (nl <= loss) {
                a = na;
                b = nb;
                improved = nl < loss;
                loss = nl;
                break;
            }
            step /= 2;
        }
        if (!improved) {
            // No decrease is possible at machine precision.
            cal.converged = std::hypot(ga, gb) <= std::sqrt(tol);
            break;
        }
    }
    cal.slope = a;
    cal.intercept = b;
    return cal;
}

PiecewiseLinearCalibrator sir_knots(const BinPartition& partition, std::span<const double> iso) {
    const int K = partition.bins();
    if (static_cast<int>(iso.size()) != K) throw Error("sir_knots: one posterior per bin required");
    PiecewiseLinearCalibrator cal;
    cal.knot_x = partition.boundaries;
    cal.knot_y.resize(K + 1);
    cal.knot_y[0] = iso[0];
    cal.knot_y[K] = iso[K - 1];
    for (int k = 1; k < K; ++k) {
        const auto& b = partition.boundaries;
        const double left_mid = (b[k - 1] + b[k]) / 2;
        const double right_mid = (b[k] + b[k + 1]) / 2;
        const double t = (b[k] - left_mid) / (right_mid - left_mid);
        cal.knot_y[k] = iso[k - 1] + t * (iso[k] - iso[k - 1]);
    }
    return cal;
}

PiecewiseLinearCalibrator sir_fit(std::span<const double> scores, std::span<const int> labels, int bins) {
    check_input(scores, labels, "sir_fit");
    const BinPartition p = merge_empty_bins(fit_bins(scores, bins, 0.0, 1.0), scores);
    const BinStats s = bin_stats(p, scores, labels);
    std::vector<double> posterior(p.bins());
    for (int k = 0; k < p.bins(); ++k) posterior[k] = s.positives[k] / s.counts[k];
    return sir_knots(p, pav(posterior, s.counts));
}

double apply(const PiecewiseConstantCalibrator& cal, double score) {
    const auto& p = cal.partition;
    const double s = std::clamp(score, p.lower(), std::nextafter(p.upper(), p.lower()));
    return cal.values[static_cast<std::size_t>(bin_index(p, s))];
}

double apply(const PiecewiseLinearCalibrator& cal, double score) {
    const auto& x = cal.knot_x;
    const auto& y = cal.knot_y;
    if (score <= x.front()) return y.front();
    if (score >= x.back()) return y.back();
    const auto hi = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), score) - x.begin());
    const std::size_t lo = hi - 1;
    return y[lo] + (score - x[lo]) * (y[hi] - y[lo]) / (x[hi] - x[lo]);
}

double apply(const PlattCalibrator& cal, double score) {
    constexpr double lo = 1e-15;
    const double s = std::clamp(score, lo, 1.0 - lo);
    return sigmoid(cal.slope * logit(s) + cal.intercept);
}

bool in_domain(const PiecewiseConstantCalibrator& cal, double score) { return cal.partition.contains(score); }

bool in_domain(const PiecewiseLinearCalibrator& cal, double score) {
    return score >= cal.knot_x.front() && score <= cal.knot_x.back();
}

bool in_domain(const PlattCalibrator&, double score) { return score > 0 && score < 1; }

} // namespace mcnet
