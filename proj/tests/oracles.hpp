#pragma once

// Slow, obviously-correct reference implementations the tests compare against.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include <Eigen/Core>

namespace oracle {

inline double pcoc(const std::vector<double>& p, const std::vector<int>& y) {
    double sp = 0, sy = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sp += p[i];
        sy += y[i];
    }
    return (sp / p.size()) / (sy / y.size());
}

inline double f_rce(const std::vector<double>& p, const std::vector<int>& y, const std::vector<int>& f,
                    double eps) {
    std::map<int, int> seen;
    for (int c : f) seen[c] = 1;
    double acc = 0;
    for (const auto& [c, unused] : seen) {
        double n = 0, bias = 0, denom = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (f[i] != c) continue;
            n += 1;
            bias += y[i] - p[i];
            denom += y[i] + eps;
        }
        acc += n * std::abs(bias) / denom;
    }
    return acc / p.size();
}

// Every positive/negative pair.
inline double auc(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            pairs += 1;
            if (s[i] > s[j]) num += 1;
            else if (s[i] == s[j]) num += 0.5;
        }
    }
    return num / pairs;
}

inline double ece(const std::vector<double>& p, const std::vector<int>& y, int bins) {
    double total = 0;
    for (int k = 0; k < bins; ++k) {
        double n = 0, sp = 0, sy = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            int b = std::min(static_cast<int>(p[i] * bins), bins - 1);
            if (b != k) continue;
            n += 1;
            sp += p[i];
            sy += y[i];
        }
        if (n > 0) total += n / p.size() * std::abs(sp / n - sy / n);
    }
    return total;
}

// Best non-decreasing fit by trying every partition of the sequence into
// contiguous blocks (block value = weighted mean) and keeping the monotone one
// with the least squared error.
inline std::vector<double> best_monotone_fit(const std::vector<double>& v, const std::vector<double>& w) {
    const int n = static_cast<int>(v.size());
    std::vector<double> best;
    double best_err = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
        std::vector<double> fit(n);
        int start = 0;
        double prev = -std::numeric_limits<double>::infinity();
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            bool cut = i == n - 1 || (mask >> i & 1u);
            if (!cut) continue;
            double sw = 0, sv = 0;
            for (int j = start; j <= i; ++j) {
                sw += w[j];
                sv += w[j] * v[j];
            }
            double m = sv / sw;
            if (m < prev - 1e-12) ok = false;
            prev = m;
            for (int j = start; j <= i; ++j) fit[j] = m;
            start = i + 1;
        }
        if (!ok) continue;
        double err = 0;
        for (int j = 0; j < n; ++j) err += w[j] * (fit[j] - v[j]) * (fit[j] - v[j]);
        if (err < best_err - 1e-15) {
            best_err = err;
            best = fit;
        }
    }
    return best;
}

// Central differences of f at x.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double orig = xp[i];
        xp[i] = orig + h;
        const double up = f(xp);
        xp[i] = orig - h;
        const double down = f(xp);
        xp[i] = orig;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

// Largest |a-b| / max(|a|, |b|) over components, skipping components whose
// absolute difference is already within abs_floor.
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double abs_floor = 1e-7) {
    double worst = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double diff = std::abs(a[i] - b[i]);
        if (diff <= abs_floor) continue;
        worst = std::max(worst, diff / std::max(std::abs(a[i]), std::abs(b[i])));
    }
    return worst;
}

}  // namespace oracle
