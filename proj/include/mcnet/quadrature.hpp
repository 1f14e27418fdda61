#pragma once

// Clenshaw-Curtis quadrature on Chebyshev-Lobatto nodes, and the forward /
// backward integration of a positive network over [p0, p].
//
// For an integrand evaluated at t_i = p0 + (p - p0)(x_i + 1)/2 the integral is
//     (p - p0)/2 * sum_i w_i f(t_i).
// The backward pass integrates the parameter gradient of f with the same
// rule instead of differentiating through stored forward state.

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <string>

#include "mcnet/error.hpp"
#include "mcnet/nn.hpp"

namespace mcnet {

template <typename Scalar>
struct CcqRule {
    int steps = 0;
    VectorX<Scalar> nodes;    // ascending, in [-1, 1]
    VectorX<Scalar> weights;  // sum to 2
};

template <typename Scalar = double>
CcqRule<Scalar> ccq_rule(int steps) {
    if (steps < 2) throw Error("ccq_rule: need at least 2 steps, got " + std::to_string(steps));
    const int n = steps - 1;
    const Scalar pi = std::numbers::pi_v<Scalar>;

    CcqRule<Scalar> rule;
    rule.steps = steps;
    rule.nodes.resize(steps);
    rule.weights.resize(steps);
    // sin form keeps the endpoints and the midpoint exact.
    for (int j = 0; j <= n; ++j) {
        rule.nodes[j] = std::sin(pi * Scalar(2 * j - n) / Scalar(2 * n));
    }

    const Scalar end_weight = (n % 2 == 0) ? Scalar(1) / Scalar(n * n - 1) : Scalar(1) / Scalar(n * n);
    rule.weights[0] = end_weight;
    rule.weights[n] = end_weight;
    for (int j = 1; j < n; ++j) {
        const Scalar theta = pi * Scalar(j) / Scalar(n);
        Scalar v = 1;
        if (n % 2 == 0) {
            for (int k = 1; k < n / 2; ++k) {
                v -= Scalar(2) * std::cos(Scalar(2 * k) * theta) / Scalar(4 * k * k - 1);
            }
            v -= std::cos(Scalar(n) * theta) / Scalar(n * n - 1);
        } else {
            for (int k = 1; k <= (n - 1) / 2; ++k) {
                v -= Scalar(2) * std::cos(Scalar(2 * k) * theta) / Scalar(4 * k * k - 1);
            }
        }
        // Weights are symmetric, so the cos-ordered formula applies unchanged to ascending nodes.
        rule.weights[j] = Scalar(2) * v / Scalar(n);
    }
    return rule;
}

template <typename Scalar>
Scalar quadrature_point(const CcqRule<Scalar>& rule, int i, Scalar p0, Scalar p) {
    return p0 + Scalar(0.5) * (p - p0) * (rule.nodes[i] + Scalar(1));
}

// Integral of a scalar callable over [p0, p]. p < p0 gives the signed integral.
template <typename Scalar, typename F>
Scalar integrate_forward(F&& integrand, Scalar p0, Scalar p, const CcqRule<Scalar>& rule) {
    Scalar acc = 0;
    for (int i = 0; i < rule.steps; ++i) {
        const Scalar value = integrand(quadrature_point(rule, i, p0, p));
        if (!std::isfinite(value)) throw Error("integrate_forward: non-finite integrand value");
        acc += rule.weights[i] * value;
    }
    return acc / Scalar(2) * (p - p0);
}

namespace detail {

// Stacks [t; h_j] for every (sample j, node i) into one batch, column j * T + i.
template <typename Scalar>
MatrixX<Scalar> quadrature_inputs(const MatrixX<Scalar>& context, const VectorX<Scalar>& p0,
                                  const VectorX<Scalar>& p, const CcqRule<Scalar>& rule) {
    const Eigen::Index batch = p.size();
    const Eigen::Index d = context.rows();
    const int steps = rule.steps;
    MatrixX<Scalar> in(1 + d, batch * steps);
    for (Eigen::Index j = 0; j < batch; ++j) {
        for (int i = 0; i < steps; ++i) {
            const Eigen::Index col = j * steps + i;
            in(0, col) = quadrature_point(rule, i, p0[j], p[j]);
            if (d > 0) in.block(1, col, d, 1) = context.col(j);
        }
    }
    return in;
}

template <typename Scalar>
void check_batch(const DenseNet<Scalar>& f1, const MatrixX<Scalar>& context, const VectorX<Scalar>& p0,
                 const VectorX<Scalar>& p) {
    if (f1.input_dim() != 1 + context.rows()) throw Error("integrate: f1 input must be 1 + context dimension");
    if (f1.output_dim() != 1) throw Error("integrate: f1 must have scalar output");
    if (context.cols() != p.size() || p0.size() != p.size()) throw Error("integrate: batch length mismatch");
}

} // namespace detail

// Batched integral of f1(t, h_j) over [p0_j, p_j] for each column h_j of `context`.
template <typename Scalar>
VectorX<Scalar> integrate_forward(const DenseNet<Scalar>& f1, const MatrixX<Scalar>& context,
                                  const VectorX<Scalar>& p0, const VectorX<Scalar>& p,
                                  const CcqRule<Scalar>& rule) {
    detail::check_batch(f1, context, p0, p);
    const Eigen::Index batch = p.size();
    if (batch == 0) return VectorX<Scalar>();
    const MatrixX<Scalar> values = f1.forward(detail::quadrature_inputs(context, p0, p, rule));
    if (!values.allFinite()) throw Error("integrate_forward: non-finite integrand value");
    // values is 1 x (batch * T); view it as T x batch.
    const Eigen::Map<const MatrixX<Scalar>> per_sample(values.data(), rule.steps, batch);
    VectorX<Scalar> out = (per_sample.transpose() * rule.weights) / Scalar(2);
    out.array() *= (p - p0).array();
    return out;
}

template <typename Scalar>
struct IntegralGradient {
    DenseNetGradient<Scalar> params;
    MatrixX<Scalar> context;  // d x batch
};

// Gradient of sum_j grad_out_j * integral_j with respect to f1's parameters and
// every sample's context vector.
template <typename Scalar>
IntegralGradient<Scalar> integrate_backward(const DenseNet<Scalar>& f1, const MatrixX<Scalar>& context,
                                            const VectorX<Scalar>& p0, const VectorX<Scalar>& p,
                                            const CcqRule<Scalar>& rule, const VectorX<Scalar>& grad_out) {
    detail::check_batch(f1, context, p0, p);
    if (grad_out.size() != p.size()) throw Error("integrate_backward: batch length mismatch");
    if (!grad_out.allFinite()) throw Error("integrate_backward: non-finite upstream gradient");

    const Eigen::Index batch = p.size();
    const Eigen::Index d = context.rows();
    const int steps = rule.steps;

    IntegralGradient<Scalar> result{f1.zero_gradient(), MatrixX<Scalar>::Zero(d, batch)};
    if (batch == 0) return result;

    const auto cache = f1.forward_cached(detail::quadrature_inputs(context, p0, p, rule));
    MatrixX<Scalar> upstream(1, batch * steps);
    for (Eigen::Index j = 0; j < batch; ++j) {
        const Scalar scale = grad_out[j] * (p[j] - p0[j]) / Scalar(2);
        for (int i = 0; i < steps; ++i) upstream(0, j * steps + i) = scale * rule.weights[i];
    }
    const MatrixX<Scalar> din = f1.backward(cache, upstream, result.params);
    if (d > 0) {
        for (Eigen::Index j = 0; j < batch; ++j) {
            result.context.col(j) = din.block(1, j * steps, d, steps).rowwise().sum();
        }
    }
    if (!result.context.allFinite()) throw Error("integrate_backward: non-finite gradient");
    return result;
}

} // namespace mcnet
