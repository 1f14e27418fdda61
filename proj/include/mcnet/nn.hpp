#pragma once

// Small dense feed-forward networks with hand-written reverse mode.
//
// Inputs are column-major batches: one column per sample, so a batch of
// B inputs of dimension n is an n x B matrix. All routines are templated
// on the scalar type; the library itself instantiates double only.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mcnet/error.hpp"

namespace mcnet {

enum class Activation { relu, sigmoid, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
Scalar sigmoid(Scalar z) {
    // Split on sign so neither branch overflows exp().
    if (z >= Scalar(0)) {
        return Scalar(1) / (Scalar(1) + std::exp(-z));
    }
    const Scalar e = std::exp(z);
    return e / (Scalar(1) + e);
}

template <typename Scalar>
struct DenseLayer {
    MatrixX<Scalar> weight;  // out x in
    VectorX<Scalar> bias;    // out
    Activation activation = Activation::identity;

    Eigen::Index in_dim() const { return weight.cols(); }
    Eigen::Index out_dim() const { return weight.rows(); }
};

template <typename Scalar>
struct DenseNetGradient {
    std::vector<MatrixX<Scalar>> weight;
    std::vector<VectorX<Scalar>> bias;

    void set_zero() {
        for (auto& w : weight) w.setZero();
        for (auto& b : bias) b.setZero();
    }

    // Same flat order as DenseNet::pack.
    void pack(Eigen::Ref<VectorX<Scalar>> out) const {
        Eigen::Index at = 0;
        for (std::size_t i = 0; i < weight.size(); ++i) {
            out.segment(at, weight[i].size()) = weight[i].reshaped();
            at += weight[i].size();
            out.segment(at, bias[i].size()) = bias[i];
            at += bias[i].size();
        }
    }

    DenseNetGradient& operator+=(const DenseNetGradient& other) {
        for (std::size_t i = 0; i < weight.size(); ++i) {
            weight[i] += other.weight[i];
            bias[i] += other.bias[i];
        }
        return *this;
    }
};

// Intermediate values retained by a batched forward pass. outputs[0] is the
// input batch; outputs[i + 1] is the post-activation output of layer i.
template <typename Scalar>
struct ForwardCache {
    std::vector<MatrixX<Scalar>> outputs;

    const MatrixX<Scalar>& result() const { return outputs.back(); }
};

template <typename Scalar>
class DenseNet {
public:
    DenseNet() = default;

    explicit DenseNet(std::vector<DenseLayer<Scalar>> layers) : layers_(std::move(layers)) {
        if (layers_.empty()) throw Error("DenseNet: no layers");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            if (l.weight.rows() < 1 || l.weight.cols() < 1) throw Error("DenseNet: empty layer");
            if (l.bias.size() != l.weight.rows()) throw Error("DenseNet: bias size mismatch");
            if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
                throw Error("DenseNet: layer " + std::to_string(i) + " does not chain");
            }
        }
    }

    Eigen::Index input_dim() const { return layers_.front().in_dim(); }
    Eigen::Index output_dim() const { return layers_.back().out_dim(); }
    const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
    std::vector<DenseLayer<Scalar>>& layers() { return layers_; }
    bool empty() const { return layers_.empty(); }

    Eigen::Index parameter_count() const {
        Eigen::Index n = 0;
        for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
        return n;
    }

    // Flat parameter order: layer by layer, weight (column-major) then bias.
    void pack(Eigen::Ref<VectorX<Scalar>> out) const {
        if (out.size() != parameter_count()) throw Error("DenseNet::pack: size mismatch");
        Eigen::Index at = 0;
        for (const auto& l : layers_) {
            out.segment(at, l.weight.size()) = l.weight.reshaped();
            at += l.weight.size();
            out.segment(at, l.bias.size()) = l.bias;
            at += l.bias.size();
        }
    }

    void unpack(const Eigen::Ref<const VectorX<Scalar>>& in) {
        if (in.size() != parameter_count()) throw Error("DenseNet::unpack: size mismatch");
        Eigen::Index at = 0;
        for (auto& l : layers_) {
            l.weight.reshaped() = in.segment(at, l.weight.size());
            at += l.weight.size();
            l.bias = in.segment(at, l.bias.size());
            at += l.bias.size();
        }
    }

    DenseNetGradient<Scalar> zero_gradient() const {
        DenseNetGradient<Scalar> g;
        for (const auto& l : layers_) {
            g.weight.push_back(MatrixX<Scalar>::Zero(l.weight.rows(), l.weight.cols()));
            g.bias.push_back(VectorX<Scalar>::Zero(l.bias.size()));
        }
        return g;
    }

    bool all_finite() const {
        for (const auto& l : layers_) {
            if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
        }
        return true;
    }

    // Batched forward: one column per sample.
    MatrixX<Scalar> forward(const MatrixX<Scalar>& inputs) const {
        check_input(inputs.rows());
        MatrixX<Scalar> a = inputs;
        for (const auto& l : layers_) {
            MatrixX<Scalar> z = l.weight * a;
            z.colwise() += l.bias;
            apply_activation(l.activation, z);
            a = std::move(z);
        }
        return a;
    }

    VectorX<Scalar> forward(const VectorX<Scalar>& input) const {
        return forward(MatrixX<Scalar>(input)).col(0);
    }

    ForwardCache<Scalar> forward_cached(const MatrixX<Scalar>& inputs) const {
        check_input(inputs.rows());
        ForwardCache<Scalar> cache;
        cache.outputs.reserve(layers_.size() + 1);
        cache.outputs.push_back(inputs);
        for (const auto& l : layers_) {
            MatrixX<Scalar> z = l.weight * cache.outputs.back();
            z.colwise() += l.bias;
            apply_activation(l.activation, z);
            cache.outputs.push_back(std::move(z));
        }
        return cache;
    }

    // Accumulates into `grad` the parameter gradient of sum_columns <upstream, output>
    // and returns the gradient with respect to the input batch.
    MatrixX<Scalar> backward(const ForwardCache<Scalar>& cache, const MatrixX<Scalar>& upstream,
                             DenseNetGradient<Scalar>& grad) const {
        if (upstream.rows() != output_dim() || upstream.cols() != cache.result().cols()) {
            throw Error("DenseNet::backward: upstream gradient has wrong shape");
        }
        MatrixX<Scalar> delta = upstream;
        for (std::size_t i = layers_.size(); i-- > 0;) {
            const auto& l = layers_[i];
            const MatrixX<Scalar>& out = cache.outputs[i + 1];
            switch (l.activation) {
                case Activation::relu:
                    delta = (out.array() > Scalar(0)).select(delta, Scalar(0));
                    break;
                case Activation::sigmoid:
                    delta.array() *= out.array() * (Scalar(1) - out.array());
                    break;
                case Activation::identity:
                    break;
            }
            grad.weight[i].noalias() += delta * cache.outputs[i].transpose();
            grad.bias[i] += delta.rowwise().sum();
            delta = l.weight.transpose() * delta;
        }
        return delta;
    }

private:
    void check_input(Eigen::Index rows) const {
        if (layers_.empty()) throw Error("DenseNet: evaluating an empty network");
        if (rows != input_dim()) {
            throw Error("DenseNet: input dimension " + std::to_string(rows) + " != " +
                        std::to_string(input_dim()));
        }
    }

    static void apply_activation(Activation act, MatrixX<Scalar>& z) {
        switch (act) {
            case Activation::relu:
                z = z.cwiseMax(Scalar(0));
                break;
            case Activation::sigmoid:
                z = z.unaryExpr([](Scalar v) { return sigmoid(v); });
                break;
            case Activation::identity:
                break;
        }
    }

    std::vector<DenseLayer<Scalar>> layers_;
};

// Weights uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
template <typename Scalar = double>
DenseNet<Scalar> init_net(const std::vector<int>& layer_dims, const std::vector<Activation>& activations,
                          std::uint64_t seed) {
    if (layer_dims.size() < 2) throw Error("init_net: need at least input and output dimensions");
    if (activations.size() != layer_dims.size() - 1) {
        throw Error("init_net: expected one activation per layer");
    }
    for (int d : layer_dims) {
        if (d <= 0) throw Error("init_net: non-positive layer dimension");
    }
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer<Scalar>> layers;
    for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
        const int fan_in = layer_dims[i];
        const Scalar scale = Scalar(1) / std::sqrt(Scalar(fan_in));
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        DenseLayer<Scalar> l;
        l.weight.resize(layer_dims[i + 1], fan_in);
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
                l.weight(r, c) = Scalar(dist(rng)) * scale;
            }
        }
        l.bias = VectorX<Scalar>::Zero(layer_dims[i + 1]);
        l.activation = activations[i];
        layers.push_back(std::move(l));
    }
    return DenseNet<Scalar>(std::move(layers));
}

// Single-sample convenience wrapper around the batched pass.
template <typename Scalar>
std::pair<DenseNetGradient<Scalar>, VectorX<Scalar>> net_backward(const DenseNet<Scalar>& net,
                                                                  const VectorX<Scalar>& input,
                                                                  const VectorX<Scalar>& upstream) {
    if (upstream.size() != net.output_dim()) throw Error("net_backward: upstream size mismatch");
    const auto cache = net.forward_cached(MatrixX<Scalar>(input));
    auto grad = net.zero_gradient();
    MatrixX<Scalar> din = net.backward(cache, MatrixX<Scalar>(upstream), grad);
    return {std::move(grad), VectorX<Scalar>(din.col(0))};
}


// One embedding row per field id, stored as columns of a d x |C| matrix so a
// lookup is a contiguous column.
template <typename Scalar>
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(Eigen::Index fields, Eigen::Index dim) : table_(MatrixX<Scalar>::Zero(dim, fields)) {}

    static EmbeddingTable random(Eigen::Index fields, Eigen::Index dim, std::uint64_t seed) {
        EmbeddingTable t(fields, dim);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        const Scalar scale = Scalar(1) / std::sqrt(Scalar(std::max<Eigen::Index>(dim, 1)));
        for (Eigen::Index c = 0; c < fields; ++c) {
            for (Eigen::Index r = 0; r < dim; ++r) t.table_(r, c) = Scalar(dist(rng)) * scale;
        }
        return t;
    }

    Eigen::Index fields() const { return table_.cols(); }
    Eigen::Index dim() const { return table_.rows(); }

    auto lookup(Eigen::Index field) const {
        if (field < 0 || field >= fields()) {
            throw Error("EmbeddingTable: unknown field id " + std::to_string(field));
        }
        return table_.col(field);
    }

    MatrixX<Scalar>& data() { return table_; }
    const MatrixX<Scalar>& data() const { return table_; }

private:
    MatrixX<Scalar> table_;
};

template <typename Scalar>
struct AdamState {
    VectorX<Scalar> m;
    VectorX<Scalar> v;
    std::int64_t t = 0;
    Scalar learning_rate = Scalar(1e-3);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar epsilon = Scalar(1e-8);

    AdamState() = default;
    AdamState(Eigen::Index n, Scalar lr) : m(VectorX<Scalar>::Zero(n)), v(VectorX<Scalar>::Zero(n)), learning_rate(lr) {}
};

// Bias-corrected Adam. A step with a non-finite gradient is rejected and leaves
// both the parameters and the optimizer state untouched.
template <typename Scalar>
void adam_step(Eigen::Ref<VectorX<Scalar>> params, const Eigen::Ref<const VectorX<Scalar>>& grads,
               AdamState<Scalar>& state) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw Error("adam_step: shape mismatch");
    }
    if (!grads.allFinite()) throw Error("adam_step: non-finite gradient");
    state.t += 1;
    state.m = state.beta1 * state.m + (Scalar(1) - state.beta1) * grads;
    state.v = state.beta2 * state.v + (Scalar(1) - state.beta2) * grads.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(state.beta1, Scalar(state.t));
    const Scalar c2 = Scalar(1) - std::pow(state.beta2, Scalar(state.t));
    params.array() -= state.learning_rate * (state.m.array() / c1) /
                      ((state.v.array() / c2).sqrt() + state.epsilon);
}

} // namespace mcnet
