#include <doctest.h>

#include <random>

#include "mcnet/nn.hpp"
#include "oracles.hpp"

using namespace mcnet;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DenseNet<double> single(double w, double b, Activation act) {
    DenseLayer<double> l;
    l.weight = MatrixXd::Constant(1, 1, w);
    l.bias = VectorXd::Constant(1, b);
    l.activation = act;
    return DenseNet<double>({l});
}

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(v.size());
    int i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST_CASE("init_net is deterministic and starts with zero biases") {
    auto a = init_net({1, 4, 1}, {Activation::relu, Activation::sigmoid}, 7);
    auto b = init_net({1, 4, 1}, {Activation::relu, Activation::sigmoid}, 7);
    VectorXd pa(a.parameter_count()), pb(b.parameter_count());
    a.pack(pa);
    b.pack(pb);
    CHECK(pa == pb);
    for (const auto& l : a.layers()) CHECK(l.bias.isZero(0.0));

    auto c = init_net({1, 4, 1}, {Activation::relu, Activation::sigmoid}, 8);
    VectorXd pc(c.parameter_count());
    c.pack(pc);
    CHECK(pa != pc);
}

TEST_CASE("init_net weights stay inside the fan-in bound") {
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
        auto net = init_net({3, 128, 128, 1}, {Activation::relu, Activation::relu, Activation::sigmoid}, seed);
        for (const auto& l : net.layers()) {
            const double bound = 10.0 / std::sqrt(static_cast<double>(l.in_dim()));
            CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
            CHECK(l.weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(static_cast<double>(l.in_dim())));
        }
    }
}

TEST_CASE("init_net rejects bad shapes") {
    CHECK_THROWS_AS(init_net({}, {}, 0), Error);
    CHECK_THROWS_AS(init_net({3}, {}, 0), Error);
    CHECK_THROWS_AS(init_net({3, 0, 1}, {Activation::relu, Activation::sigmoid}, 0), Error);
    CHECK_THROWS_AS(init_net({3, -2, 1}, {Activation::relu, Activation::sigmoid}, 0), Error);
    CHECK_THROWS_AS(init_net({3, 4, 1}, {Activation::relu}, 0), Error);
}

TEST_CASE("forward: hand examples") {
    CHECK(single(1, 0, Activation::identity).forward(vec({0.3}))[0] == 0.3);
    CHECK(single(2, 1, Activation::identity).forward(vec({0.5}))[0] == 2.0);
    for (double x : {-1e6, -3.0, 0.0, 0.7, 1e6}) {
        CHECK(single(0, 0, Activation::sigmoid).forward(vec({x}))[0] == 0.5);
    }
}

TEST_CASE("forward: dimension mismatch throws") {
    auto net = init_net({3, 4, 1}, {Activation::relu, Activation::sigmoid}, 1);
    CHECK_THROWS_AS(net.forward(vec({1.0, 2.0})), Error);
    CHECK_THROWS_AS(net_backward(net, vec({1, 2, 3}), vec({1, 2})), Error);
}

TEST_CASE("forward is pure and batched evaluation matches per-column") {
    auto net = init_net({3, 8, 8, 1}, {Activation::relu, Activation::relu, Activation::sigmoid}, 3);
    MatrixXd x = MatrixXd::Random(3, 17);
    MatrixXd y1 = net.forward(x);
    MatrixXd y2 = net.forward(x);
    CHECK(y1 == y2);
    for (int j = 0; j < x.cols(); ++j) {
        CHECK(net.forward(VectorXd(x.col(j)))[0] == doctest::Approx(y1(0, j)).epsilon(1e-15));
    }
}

TEST_CASE("sigmoid output stays strictly inside (0,1)") {
    auto net = single(1, 0, Activation::sigmoid);
    for (double x : {-745.0, -100.0, -30.0, 0.0, 30.0, 36.0}) {
        double y = net.forward(vec({x}))[0];
        CHECK(y > 0.0);
        CHECK(y < 1.0);
    }
    CHECK(sigmoid(-1000.0) >= 0.0);
    CHECK(std::isfinite(sigmoid(1000.0)));
}

TEST_CASE("backward: hand chain rule") {
    auto net = single(2, 1, Activation::identity);
    auto [g, din] = net_backward(net, vec({0.5}), vec({1.0}));
    CHECK(g.weight[0](0, 0) == 0.5);
    CHECK(g.bias[0][0] == 1.0);
    CHECK(din[0] == 2.0);
}

TEST_CASE("backward: zero upstream gives zero gradients") {
    auto net = init_net({3, 8, 1}, {Activation::relu, Activation::sigmoid}, 4);
    auto [g, din] = net_backward(net, vec({0.1, -0.2, 0.3}), vec({0.0}));
    VectorXd packed(net.parameter_count());
    g.pack(packed);
    CHECK(packed.isZero(0.0));
    CHECK(din.isZero(0.0));
}

TEST_CASE("backward matches central finite differences on random nets") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> width(1, 8);
    std::uniform_int_distribution<int> in_width(1, 3);
    std::uniform_int_distribution<int> act(0, 2);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        const int depth = 1 + trial % 3;
        std::vector<int> dims{in_width(rng)};
        std::vector<Activation> acts;
        for (int l = 0; l < depth; ++l) {
            dims.push_back(l + 1 == depth ? 1 : width(rng));
            // relu kinks are fine for FD away from zero pre-activations
            acts.push_back(l + 1 == depth ? Activation::sigmoid : static_cast<Activation>(act(rng)));
        }
        auto net = init_net(dims, acts, 1000 + trial);
        // non-zero biases exercise the bias path
        for (auto& l : net.layers()) {
            for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.3 * normal(rng);
        }
        VectorXd x(dims[0]);
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
        const double up = 0.7;

        auto [g, din] = net_backward(net, x, vec({up}));
        VectorXd analytic(net.parameter_count());
        g.pack(analytic);

        VectorXd params(net.parameter_count());
        net.pack(params);
        auto probe = net;
        auto by_params = [&](const VectorXd& p) {
            probe.unpack(p);
            return up * probe.forward(x)[0];
        };
        VectorXd numeric = oracle::numeric_gradient(by_params, params);
        INFO("trial " << trial);
        CHECK(oracle::max_relative_error(analytic, numeric) < 1e-4);

        auto by_input = [&](const VectorXd& xi) { return up * net.forward(xi)[0]; };
        CHECK(oracle::max_relative_error(din, oracle::numeric_gradient(by_input, x)) < 1e-4);
    }
}

TEST_CASE("pack and unpack round-trip") {
    auto net = init_net({3, 5, 1}, {Activation::relu, Activation::sigmoid}, 9);
    VectorXd p(net.parameter_count());
    net.pack(p);
    CHECK(p.size() == 3 * 5 + 5 + 5 + 1);
    auto other = init_net({3, 5, 1}, {Activation::relu, Activation::sigmoid}, 10);
    other.unpack(p);
    VectorXd q(other.parameter_count());
    other.pack(q);
    CHECK(p == q);
    CHECK_THROWS_AS(other.unpack(VectorXd::Zero(3)), Error);
}

TEST_CASE("activation names") {
    for (auto a : {Activation::relu, Activation::sigmoid, Activation::identity}) {
        CHECK(activation_from_string(to_string(a)) == a);
    }
    CHECK_THROWS_AS(activation_from_string("tanh"), Error);
}

TEST_CASE("embedding table") {
    auto t = EmbeddingTable<double>::random(3, 4, 5);
    CHECK(t.fields() == 3);
    CHECK(t.dim() == 4);
    CHECK(t.lookup(2).size() == 4);
    CHECK_THROWS_AS(t.lookup(3), Error);
    CHECK_THROWS_AS(t.lookup(-1), Error);
    EmbeddingTable<double> z(2, 4);
    CHECK(z.lookup(1).isZero(0.0));
}

TEST_CASE("adam: hand-evaluated first step") {
    VectorXd p = vec({0.0});
    AdamState<double> s(1, 0.1);
    adam_step<double>(p, vec({1.0}), s);
    CHECK(s.t == 1);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-7));
}

TEST_CASE("adam: zero gradients leave parameters alone") {
    VectorXd p = vec({0.3, -1.2, 4.0});
    const VectorXd start = p;
    AdamState<double> s(3, 0.01);
    for (int i = 0; i < 50; ++i) adam_step<double>(p, VectorXd::Zero(3), s);
    CHECK(p == start);
}

TEST_CASE("adam: identical inputs give identical trajectories") {
    auto run = [] {
        std::mt19937_64 rng(42);
        std::normal_distribution<double> n(0, 1);
        VectorXd p = VectorXd::Zero(5);
        AdamState<double> s(5, 0.05);
        for (int i = 0; i < 100; ++i) {
            VectorXd g(5);
            for (int j = 0; j < 5; ++j) g[j] = n(rng) + p[j];
            adam_step<double>(p, g, s);
        }
        return p;
    };
    CHECK(run() == run());
}

TEST_CASE("adam: rejects bad input without mutating state") {
    VectorXd p = vec({1.0, 2.0});
    AdamState<double> s(2, 0.1);
    CHECK_THROWS_AS(adam_step<double>(p, vec({1.0}), s), Error);
    CHECK_THROWS_AS(adam_step<double>(p, vec({1.0, std::nan("")}), s), Error);
    CHECK_THROWS_AS(adam_step<double>(p, vec({1.0, INFINITY}), s), Error);
    CHECK(p == vec({1.0, 2.0}));
    CHECK(s.t == 0);
    CHECK(s.m.isZero(0.0));
}

TEST_CASE("float instantiation compiles and runs") {
    auto net = init_net<float>({2, 3, 1}, {Activation::relu, Activation::sigmoid}, 1);
    Eigen::VectorXf x(2);
    x << 0.5f, -0.5f;
    float y = net.forward(x)[0];
    CHECK(y > 0.0f);
    CHECK(y < 1.0f);
}
