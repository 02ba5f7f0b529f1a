#include <doctest.h>

#include "dle/nn.hpp"

using namespace dle;

namespace {

// Independent dense forward oracle: plain nested loops, no shared code with
// DenseNet beyond the parameter values.
Vec oracle_forward(const DenseNet& net, const Vec& input) {
    Vec cur = input;
    for (int l = 0; l < net.layer_count(); ++l) {
        const Matrix& w = net.weight(l);
        const Matrix& b = net.bias(l);
        Vec next(static_cast<size_t>(w.cols), 0.0);
        for (int c = 0; c < w.cols; ++c) {
            double acc = b.at(0, c);
            for (int r = 0; r < w.rows; ++r) acc += cur[static_cast<size_t>(r)] * w.at(r, c);
            switch (net.activations()[static_cast<size_t>(l)]) {
                case Activation::Relu: acc = acc > 0 ? acc : 0; break;
                case Activation::Tanh: acc = std::tanh(acc); break;
                case Activation::Identity: break;
            }
            next[static_cast<size_t>(c)] = acc;
        }
        cur = next;
    }
    return cur;
}

double loss_of(const DenseNet& net, const Vec& input, const Vec& weights) {
    Vec out = net.forward(input);
    double l = 0.0;
    for (size_t i = 0; i < out.size(); ++i) l += weights[i] * out[i];
    return l;
}

}  // namespace

TEST_CASE("forward: zero net with identity activation is the zero map") {
    DenseNet net({3, 4}, {Activation::Identity});
    Vec out = net.forward({1.0, -2.0, 3.0});
    for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("forward: 1->1 affine arithmetic") {
    DenseNet net({1, 1}, {Activation::Identity});
    net.weight(0).at(0, 0) = 2.0;
    net.bias(0).at(0, 0) = 1.0;
    CHECK(net.forward({3.0})[0] == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("forward: random 4->8->2 net matches the hand-rolled oracle") {
    Rng rng(42);
    DenseNet net({4, 8, 2}, {Activation::Relu, Activation::Identity});
    net.init_params(rng);
    for (int trial = 0; trial < 20; ++trial) {
        Vec x(4);
        for (auto& v : x) v = rng.uniform(-2.0, 2.0);
        Vec got = net.forward(x);
        Vec want = oracle_forward(net, x);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(std::fabs(got[i] - want[i]) <= 1e-9);
    }
}

TEST_CASE("forward: dimension mismatch is rejected with a diagnostic") {
    DenseNet net({4, 2}, {Activation::Identity});
    CHECK_THROWS_WITH_AS(net.forward({1.0, 2.0}), doctest::Contains("layer 0"),
                         std::invalid_argument);
}

TEST_CASE("backward: affine 1->1 derivative") {
    DenseNet net({1, 1}, {Activation::Identity});
    net.weight(0).at(0, 0) = 1.0;
    DenseTrace tr;
    net.forward({5.0}, tr);
    NetGrads g = net.backward(tr, {1.0});
    CHECK(g.g[0].at(0, 0) == doctest::Approx(5.0));  // dW = input
    CHECK(g.g[1].at(0, 0) == doctest::Approx(1.0));  // db = 1
}

TEST_CASE("backward: relu-dead unit passes zero gradient") {
    DenseNet net({1, 1, 1}, {Activation::Relu, Activation::Identity});
    net.weight(0).at(0, 0) = 1.0;
    net.weight(1).at(0, 0) = 1.0;
    DenseTrace tr;
    net.forward({-3.0}, tr);  // pre-activation -3 < 0: dead
    Vec din;
    NetGrads g = net.backward(tr, {1.0}, &din);
    CHECK(g.g[0].at(0, 0) == 0.0);
    CHECK(din[0] == 0.0);
}

TEST_CASE("backward: requires a forward trace") {
    DenseNet net({2, 2}, {Activation::Identity});
    DenseTrace tr;
    CHECK_THROWS_AS(net.backward(tr, {1.0, 1.0}), std::invalid_argument);
}

namespace {

// Central differences are meaningless across a relu kink; keep test points a
// safe margin away from every kink so the comparison is well-posed.
bool clear_of_relu_kinks(const DenseNet& net, const Vec& x, double margin) {
    DenseTrace tr;
    net.forward(x, tr);
    for (int l = 0; l < net.layer_count(); ++l) {
        if (net.activations()[static_cast<size_t>(l)] != Activation::Relu) continue;
        for (double pre : tr.pre[static_cast<size_t>(l)])
            if (std::fabs(pre) < margin) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("gradients match central finite differences on 100 random nets") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        int layers = 1 + static_cast<int>(rng.below(3));  // up to 3 weight layers
        std::vector<int> sizes{1 + static_cast<int>(rng.below(16))};
        std::vector<Activation> acts;
        for (int l = 0; l < layers; ++l) {
            sizes.push_back(1 + static_cast<int>(rng.below(16)));
            double pick = rng.uniform();
            acts.push_back(pick < 0.4 ? Activation::Relu
                                      : (pick < 0.7 ? Activation::Tanh : Activation::Identity));
        }
        DenseNet net(sizes, acts);
        net.init_params(rng);
        Vec x(static_cast<size_t>(sizes.front()));
        for (int attempt = 0; attempt < 100; ++attempt) {
            for (auto& v : x) v = rng.uniform(-1.0, 1.0);
            if (clear_of_relu_kinks(net, x, 5e-3)) break;
        }
        if (!clear_of_relu_kinks(net, x, 5e-3)) continue;
        Vec lw(static_cast<size_t>(sizes.back()));
        for (auto& v : lw) v = rng.uniform(-1.0, 1.0);

        DenseTrace tr;
        net.forward(x, tr);
        NetGrads analytic = net.backward(tr, lw);

        auto params = net.params();
        const double h = 1e-5;
        for (size_t p = 0; p < params.size(); ++p) {
            for (size_t k = 0; k < params[p]->a.size(); ++k) {
                double saved = params[p]->a[k];
                params[p]->a[k] = saved + h;
                double up = loss_of(net, x, lw);
                params[p]->a[k] = saved - h;
                double dn = loss_of(net, x, lw);
                params[p]->a[k] = saved;
                double fd = (up - dn) / (2.0 * h);
                double an = analytic.g[p].a[k];
                double denom = std::max({std::fabs(fd), std::fabs(an), 1e-6});
                CHECK(std::fabs(fd - an) / denom <= 1e-4);
            }
        }
    }
}

TEST_CASE("optimizer: zero gradient leaves parameters unchanged") {
    DenseNet net({2, 2}, {Activation::Identity});
    Rng rng(1);
    net.init_params(rng);
    DenseNet before = net;
    Adam opt(1e-2);
    NetGrads zero = net.zero_grads();
    opt.step(net.params(), zero.g);
    auto p = net.params();
    auto q = before.params();
    for (size_t i = 0; i < p.size(); ++i)
        for (size_t k = 0; k < p[i]->a.size(); ++k)
            CHECK(std::fabs(p[i]->a[k] - q[i]->a[k]) <= 1e-2 * 1e-8 * 10);
}

TEST_CASE("optimizer: constant positive gradient decreases a scalar parameter monotonically") {
    Matrix w(1, 1);
    w.at(0, 0) = 1.0;
    Matrix g(1, 1);
    g.at(0, 0) = 0.5;
    Adam opt(1e-2);
    double prev = w.at(0, 0);
    for (int i = 0; i < 50; ++i) {
        opt.step({&w}, {g});
        CHECK(w.at(0, 0) < prev);
        prev = w.at(0, 0);
    }
}

TEST_CASE("optimizer: quadratic bowl reaches the closed-form minimum") {
    // f(w) = (w-3)^2, minimum at 3
    Matrix w(1, 1);
    Adam opt(1e-2);
    int steps = 0;
    for (; steps < 2000; ++steps) {
        Matrix g(1, 1);
        g.at(0, 0) = 2.0 * (w.at(0, 0) - 3.0);
        opt.step({&w}, {g});
        if (std::fabs(w.at(0, 0) - 3.0) < 1e-3) break;
    }
    CHECK(std::fabs(w.at(0, 0) - 3.0) < 1e-3);
    CHECK(steps < 2000);
}

TEST_CASE("optimizer: non-finite gradient skips the update and the step counter") {
    Matrix w(1, 1);
    w.at(0, 0) = 1.0;
    Matrix g(1, 1);
    g.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    Adam opt(1e-2);
    CHECK_FALSE(opt.step({&w}, {g}));
    CHECK(opt.step_count == 0);
    CHECK(opt.skipped == 1);
    CHECK(w.at(0, 0) == 1.0);
}

TEST_CASE("determinism: identical seeds give bit-identical parameters after N steps") {
    auto run = [] {
        Rng rng(99);
        DenseNet net({3, 5, 2}, {Activation::Tanh, Activation::Identity});
        net.init_params(rng);
        Adam opt(3e-4);
        for (int i = 0; i < 25; ++i) {
            Vec x(3);
            for (auto& v : x) v = rng.uniform(-1.0, 1.0);
            DenseTrace tr;
            Vec out = net.forward(x, tr);
            NetGrads g = net.backward(tr, Vec(out.size(), 1.0));
            opt.step(net.params(), g.g);
        }
        return net;
    };
    DenseNet a = run();
    DenseNet b = run();
    CHECK(a == b);
}

TEST_CASE("checkpoint: save/load round-trips bit-exactly") {
    Rng rng(1234);
    DenseNet net({6, 32, 32}, {Activation::Relu, Activation::Identity});
    net.init_params(rng);
    std::string blob = net.to_json_string();
    DenseNet loaded = DenseNet::from_json_string(blob);
    CHECK(loaded == net);
    CHECK(loaded.to_json_string() == blob);
}

TEST_CASE("optimizer state: accumulator shapes follow parameters, steps count up") {
    Matrix w(2, 3);
    Matrix g(2, 3);
    g.fill(0.1);
    Adam opt(1e-3);
    opt.step({&w}, {g});
    opt.step({&w}, {g});
    CHECK(opt.step_count == 2);
    REQUIRE(opt.m.size() == 1);
    CHECK(opt.m[0].rows == 2);
    CHECK(opt.m[0].cols == 3);
}
