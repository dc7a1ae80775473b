#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "pcnn/tape.hpp"

#include "helpers.hpp"

using namespace pcnn;
using pcnn::testing::rel_err;

namespace {

// Builds a scalar expression from a leaf vector; used both for reverse mode
// and for the finite-difference oracle.
using ScalarFn = std::function<ad::Var(ad::Tape&, ad::Var)>;

void check_gradient(const ScalarFn& build, std::vector<double> x0, double tol = 1e-5,
                    double h = 1e-6) {
    ad::Tape tape;
    ad::Var x = tape.leaf(x0);
    ad::Var y = build(tape, x);
    REQUIRE(y.size() == 1);
    std::vector<double> g = tape.gradient(y, x);

    for (std::size_t i = 0; i < x0.size(); ++i) {
        auto eval = [&](double v) {
            ad::Tape t2;
            std::vector<double> xp = x0;
            xp[i] = v;
            return build(t2, t2.leaf(xp)).scalar();
        };
        double fd = pcnn::testing::central_diff(eval, x0[i], h);
        CHECK(rel_err(g[i], fd) <= tol);
    }
}

}  // namespace

TEST_CASE("relu and neg-relu values") {
    ad::Tape tape;
    ad::Var x = tape.constant({-1.0, 0.0, 2.0});
    auto r = ad::relu(x).value();
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
    CHECK(r[2] == 2.0);
    auto n = ad::neg_relu(x).value();
    CHECK(n[0] == -1.0);
    CHECK(n[1] == 0.0);
    CHECK(n[2] == 0.0);
}

TEST_CASE("d/dx of x*x at x=3 is 6") {
    ad::Tape tape;
    ad::Var x = tape.leaf({3.0});
    ad::Var y = ad::sum(ad::mul(x, x));
    CHECK(tape.gradient(y, x)[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("sum of identity matvec gives ones gradient") {
    ad::Tape tape;
    ad::Var W = tape.constant({1.0, 0.0, 0.0, 1.0}, 2, 2);
    ad::Var x = tape.leaf({1.0, 2.0});
    ad::Var y = ad::sum(ad::matvec(W, x));
    auto g = tape.gradient(y, x);
    CHECK(g[0] == 1.0);
    CHECK(g[1] == 1.0);
}

TEST_CASE("unreachable leaf gets a zero gradient") {
    ad::Tape tape;
    ad::Var x = tape.leaf({1.0, 2.0});
    ad::Var y = tape.constant_scalar(5.0);
    auto g = tape.gradient(ad::sum(y), x);
    CHECK(g == std::vector<double>{0.0, 0.0});
}

TEST_CASE("relu and neg-relu subgradient at exactly zero is zero") {
    ad::Tape tape;
    ad::Var x = tape.leaf({0.0});
    CHECK(tape.gradient(ad::sum(ad::relu(x)), x)[0] == 0.0);
    ad::Tape tape2;
    ad::Var x2 = tape2.leaf({0.0});
    CHECK(tape2.gradient(ad::sum(ad::neg_relu(x2)), x2)[0] == 0.0);
}

TEST_CASE("every primitive matches finite differences") {
    std::vector<double> x0{0.7, -0.4, 1.3};
    check_gradient([](ad::Tape& t, ad::Var x) { return ad::sum(ad::tanh(x)); }, x0);
    check_gradient([](ad::Tape& t, ad::Var x) { return ad::sum(ad::sigmoid(x)); }, x0);
    check_gradient([](ad::Tape& t, ad::Var x) { return ad::sum(ad::exp(x)); }, x0);
    check_gradient([](ad::Tape& t, ad::Var x) { return ad::sum(ad::relu(x)); }, x0);
    check_gradient([](ad::Tape& t, ad::Var x) { return ad::sum(ad::neg_relu(x)); }, x0);
    check_gradient([](ad::Tape& t, ad::Var x) { return ad::sum(ad::square(x)); }, x0);
    check_gradient([](ad::Tape& t, ad::Var x) { return ad::mean(ad::square(x)); }, x0);
    check_gradient([](ad::Tape& t, ad::Var x) { return ad::sum(ad::smul(x, -2.5)); }, x0);
    check_gradient(
        [](ad::Tape& t, ad::Var x) {
            ad::Var c = t.constant({0.3, -1.0, 2.0});
            return ad::sum(ad::mul(x, c));
        },
        x0);
    check_gradient(
        [](ad::Tape& t, ad::Var x) {
            ad::Var c = t.constant({0.3, -1.0, 2.0});
            return ad::sum(ad::square(ad::sub(x, c)));
        },
        x0);
    check_gradient(
        [](ad::Tape& t, ad::Var x) {
            ad::Var W = t.constant({0.5, -0.2, 0.1, 0.8, 0.0, -1.1}, 2, 3);
            return ad::sum(ad::tanh(ad::matvec(W, x)));
        },
        x0);
    check_gradient(
        [](ad::Tape& t, ad::Var x) {
            ad::Var W = t.constant({0.5, -0.2, 0.1, 0.8, 0.0, -1.1}, 3, 2);
            return ad::sum(ad::matvec_t(W, x));
        },
        x0);
    check_gradient(
        [](ad::Tape& t, ad::Var x) {
            ad::Var b = t.constant({1.5, -0.5});
            return ad::sum(ad::outer(x, b));
        },
        x0);
    check_gradient(
        [](ad::Tape& t, ad::Var x) {
            std::vector<ad::Var> parts{ad::slice(x, 0, 2), ad::slice(x, 1, 2)};
            return ad::sum(ad::square(ad::concat(parts)));
        },
        x0);
    check_gradient(
        [](ad::Tape& t, ad::Var x) { return ad::sum(ad::square(ad::pad(x, 2, 7))); }, x0);
    check_gradient(
        [](ad::Tape& t, ad::Var x) {
            return ad::sum(ad::broadcast(ad::mean(ad::square(x)), 4));
        },
        x0);
}

TEST_CASE("random deep compositions match finite differences") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> pick_op(0, 6);
    std::uniform_real_distribution<double> val(-1.2, 1.2);

    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> x0(4);
        for (double& v : x0) v = val(rng);
        // avoid relu kinks right at the sample point
        for (double& v : x0)
            if (std::abs(v) < 0.05) v = 0.05;

        std::vector<int> ops;
        std::uniform_int_distribution<int> depth_dist(5, 30);
        int depth = depth_dist(rng);
        for (int i = 0; i < depth; ++i) ops.push_back(pick_op(rng));
        std::vector<double> cvals(4);
        for (double& v : cvals) v = val(rng);

        auto build = [&](ad::Tape& t, ad::Var x) {
            ad::Var cur = x;
            ad::Var c = t.constant(cvals);
            for (int op : ops) {
                switch (op) {
                    case 0: cur = ad::tanh(cur); break;
                    case 1: cur = ad::sigmoid(cur); break;
                    case 2: cur = ad::add(cur, c); break;
                    case 3: cur = ad::mul(cur, c); break;
                    case 4: cur = ad::smul(cur, 0.7); break;
                    case 5: cur = ad::sub(cur, ad::tanh(c)); break;
                    case 6: cur = ad::add(cur, ad::tanh(ad::smul(cur, 0.3))); break;
                }
            }
            return ad::mean(ad::square(cur));
        };
        // deep chains amplify finite-difference noise; keep a safety margin
        check_gradient(build, x0, 1e-3, 1e-5);
    }
}

TEST_CASE("forward values and gradients are deterministic") {
    auto run = [] {
        ad::Tape tape;
        ad::Var x = tape.leaf({0.3, -0.8, 1.7});
        ad::Var y = ad::mean(ad::square(ad::tanh(ad::smul(x, 1.3))));
        auto g = tape.gradient(y, x);
        g.push_back(y.scalar());
        return g;
    };
    auto a = run();
    auto b = run();
    CHECK(a == b);  // bit-identical
}

TEST_CASE("backward emits tape ops, enabling a second backward pass") {
    // w -> z = w^2; first backward gives dz/dw = 2w as recorded nodes, and a
    // second backward over g = (dz/dw)^2 must give d(4w^2)/dw = 8w.
    ad::Tape tape;
    ad::Var w = tape.leaf({1.5});
    ad::Var z = ad::sum(ad::square(w));
    auto adj = tape.backward(z);
    REQUIRE(adj.count(w.id) == 1);
    ad::Var dz_dw = adj.at(w.id);
    CHECK(dz_dw.value()[0] == doctest::Approx(3.0).epsilon(1e-12));

    ad::Var penalty = ad::sum(ad::square(dz_dw));
    auto g2 = tape.gradient(penalty, w);
    CHECK(g2[0] == doctest::Approx(8.0 * 1.5).epsilon(1e-12));
}

TEST_CASE("double backward matches a finite difference of the gradient") {
    // f(w) = sum(tanh(w)^2); penalty(w) = sum over i of (df/dw_i)^2.
    std::vector<double> w0{0.4, -0.9};
    auto grad_of_f = [&](const std::vector<double>& w) {
        ad::Tape t;
        ad::Var wv = t.leaf(w);
        return t.gradient(ad::sum(ad::square(ad::tanh(wv))), wv);
    };
    auto penalty_value = [&](const std::vector<double>& w) {
        auto g = grad_of_f(w);
        double s = 0;
        for (double v : g) s += v * v;
        return s;
    };

    ad::Tape tape;
    ad::Var w = tape.leaf(w0);
    auto adj = tape.backward(ad::sum(ad::square(ad::tanh(w))));
    ad::Var penalty = ad::sum(ad::square(adj.at(w.id)));
    auto g2 = tape.gradient(penalty, w);

    for (std::size_t i = 0; i < w0.size(); ++i) {
        auto eval = [&](double v) {
            std::vector<double> wp = w0;
            wp[i] = v;
            return penalty_value(wp);
        };
        double fd = pcnn::testing::central_diff(eval, w0[i], 1e-6);
        CHECK(rel_err(g2[i], fd) <= 1e-5);
    }
}

TEST_CASE("backward requires a scalar seed") {
    ad::Tape tape;
    ad::Var x = tape.leaf({1.0, 2.0});
    CHECK_THROWS(tape.backward(x));
}
