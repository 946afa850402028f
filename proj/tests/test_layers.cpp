#include <cmath>
#include <vector>

#include "doctest.h"
#include "pointkan/gradcheck.hpp"
#include "pointkan/layers.hpp"
#include "pointkan/rng.hpp"

using namespace pointkan;

namespace {

// d_in = d_out = 1, degree 1, alpha = beta = 1, poly omega = [0, 1], no base
// branch, no normalization: s = f_1(tanh r) = 2 tanh(r).
KanLayer single_unit_layer() {
    Rng rng(1);
    KanLayer layer("unit", {BasisFamily::Jacobi, 1, 1.0, 1.0}, 1, 1, /*normalize=*/false, rng);
    layer.poly_weights.value[0] = 0.0;
    layer.poly_weights.value[1] = 1.0;
    layer.base_weights.value[0] = 0.0;
    return layer;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("kan forward frozen values") {
    KanLayer layer = single_unit_layer();
    SUBCASE("zero input maps to zero") {
        const Tensor s = layer.forward(Tensor({1, 1}, {0.0}));
        CHECK(s[0] == 0.0);
    }
    SUBCASE("unit input gives 2*tanh(1)") {
        const Tensor s = layer.forward(Tensor({1, 1}, {1.0}));
        CHECK(s[0] == doctest::Approx(2.0 * std::tanh(1.0)).epsilon(1e-15));
        CHECK(s[0] == doctest::Approx(1.5232).epsilon(1e-4));
    }
    SUBCASE("all-zero weights give the zero map") {
        Rng rng(2);
        KanLayer zero("zero", {BasisFamily::Jacobi, 3, 1.0, 1.0}, 3, 4, /*normalize=*/false, rng);
        zero.poly_weights.value.zero();
        zero.base_weights.value.zero();
        Tensor r({2, 3});
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.uniform(-3.0, 3.0);
        const Tensor s = zero.forward(r);
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == 0.0);
    }
}

TEST_CASE("kan backward frozen hand computation") {
    KanLayer layer = single_unit_layer();
    layer.forward(Tensor({1, 1}, {0.0}));
    const Tensor grad_r = layer.backward(Tensor({1, 1}, {1.0}));

    // f_1(gamma) = 2*gamma, so d s/d r = omega_1 * f_1'(0) * (1 - tanh^2 0) = 2
    CHECK(grad_r[0] == doctest::Approx(2.0).epsilon(1e-15));
    // grad of omega_1 is f_1(tanh 0) = 0; grad of omega_0 is f_0 = 1
    CHECK(layer.poly_weights.grad[1] == 0.0);
    CHECK(layer.poly_weights.grad[0] == 1.0);
}

TEST_CASE("kan backward with zero upstream gradient") {
    Rng rng(3);
    KanLayer layer("l", {BasisFamily::Jacobi, 2, 1.0, 1.0}, 3, 4, /*normalize=*/true, rng);
    Tensor r({2, 3});
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.uniform(-2.0, 2.0);
    layer.forward(r);
    const Tensor grad_r = layer.backward(Tensor({2, 4}));
    for (std::size_t i = 0; i < grad_r.size(); ++i) CHECK(grad_r[i] == 0.0);
    for (Parameter* p : layer.parameters()) {
        for (std::size_t i = 0; i < p->grad.size(); ++i) CHECK(p->grad[i] == 0.0);
    }
}

TEST_CASE("kan parameter count identity") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d_in = 1 + rng.below(12);
        const std::size_t d_out = 1 + rng.below(12);
        const int degree = static_cast<int>(rng.below(5));
        KanLayer layer("l", {BasisFamily::Jacobi, degree, 1.0, 1.0}, d_in, d_out, true, rng);
        std::size_t total = 0;
        for (Parameter* p : layer.parameters()) total += p->size();
        CHECK(total == (static_cast<std::size_t>(degree) + 2) * d_in * d_out + 2 * d_out);
        CHECK(total == layer.param_count());
    }
}

TEST_CASE("tanh pre-scaling keeps basis inputs strictly inside (-1,1)") {
    Rng rng(7);
    Tensor r({16, 6});
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.uniform(-10.0, 10.0);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(std::abs(std::tanh(r[i])) < 1.0);
    // the layer itself must accept such inputs without a domain error
    KanLayer layer("l", {BasisFamily::Jacobi, 3, 1.0, 1.0}, 6, 5, true, rng);
    CHECK_NOTHROW(layer.forward(r));
}

TEST_CASE("kan with zero poly branch equals bias-free linear over silu") {
    Rng rng(11);
    const std::size_t d_in = 4;
    const std::size_t d_out = 3;
    KanLayer layer("l", {BasisFamily::Jacobi, 3, 1.0, 1.0}, d_in, d_out, /*normalize=*/false,
                   rng);
    layer.poly_weights.value.zero();

    Tensor r({5, d_in});
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.uniform(-3.0, 3.0);
    const Tensor s = layer.forward(r);

    for (std::size_t b = 0; b < 5; ++b) {
        for (std::size_t o = 0; o < d_out; ++o) {
            double expect = 0.0;
            for (std::size_t j = 0; j < d_in; ++j) {
                expect += layer.base_weights.value.at(o, j) * silu(r.at(b, j));
            }
            CHECK(s.at(b, o) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("kan output is Lipschitz-smooth in the input") {
    Rng rng(13);
    KanLayer layer("l", {BasisFamily::Jacobi, 3, 1.0, 1.0}, 4, 6, true, rng);
    const double eps = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        Tensor r({1, 4});
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.uniform(-2.0, 2.0);
        const Tensor s0 = layer.forward(r);
        Tensor r2 = r;
        for (std::size_t i = 0; i < r2.size(); ++i) r2[i] += eps * rng.uniform(-1.0, 1.0);
        const Tensor s1 = layer.forward(r2);
        double diff = 0.0;
        for (std::size_t i = 0; i < s0.size(); ++i) diff = std::max(diff, std::abs(s1[i] - s0[i]));
        CHECK(diff < 1e3 * eps);  // measured ratio stays bounded
    }
}

TEST_CASE("kan finite-difference oracle over parameters and input") {
    Rng rng(17);
    KanLayer layer("l", {BasisFamily::Jacobi, 3, 1.0, 1.0}, 4, 5, /*normalize=*/true, rng);
    Tensor r({3, 4});
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.uniform(-2.0, 2.0);
    Tensor proj({3, 5});
    for (std::size_t i = 0; i < proj.size(); ++i) proj[i] = rng.uniform(-1.0, 1.0);

    for (Parameter* p : layer.parameters()) p->zero_grad();
    layer.forward(r);
    const Tensor grad_r = layer.backward(proj);

    for (Parameter* p : layer.parameters()) {
        const Tensor analytic = p->grad;
        auto f = [&](const Tensor& candidate) {
            const Tensor saved = p->value;
            p->value = candidate;
            const double out = dot(layer.forward(r), proj);
            p->value = saved;
            return out;
        };
        CHECK(finite_diff_check(f, p->value, analytic) < 1e-4);
    }
    auto f_in = [&](const Tensor& candidate) { return dot(layer.forward(candidate), proj); };
    CHECK(finite_diff_check(f_in, r, grad_r) < 1e-4);
}

TEST_CASE("kan contract errors") {
    Rng rng(19);
    KanLayer layer("l", {BasisFamily::Jacobi, 2, 1.0, 1.0}, 3, 2, true, rng);
    CHECK_THROWS_AS(layer.backward(Tensor({1, 2})), std::logic_error);
    CHECK_THROWS_AS(layer.forward(Tensor({2, 5})), std::invalid_argument);
    layer.forward(Tensor({2, 3}));
    CHECK_THROWS_AS(layer.backward(Tensor({2, 3})), std::invalid_argument);
}

TEST_CASE("linear forward frozen values") {
    Rng rng(23);
    SUBCASE("identity") {
        LinearLayer layer("l", 2, 2, rng);
        layer.weights.value = Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0});
        layer.bias.value.zero();
        const Tensor y = layer.forward(Tensor({1, 2}, {3.0, 4.0}));
        CHECK(y[0] == 3.0);
        CHECK(y[1] == 4.0);
    }
    SUBCASE("row dot plus bias") {
        LinearLayer layer("l", 2, 1, rng);
        layer.weights.value = Tensor({1, 2}, {1.0, 2.0});
        layer.bias.value = Tensor({1}, {1.0});
        const Tensor y = layer.forward(Tensor({1, 2}, {1.0, 1.0}));
        CHECK(y[0] == 4.0);
    }
}

TEST_CASE("linear parameter count and state errors") {
    Rng rng(29);
    LinearLayer layer("l", 7, 3, rng);
    CHECK(layer.param_count() == 7 * 3 + 3);
    CHECK_THROWS_AS(layer.backward(Tensor({1, 3})), std::logic_error);
}

TEST_CASE("linear finite-difference oracle") {
    Rng rng(31);
    LinearLayer layer("l", 4, 3, rng);
    Tensor x({2, 4});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    Tensor proj({2, 3});
    for (std::size_t i = 0; i < proj.size(); ++i) proj[i] = rng.uniform(-1.0, 1.0);

    for (Parameter* p : layer.parameters()) p->zero_grad();
    layer.forward(x);
    const Tensor grad_x = layer.backward(proj);

    for (Parameter* p : layer.parameters()) {
        const Tensor analytic = p->grad;
        auto f = [&](const Tensor& candidate) {
            const Tensor saved = p->value;
            p->value = candidate;
            const double out = dot(layer.forward(x), proj);
            p->value = saved;
            return out;
        };
        CHECK(finite_diff_check(f, p->value, analytic) < 1e-6);
    }
    auto f_in = [&](const Tensor& candidate) { return dot(layer.forward(candidate), proj); };
    CHECK(finite_diff_check(f_in, x, grad_x) < 1e-6);
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
    Rng rng(37);
    LinearLayer layer("l", 2, 2, rng);
    const Tensor x({1, 2}, {1.0, 2.0});
    const Tensor g({1, 2}, {1.0, 0.0});
    layer.forward(x);
    layer.backward(g);
    const double once = layer.weights.grad[0];
    layer.forward(x);
    layer.backward(g);
    CHECK(layer.weights.grad[0] == doctest::Approx(2.0 * once).epsilon(1e-15));
    layer.weights.zero_grad();
    CHECK(layer.weights.grad[0] == 0.0);
}
