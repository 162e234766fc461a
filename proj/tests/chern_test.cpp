#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "quillen/chern.hpp"

#include <random>

using namespace quillen;

namespace {

bool cpoly_equal(const CPoly& a, const CPoly& b)
{
    return (a - b).is_zero();
}

CPoly cvar(int k) { return CPoly::variable(k, 5); }
CPoly cconst(long long n, long long d) { return CPoly::constant(Rat(n, d), 5); }

} // namespace

TEST_CASE("Todd components match the frozen low-order expansions")
{
    auto td = todd_components(5);
    CHECK(cpoly_equal(td.components[0], cconst(1, 1)));
    CHECK(cpoly_equal(td.components[1], cconst(1, 2) * cvar(1)));
    CHECK(cpoly_equal(td.components[2], cconst(1, 12) * (cvar(1) * cvar(1) + cvar(2))));
    CHECK(cpoly_equal(td.components[3], cconst(1, 24) * cvar(1) * cvar(2)));
    auto c1 = cvar(1), c2 = cvar(2), c3 = cvar(3), c4 = cvar(4);
    CPoly td4 = cconst(1, 720)
                * (cconst(-1, 1) * c1 * c1 * c1 * c1 + cconst(4, 1) * c1 * c1 * c2
                   + cconst(3, 1) * c2 * c2 + c1 * c3 - c4);
    CHECK(cpoly_equal(td.components[4], td4));
    CPoly td5 = cconst(1, 1440)
                * (cconst(-1, 1) * c1 * c1 * c1 * c2 + cconst(3, 1) * c1 * c2 * c2
                   + c1 * c1 * c3 - c1 * c4);
    CHECK(cpoly_equal(td.components[5], td5));

    for (int j = 0; j <= 5; ++j)
        for (const auto& [m, v] : td.components[j].terms()) CHECK(m.weight() == j);

    CHECK_THROWS_AS(todd_components(6), std::invalid_argument);
}

TEST_CASE("chern_from_curvature basics")
{
    int n = 2;
    FormMatrix zero(2, n);
    auto cv = chern_from_curvature(zero);
    CHECK(std::abs(cv.classes[0].top_coefficient()) < 1e-15); // degree 0, no top part
    CHECK(std::abs(cv.classes[0].at(0, 0) - cplx(1.0)) < 1e-15);
    CHECK(cv.classes[1].is_zero());
    CHECK(cv.classes[2].is_zero());

    // diagonal case: c1 = (1/2πi) Σ γ_j · (2-form)
    ExtElement f = wedge(ExtElement::dz(n, 1), ExtElement::dzbar(n, 1));
    FormMatrix diag(2, n);
    diag(0, 0) = cplx(0.7, 0.1) * f;
    diag(1, 1) = cplx(-0.3, 0.4) * f;
    auto cvd = chern_from_curvature(diag);
    ExtElement expect = (cplx(0.4, 0.5) / kTwoPiI) * f;
    CHECK(distance(cvd.classes[1], expect) < 1e-12);

    // non-(1,1) entries rejected
    FormMatrix bad(2, n);
    bad(0, 0) = ExtElement::dz(n, 1);
    CHECK_THROWS_AS(chern_from_curvature(bad), std::invalid_argument);
}

TEST_CASE("minor route equals Newton route on random curvature matrices")
{
    std::mt19937 rng(23);
    for (int n = 2; n <= 4; ++n) {
        for (int rep = 0; rep < 4; ++rep) {
            auto omega = random_11_matrix(n, n, rng);
            auto a = chern_from_curvature(omega);
            auto b = chern_from_power_sums(omega);
            for (std::size_t j = 0; j < a.classes.size(); ++j)
                CHECK(distance(a.classes[j], b.classes[j]) < 1e-10);
        }
    }
}

TEST_CASE("Newton round trip classes -> power sums -> classes")
{
    std::mt19937 rng(29);
    int n = 3;
    auto omega = random_11_matrix(n, n, rng);
    auto cv = chern_from_curvature(omega);
    // forward: s_k from the symbolic Newton polynomials evaluated at the classes
    auto psum = detail::newton_power_sums(n);
    std::vector<ExtElement> s(n + 1, ExtElement(n));
    for (int k = 1; k <= n; ++k) s[k] = psum[k].evaluate(cv.classes, n);
    // back: rebuild e_k from s_k
    std::vector<ExtElement> e(n + 1, ExtElement(n));
    e[0] = ExtElement::scalar(n, 1.0);
    for (int k = 1; k <= n; ++k) {
        ExtElement acc(n);
        for (int i = 1; i <= k; ++i) {
            ExtElement t = wedge(e[k - i], s[i]);
            acc += (i % 2 == 1) ? t : -t;
        }
        e[k] = (cplx(1.0) / cplx(double(k))) * acc;
    }
    for (int k = 0; k <= n; ++k) CHECK(distance(e[k], cv.classes[k]) < 1e-10);
}

TEST_CASE("derivative formula: j=1 gives -Tr(U), U=0 gives 0")
{
    std::mt19937 rng(31);
    int n = 2;
    auto omega = random_11_matrix(n, n, rng);
    auto u = random_scalar_matrix(n, n, rng);
    CHECK(distance(chern_directional_derivative(omega, u, 1), -trace(u)) < 1e-14);
    FormMatrix zero(n, n);
    for (int j = 1; j <= n + 1; ++j) CHECK(chern_directional_derivative(omega, zero, j).is_zero());
    CHECK_THROWS_AS(chern_directional_derivative(omega, u, 0), std::invalid_argument);
    CHECK_THROWS_AS(chern_directional_derivative(omega, u, n + 2), std::invalid_argument);
}

TEST_CASE("derivative formula equals the b-finite-difference of the Chern classes")
{
    std::mt19937 rng(37);
    for (int n = 1; n <= 3; ++n) {
        for (int rep = 0; rep < 5; ++rep) {
            auto omega = random_11_matrix(n, n, rng);
            auto u = random_scalar_matrix(n, n, rng);
            for (int j = 1; j <= n; ++j) {
                auto closed = chern_directional_derivative(omega, u, j);
                auto fd = fd_chern_directional_derivative(omega, u, j);
                CHECK(distance(closed, fd) < 1e-8);
            }
        }
    }
    // (1,1)-form U variant
    int n = 2;
    auto omega = random_11_matrix(n, n, rng);
    auto u = random_11_matrix(n, n, rng);
    for (int j = 1; j <= n; ++j)
        CHECK(distance(chern_directional_derivative(omega, u, j), fd_chern_directional_derivative(omega, u, j)) < 1e-8);
}

TEST_CASE("n=2 variational integrand reproduces the explicit 1/48 combination")
{
    std::mt19937 rng(41);
    int n = 2;
    for (int rep = 0; rep < 5; ++rep) {
        auto omega = random_11_matrix(n, n, rng);
        auto u = random_scalar_matrix(n, n, rng);
        auto got = variational_integrand(omega, u, n);

        auto cv = chern_from_curvature(omega);
        FormMatrix ohat = omega * (cplx(1.0) / kTwoPiI);
        ExtElement tr_ou = trace(mat_mul(ohat, u));
        ExtElement tr_u = trace(u);
        ExtElement expect = wedge(tr_ou, cv.classes[1])
                            - wedge(tr_u, cv.classes[2] + wedge(cv.classes[1], cv.classes[1]));
        expect = (cplx(1.0) / cplx(48.0)) * expect;
        CHECK(distance(got, expect) < 1e-10);
    }

    FormMatrix zero(n, n);
    auto omega = random_11_matrix(n, n, rng);
    CHECK(variational_integrand(omega, zero, n).is_zero());
}

TEST_CASE("n=1 variational integrand equals -(1/24) c1 Δψ on torus point data")
{
    // sample point of a conformal torus: curvature K, factor e^{2φ}, laplacian Δψ
    const double K = 0.83, phi = 0.12, delta_psi = 0.37;
    int n = 1;
    ExtElement dv = cplx(0.0, 0.5 * std::exp(2 * phi))
                    * wedge(ExtElement::dz(n, 1), ExtElement::dzbar(n, 1));
    ExtElement c1 = cplx(-2.0 * K / std::numbers::pi) * dv;
    FormMatrix omega(1, n);
    omega(0, 0) = kTwoPiI * c1; // so that chern_from_curvature returns c1
    FormMatrix u(1, n);
    u(0, 0) = ExtElement::scalar(n, -0.5 * delta_psi);

    auto cv = chern_from_curvature(omega);
    CHECK(distance(cv.classes[1], c1) < 1e-14);

    auto got = variational_integrand(omega, u, n);
    ExtElement expect = cplx(-delta_psi / 24.0) * c1;
    CHECK(distance(got, expect) < 1e-12);
}

TEST_CASE("constant holomorphic curvature matrix reproduces the binomial Chern classes")
{
    std::mt19937 rng(43);
    // n = 1 explicit: c1 = 2(-H/2π)ω
    {
        double H = 1.3;
        CMatrix g = CMatrix::Identity(1, 1);
        auto omega = constant_H_curvature(H, g);
        auto w = kahler_form(g);
        auto cv = chern_from_curvature(omega);
        CHECK(distance(cv.classes[1], cplx(2.0 * (-H / (2.0 * std::numbers::pi))) * w) < 1e-12);
    }
    for (int n = 2; n <= 3; ++n) {
        double H = 0.9;
        CMatrix g = CMatrix::Identity(n, n) + random_hermitian_matrix(n, rng, 0.2);
        auto omega = constant_H_curvature(H, g);
        auto w = kahler_form(g);
        auto cv = chern_from_curvature(omega);
        double binom = 1.0;
        ExtElement wj = ExtElement::scalar(n, 1.0);
        for (int j = 1; j <= n; ++j) {
            binom = binom * double(n + 2 - j) / double(j); // C(n+1, j)
            wj = wedge(wj, w);
            ExtElement expect = cplx(binom * std::pow(-H / (2.0 * std::numbers::pi), j)) * wj;
            CHECK(distance(cv.classes[std::size_t(j)], expect) < 1e-10);
        }
    }
    // H = 0 flat
    {
        CMatrix g = CMatrix::Identity(2, 2);
        auto omega = constant_H_curvature(0.0, g);
        auto cv = chern_from_curvature(omega);
        CHECK(cv.classes[1].is_zero());
        CHECK(cv.classes[2].is_zero());
    }
    // non-positive g rejected
    {
        CMatrix g(1, 1);
        g(0, 0) = -1.0;
        CHECK_THROWS_AS(constant_H_curvature(1.0, g), std::invalid_argument);
    }
}

TEST_CASE("trace identity for constant curvature and Hessian variations")
{
    std::mt19937 rng(47);
    for (int n = 1; n <= 3; ++n) {
        double H = 0.7;
        CMatrix g = CMatrix::Identity(n, n) + random_hermitian_matrix(n, rng, 0.15);
        CMatrix hess = random_hermitian_matrix(n, rng);
        auto omega = constant_H_curvature(H, g);
        auto w = kahler_form(g);
        auto u = hessian_variation_matrix(g, hess);
        double delta_phi = -2.0 * trace(u).at(0, 0).real();
        ExtElement ddb = del_delbar(hess);
        for (int j = 1; j <= n; ++j) {
            ExtElement lhs = trace_power_product(omega, j, u);
            ExtElement rhs = curvature_trace_closed_form(j, H, w, delta_phi, ddb);
            CHECK(distance(lhs, rhs) < 1e-10);
        }
        // zero Hessian: both sides vanish
        auto u0 = hessian_variation_matrix(g, CMatrix::Zero(n, n));
        CHECK(trace_power_product(omega, 1, u0).is_zero());
    }
}

TEST_CASE("constant-H integrand decomposes as A Δφ ω^n + B ∂∂̄φ ∧ ω^{n-1}")
{
    std::mt19937 rng(53);
    for (int n = 1; n <= 3; ++n) {
        double H = 0.7;
        auto dec = variational_decomposition(n, H);
        CMatrix g = CMatrix::Identity(n, n);
        auto omega = constant_H_curvature(H, g);
        auto w = kahler_form(g);
        ExtElement wn = ExtElement::scalar(n, 1.0);
        for (int i = 0; i < n; ++i) wn = wedge(wn, w);
        ExtElement wn1 = ExtElement::scalar(n, 1.0);
        for (int i = 0; i + 1 < n; ++i) wn1 = wedge(wn1, w);

        for (int rep = 0; rep < 4; ++rep) {
            CMatrix hess = random_hermitian_matrix(n, rng);
            auto u = hessian_variation_matrix(g, hess);
            double delta_phi = -2.0 * trace(u).at(0, 0).real();
            ExtElement ddb = del_delbar(hess);
            cplx lhs = variational_integrand(omega, u, n).top_coefficient();
            cplx rhs = dec.A * delta_phi * wn.top_coefficient()
                       + dec.B * wedge(ddb, wn1).top_coefficient();
            CHECK(std::abs(lhs - rhs) < 1e-10);
        }

        // symmetric sample set: Hessians in ± pairs integrate to zero
        cplx total(0.0, 0.0);
        for (int rep = 0; rep < 3; ++rep) {
            CMatrix hess = random_hermitian_matrix(n, rng);
            for (double sgn : {1.0, -1.0}) {
                auto u = hessian_variation_matrix(g, sgn * hess);
                total += variational_integrand(omega, u, n).top_coefficient();
            }
        }
        CHECK(std::abs(total) < 1e-10);
    }
}

TEST_CASE("chern classes have pure degree (j,j)")
{
    std::mt19937 rng(59);
    int n = 3;
    auto omega = random_11_matrix(n, n, rng);
    auto cv = chern_from_curvature(omega);
    unsigned full = (1u << n) - 1u;
    for (int j = 0; j <= n; ++j)
        for (unsigned a = 0; a <= full; ++a)
            for (unsigned b = 0; b <= full; ++b)
                if (std::abs(cv.classes[std::size_t(j)].at(a, b)) > 1e-12) {
                    CHECK(std::popcount(a) == j);
                    CHECK(std::popcount(b) == j);
                }
}
