#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "quillen/energy.hpp"
#include "quillen/flow.hpp"

#include <cmath>
#include <numbers>

using namespace quillen;

namespace {

constexpr double kPi = std::numbers::pi;

Field cos_x_mode(const TorusShape& s, double amp)
{
    Field f(s.size());
    for (int iy = 0; iy < s.N; ++iy)
        for (int ix = 0; ix < s.N; ++ix)
            f[std::size_t(iy) * s.N + ix] = amp * std::cos(2.0 * kPi * ix / s.N);
    return f;
}

// random potential rescaled so sup |Δ0 ψ| hits a target margin below 1
Field scaled_potential(const TorusShape& s, int kmax, double target_sup_lap, unsigned seed)
{
    Field raw = random_band_limited(s, kmax, 1.0, seed);
    const double m = sup_norm(lap0(s, raw));
    for (auto& v : raw) v *= target_sup_lap / m;
    return raw;
}

double quadratic_oracle(const TorusShape& s, const Field& psi)
{
    Field lp = lap0(s, psi);
    for (auto& v : lp) v *= v;
    return -0.5 * integral_dA0(s, lp);
}

} // namespace

TEST_CASE("small-amplitude k-energy matches the quadratic expansion")
{
    TorusShape s{0.0, 1.0, 32};
    ConformalTorus flat = ConformalTorus::flat(s);
    Field zero(s.size(), 0.0);

    SUBCASE("single mode, analytic value")
    {
        // ψ = ε cos 2πx: -(1/2)∫(Δ0ψ)² dA0 = -4π⁴ε²
        const double eps = 1e-3;
        PathEnergy e = k_energy(flat, zero, cos_x_mode(s, eps));
        const double oracle = -4.0 * std::pow(kPi, 4) * eps * eps;
        CHECK(std::abs(e.value - oracle) < 0.05 * std::abs(oracle));
        CHECK(e.quadrature_error < 1e-10);

        // leading correction is O(ε): quarter the amplitude, error shrinks ~4x
        const double eps2 = eps / 4.0;
        PathEnergy e2 = k_energy(flat, zero, cos_x_mode(s, eps2));
        const double oracle2 = -4.0 * std::pow(kPi, 4) * eps2 * eps2;
        const double rel1 = std::abs(e.value - oracle) / std::abs(oracle);
        const double rel2 = std::abs(e2.value - oracle2) / std::abs(oracle2);
        CHECK(rel2 < 0.5 * rel1);
    }

    SUBCASE("random band-limited field")
    {
        Field psi = scaled_potential(s, 2, 0.02, 11);
        PathEnergy e = k_energy(flat, zero, psi);
        const double oracle = quadratic_oracle(s, psi);
        CHECK(std::abs(e.value - oracle) < 0.05 * std::abs(oracle));
    }
}

TEST_CASE("k-energy is independent of the path between fixed endpoints")
{
    TorusShape s{0.5, 1.0, 32};
    ConformalTorus flat = ConformalTorus::flat(s);
    Field zero(s.size(), 0.0);
    Field psi1 = scaled_potential(s, 2, 0.3, 21);
    Field bump = scaled_potential(s, 1, 0.2, 22);

    PathEnergy straight = k_energy(flat, zero, psi1);

    // detour ψ(u) = u ψ1 + u(1-u) χ; stays admissible: |Δψ| <= 0.3 + 0.05
    auto detour = [&](double u) {
        Field psi(s.size()), dot(s.size());
        for (std::size_t i = 0; i < psi.size(); ++i) {
            psi[i] = u * psi1[i] + u * (1.0 - u) * bump[i];
            dot[i] = psi1[i] + (1.0 - 2.0 * u) * bump[i];
        }
        return std::pair<Field, Field>(std::move(psi), std::move(dot));
    };
    PathEnergy curved = k_energy_path(flat, detour);

    const double tol =
        std::max(3.0 * (straight.quadrature_error + curved.quadrature_error), 1e-10);
    CHECK(std::abs(straight.value - curved.value) < tol);
    CHECK(std::abs(straight.value) > 1e-4); // non-vacuous
}

TEST_CASE("cocycle identity over three potentials")
{
    TorusShape s{0.0, 1.0, 32};
    ConformalTorus flat = ConformalTorus::flat(s);
    Field a = scaled_potential(s, 2, 0.25, 31);
    Field b = scaled_potential(s, 2, 0.30, 32);
    Field c = scaled_potential(s, 1, 0.20, 33);

    double qe = 0.0;
    const double defect = k_energy_cocycle_defect(flat, a, b, c, 8, qe);
    CHECK(std::abs(defect) < std::max(3.0 * qe, 1e-10));
}

TEST_CASE("grid translation and mean shift leave k-energy unchanged")
{
    TorusShape s{0.3, 0.9, 32};
    ConformalTorus flat = ConformalTorus::flat(s);
    Field zero(s.size(), 0.0);
    Field a = scaled_potential(s, 2, 0.2, 41);
    Field b = scaled_potential(s, 2, 0.3, 42);

    PathEnergy ref = k_energy(flat, a, b);

    SUBCASE("translation")
    {
        PathEnergy moved = k_energy(flat, translate_grid(a, s.N, 5, 11),
                                    translate_grid(b, s.N, 5, 11));
        CHECK(std::abs(moved.value - ref.value) < 1e-10);
    }

    SUBCASE("mean shift of one endpoint")
    {
        Field b_shift = b;
        for (auto& v : b_shift) v += 0.37;
        PathEnergy shifted = k_energy(flat, a, b_shift);
        CHECK(std::abs(shifted.value - ref.value) < 1e-12);
    }
}

TEST_CASE("reparameterizing the path does not change the energy")
{
    TorusShape s{0.0, 1.0, 32};
    ConformalTorus flat = ConformalTorus::flat(s);
    Field zero(s.size(), 0.0);
    Field psi1 = scaled_potential(s, 2, 0.3, 51);

    PathEnergy plain = k_energy(flat, zero, psi1);

    // σ(u) = u²(3-2u) fixes endpoints, σ' = 6u(1-u)
    auto warped = [&](double u) {
        const double sig = u * u * (3.0 - 2.0 * u);
        const double dsig = 6.0 * u * (1.0 - u);
        Field psi(s.size()), dot(s.size());
        for (std::size_t i = 0; i < psi.size(); ++i) {
            psi[i] = sig * psi1[i];
            dot[i] = dsig * psi1[i];
        }
        return std::pair<Field, Field>(std::move(psi), std::move(dot));
    };
    PathEnergy rep = k_energy_path(flat, warped);

    const double tol = std::max(3.0 * (plain.quadrature_error + rep.quadrature_error), 1e-10);
    CHECK(std::abs(plain.value - rep.value) < tol);
}

TEST_CASE("derivative of k-energy equals the curvature pairing")
{
    TorusShape s{0.0, 1.0, 32};
    ConformalTorus flat = ConformalTorus::flat(s);
    Field zero(s.size(), 0.0);
    Field psi1 = scaled_potential(s, 2, 0.35, 61);

    auto at = [&](double u) {
        Field psi(s.size());
        for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = u * psi1[i];
        return psi;
    };
    const double u0 = 0.6, h = 0.05;
    const double fd = (k_energy(flat, zero, at(u0 + h)).value -
                       k_energy(flat, zero, at(u0 - h)).value) /
                      (2.0 * h);
    const double pairing = detail::k_energy_integrand(flat, at(u0), psi1);
    CHECK(std::abs(fd - pairing) < 0.01 * std::abs(pairing));
}

TEST_CASE("relative qL energy is nonpositive and vanishes only at flat")
{
    TorusShape s{0.0, 1.0, 32};
    ConformalTorus flat = ConformalTorus::flat(s);

    for (unsigned seed : {71u, 72u, 73u, 74u, 75u}) {
        Field psi = scaled_potential(s, 2, 0.1 + 0.05 * (seed - 70u), seed);
        ConformalTorus m = potential_to_conformal({flat, psi});
        RelativeQl r = relative_qL(m, flat);
        CHECK(r.value < -10.0 * r.quadrature_error);
        CHECK(critical_point_residual(m) > 1e-3);
    }

    RelativeQl self = relative_qL(flat, flat);
    CHECK(self.value == 0.0);
    CHECK(critical_point_residual(flat) < 1e-10);

    // different area -> outside the class
    ConformalTorus scaled = flat;
    for (auto& v : scaled.phi) v = 0.1;
    CHECK_THROWS_AS(relative_qL(scaled, flat), AreaMismatchError);
}

TEST_CASE("k-energy across a qL flow segment equals the accumulated decay")
{
    TorusShape s{0.0, 1.0, 32};
    ConformalTorus flat = ConformalTorus::flat(s);
    Field psi0 = scaled_potential(s, 2, 0.4, 81);

    FlowConfig cfg;
    cfg.t_end = 2e-3;
    cfg.records = 16;
    FlowResult fl = qL_gradient_flow(flat, psi0, cfg);
    REQUIRE(fl.outcome == FlowOutcome::reached_t_end);
    const double cum = fl.trace.back().cum_decay;
    REQUIRE(cum > 1e-3); // flow actually moved

    PathEnergy direct = k_energy(flat, psi0, fl.terminal_psi);
    CHECK(std::abs(direct.value - cum) <
          0.02 * cum + 3.0 * direct.quadrature_error);

    // μ relative to flat decreases along the flow by exactly that amount
    PathEnergy from_flat0 = k_energy(flat, Field(s.size(), 0.0), psi0);
    PathEnergy from_flatT = k_energy(flat, Field(s.size(), 0.0), fl.terminal_psi);
    const double mu0 = -from_flat0.value, muT = -from_flatT.value;
    CHECK(mu0 > 0.0);
    CHECK(muT < mu0);
    CHECK(std::abs((mu0 - muT) - cum) <
          0.02 * cum + 3.0 * (from_flat0.quadrature_error + from_flatT.quadrature_error));
}

TEST_CASE("argument validation")
{
    TorusShape s{0.0, 1.0, 16};
    ConformalTorus flat = ConformalTorus::flat(s);
    Field zero(s.size(), 0.0);
    CHECK_THROWS_AS(k_energy(flat, zero, Field(10, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(k_energy(flat, zero, zero, 3), std::invalid_argument);

    // inadmissible endpoint surfaces as AdmissibilityError from the node metric
    Field big = cos_x_mode(s, 1.0); // Δ0ψ peaks at 4π² >> 1
    CHECK_THROWS_AS(k_energy(flat, zero, big), AdmissibilityError);
}
