#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "quillen/torus.hpp"

#include <cmath>
#include <numbers>

using namespace quillen;

namespace {

constexpr double kPi = std::numbers::pi;

Field cos_mode(const TorusShape& s, int p, int q, double amp)
{
    Field f(s.size());
    for (int iy = 0; iy < s.N; ++iy)
        for (int ix = 0; ix < s.N; ++ix) {
            double x = double(ix) / s.N, y = double(iy) / s.N;
            f[std::size_t(iy) * s.N + ix] = amp * std::cos(2.0 * kPi * (p * x + q * y));
        }
    return f;
}

// fourth-order finite differences on the periodic grid, combined through the
// flat inverse metric in (x,y) coordinates:
//   lap0 f = -(1/b^2) (|tau|^2 f_xx - 2a f_xy + f_yy)
double fd_lap0_at(const TorusShape& s, const Field& f, int ix, int iy)
{
    const int N = s.N;
    auto at = [&](int jx, int jy) {
        return f[std::size_t((jy % N + N) % N) * N + ((jx % N + N) % N)];
    };
    const double h = 1.0 / N;
    auto d2x = [&](int jx, int jy) {
        return (-at(jx + 2, jy) + 16 * at(jx + 1, jy) - 30 * at(jx, jy) + 16 * at(jx - 1, jy)
                - at(jx - 2, jy))
               / (12 * h * h);
    };
    auto d2y = [&](int jx, int jy) {
        return (-at(jx, jy + 2) + 16 * at(jx, jy + 1) - 30 * at(jx, jy) + 16 * at(jx, jy - 1)
                - at(jx, jy - 2))
               / (12 * h * h);
    };
    auto d1x = [&](int jx, int jy) {
        return (-at(jx + 2, jy) + 8 * at(jx + 1, jy) - 8 * at(jx - 1, jy) + at(jx - 2, jy))
               / (12 * h);
    };
    auto dxy = [&](int jx, int jy) {
        return (-d1x(jx, jy + 2) + 8 * d1x(jx, jy + 1) - 8 * d1x(jx, jy - 1) + d1x(jx, jy - 2))
               / (12 * h);
    };
    const double a = s.tau_re, b = s.tau_im;
    const double t2 = a * a + b * b;
    return -(t2 * d2x(ix, iy) - 2.0 * a * dxy(ix, iy) + d2y(ix, iy)) / (b * b);
}

} // namespace

TEST_CASE("shape validation")
{
    CHECK_THROWS_AS((TorusShape{0.0, 1.0, 30}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((TorusShape{0.0, 1.0, 4}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((TorusShape{0.0, -1.0, 32}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((TorusShape{0.0, 0.0, 32}.validate()), std::invalid_argument);
    CHECK_NOTHROW((TorusShape{0.5, 1.0, 8}.validate()));
    CHECK((TorusShape{0.5, 2.0, 16}.A0()) == doctest::Approx(2.0));
}

TEST_CASE("flat Laplacian is exact on Fourier modes")
{
    TorusShape s{0.5, 1.0, 32};
    for (auto [p, q] : {std::pair{1, 0}, {0, 1}, {2, -3}, {-5, 4}}) {
        Field f = cos_mode(s, p, q, 1.0);
        Field lf = lap0(s, f);
        const double lam = lap0_symbol(s, p, q);
        double err = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i)
            err = std::max(err, std::abs(lf[i] - lam * f[i]));
        CHECK(err < 1e-10);
    }
    // symbol cross-check against |q - p tau|^2 / (Im tau)^2
    const double lam = lap0_symbol(s, 2, -3);
    const std::complex<double> w = -3.0 - 2.0 * s.tau();
    CHECK(lam == doctest::Approx(4.0 * kPi * kPi * std::norm(w) / (s.tau_im * s.tau_im))
                     .epsilon(1e-14));
}

TEST_CASE("mean-zero Poisson inverse round trip")
{
    TorusShape s{-0.3, 0.8, 32};
    Field f = random_band_limited(s, 4, 1.0, 11);
    Field u = inv_lap0(s, f);
    CHECK(std::abs(grid_mean(u)) < 1e-12);
    Field lf = lap0(s, u);
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        err = std::max(err, std::abs(lf[i] - (f[i] - grid_mean(f))));
    CHECK(err < 1e-10);
}

TEST_CASE("gradient symbols and integration by parts")
{
    TorusShape s{0.4, 1.3, 32};
    Field f = cos_mode(s, 1, 0, 1.0);
    auto [gx, gy] = grad0(s, f);
    double err = 0.0;
    for (int iy = 0; iy < s.N; ++iy)
        for (int ix = 0; ix < s.N; ++ix) {
            double x = double(ix) / s.N;
            double ex = -2.0 * kPi * std::sin(2.0 * kPi * x);
            double ey = ex * (-s.tau_re / s.tau_im);
            std::size_t i = std::size_t(iy) * s.N + ix;
            err = std::max({err, std::abs(gx[i] - ex), std::abs(gy[i] - ey)});
        }
    CHECK(err < 1e-10);

    // ∫ |grad f|^2 dA0 = ∫ f lap0 f dA0 for band-limited data
    Field r = random_band_limited(s, 6, 0.7, 3);
    auto [rx, ry] = grad0(s, r);
    Field g2(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) g2[i] = rx[i] * rx[i] + ry[i] * ry[i];
    Field lr = lap0(s, r);
    Field flf(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) flf[i] = r[i] * lr[i];
    double lhs = integral_dA0(s, g2), rhs = integral_dA0(s, flf);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
}

TEST_CASE("Gauss curvature of a single-mode conformal factor")
{
    TorusShape s{0.0, 1.0, 64};
    const double eps = 0.01;
    ConformalTorus m{s, cos_mode(s, 1, 0, eps)};
    Field k = gauss_curvature(m);
    double err = 0.0;
    for (int iy = 0; iy < s.N; ++iy)
        for (int ix = 0; ix < s.N; ++ix) {
            double x = double(ix) / s.N;
            double phi = eps * std::cos(2.0 * kPi * x);
            double expect = std::exp(-2.0 * phi) * 4.0 * kPi * kPi * phi;
            err = std::max(err, std::abs(k[std::size_t(iy) * s.N + ix] - expect));
        }
    CHECK(err < 1e-12);
}

TEST_CASE("Gauss curvature matches a finite-difference oracle")
{
    TorusShape s{0.3, 0.8, 128};
    ConformalTorus m{s, random_band_limited(s, 1, 0.01, 5)};
    Field k = gauss_curvature(m);
    for (auto [ix, iy] :
         {std::pair{0, 0}, {17, 40}, {99, 3}, {64, 64}, {5, 120}, {111, 77}, {42, 58}}) {
        double fd = std::exp(-2.0 * m.phi[std::size_t(iy) * s.N + ix]) * fd_lap0_at(s, m.phi, ix, iy);
        CHECK(std::abs(k[std::size_t(iy) * s.N + ix] - fd) < 1e-6);
    }
}

TEST_CASE("Gauss-Bonnet and vanishing mean scalar curvature")
{
    TorusShape s{0.2, 1.1, 32};
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        ConformalTorus m{s, random_band_limited(s, 4, 0.3, seed)};
        CHECK(std::abs(integral_dv(m, gauss_curvature(m))) < 1e-8);
        CHECK(std::abs(average_scalar_curvature(m)) < 1e-8);
    }
}

TEST_CASE("curvature scaling under constant conformal shift")
{
    TorusShape s{0.0, 1.0, 32};
    ConformalTorus m{s, random_band_limited(s, 3, 0.2, 9)};
    const double c = 0.35;
    ConformalTorus mc = m;
    for (double& v : mc.phi) v += c;
    Field k = gauss_curvature(m), kc = gauss_curvature(mc);
    double err = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i)
        err = std::max(err, std::abs(kc[i] - std::exp(-2.0 * c) * k[i]));
    CHECK(err < 1e-12);
    CHECK(area(mc) == doctest::Approx(std::exp(2.0 * c) * area(m)).epsilon(1e-12));
}

TEST_CASE("potential bridge: round trips and area preservation")
{
    TorusShape s{0.1, 0.9, 32};
    ConformalTorus base = ConformalTorus::flat(s);

    Field psi = random_band_limited(s, 2, 1.0, 21);
    double scale = 0.5 / sup_norm(lap0(s, psi));
    for (double& v : psi) v *= scale;

    KahlerPotential p{base, psi};
    ConformalTorus m = potential_to_conformal(p);
    CHECK(std::abs(area(m) - area(base)) < 1e-10 * area(base));

    KahlerPotential p2 = conformal_to_potential(m, base);
    double err = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) err = std::max(err, std::abs(p2.psi[i] - psi[i]));
    CHECK(err < 1e-10);

    ConformalTorus m2 = potential_to_conformal(p2);
    err = 0.0;
    for (std::size_t i = 0; i < m.phi.size(); ++i)
        err = std::max(err, std::abs(m2.phi[i] - m.phi[i]));
    CHECK(err < 1e-8);

    // stacking a second potential on a non-flat base
    Field psi2 = random_band_limited(s, 2, 1.0, 22);
    scale = 0.3 / sup_norm(lap0(s, psi2));
    for (double& v : psi2) v *= scale;
    ConformalTorus m3 = potential_to_conformal({m, psi2});
    CHECK(std::abs(area(m3) - area(base)) < 1e-10 * area(base));
    KahlerPotential p3 = conformal_to_potential(m3, m);
    err = 0.0;
    for (std::size_t i = 0; i < psi2.size(); ++i)
        err = std::max(err, std::abs(p3.psi[i] - psi2[i]));
    CHECK(err < 1e-10);
}

TEST_CASE("potential bridge rejections")
{
    TorusShape s{0.0, 1.0, 32};
    ConformalTorus base = ConformalTorus::flat(s);

    Field psi = random_band_limited(s, 2, 1.0, 31);
    double scale = 1.4 / sup_norm(lap0(s, psi)); // pushes min(1 - lap0 psi) below zero
    for (double& v : psi) v *= scale;
    double expect_min = 1e300;
    Field lp = lap0(s, psi);
    for (double v : lp) expect_min = std::min(expect_min, 1.0 - v);
    REQUIRE(expect_min <= 0.0);

    CHECK_THROWS_AS(potential_to_conformal({base, psi}), AdmissibilityError);
    try {
        potential_to_conformal({base, psi});
    } catch (const AdmissibilityError& e) {
        CHECK(e.min_value == doctest::Approx(expect_min).epsilon(1e-10));
    }

    ConformalTorus scaled = base;
    for (double& v : scaled.phi) v += 0.05; // area e^{0.1} A0, outside the class
    CHECK_THROWS_AS(conformal_to_potential(scaled, base), AreaMismatchError);
}

TEST_CASE("spectral resampling round trip and commutation with lap0")
{
    TorusShape s{0.25, 1.2, 32};
    Field f = random_band_limited(s, 2, 0.8, 41);
    Field up = resample(s, f, 64);
    TorusShape s64 = s;
    s64.N = 64;
    Field back = resample(s64, up, 32);
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(back[i] - f[i]));
    CHECK(err < 1e-12);

    Field l_up = lap0(s64, up);
    Field l_dn = resample(s64, l_up, 32);
    Field l32 = lap0(s, f);
    err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(l_dn[i] - l32[i]));
    CHECK(err < 1e-10);
}

TEST_CASE("band-limited random fields: determinism, normalization, band bound")
{
    TorusShape s{0.0, 1.0, 32};
    Field a = random_band_limited(s, 4, 0.2, 77);
    Field b = random_band_limited(s, 4, 0.2, 77);
    CHECK(a == b);
    Field c = random_band_limited(s, 4, 0.2, 78);
    CHECK(sup_norm(c) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(std::abs(grid_mean(c)) < 1e-14);
    CHECK_THROWS_AS(random_band_limited(s, 9, 0.2, 1), std::invalid_argument);

    // kmax <= N/4 means downsampling to N/2 keeps the field exactly
    Field dn = resample(s, c, 16);
    TorusShape s16 = s;
    s16.N = 16;
    Field up = resample(s16, dn, 32);
    double err = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) err = std::max(err, std::abs(up[i] - c[i]));
    CHECK(err < 1e-13);
}

TEST_CASE("grid translation commutes with lap0")
{
    TorusShape s{0.6, 0.7, 32};
    Field f = random_band_limited(s, 4, 1.0, 55);
    Field tf = translate_grid(f, s.N, 5, -9);
    Field a = lap0(s, tf);
    Field b = translate_grid(lap0(s, f), s.N, 5, -9);
    double err = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) err = std::max(err, std::abs(a[i] - b[i]));
    CHECK(err < 1e-11);
}

TEST_CASE("metric ids distinguish shape and field")
{
    TorusShape s{0.0, 1.0, 32};
    ConformalTorus m1 = ConformalTorus::flat(s);
    ConformalTorus m2{s, random_band_limited(s, 2, 0.1, 13)};
    CHECK(metric_id(m1) != metric_id(m2));
    CHECK(metric_id(m1) == metric_id(ConformalTorus::flat(s)));
    CHECK(metric_id(m1).size() == 16);
    TorusShape s2 = s;
    s2.N = 64;
    CHECK(metric_id(ConformalTorus::flat(s2)) != metric_id(m1));
}
