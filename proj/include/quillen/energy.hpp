#pragma once

// K-energy along paths in the space of Kahler potentials, and the relative
// Q_L energy it integrates to.
//
//     k_energy(path) = ∫0^1 ∫ ψ̇_u (s_u - s̄) dv_u du
//
// The functional difference is path-independent (verified, not assumed: the
// cocycle and two-path checks live in the tests and the acceptance suite), so
// the straight line ψ_u = (1-u)ψ0 + u ψ1 is the default route; straight lines
// stay admissible because e^{2φ_u} = (1-u) h0 + u h1 is a convex combination.
//
//     relative_qL(g, base) = c_n k_energy(base -> g),  c_n = 2 A  (n = 1)
//
// is <= 0 with equality at the flat metric, the energy counterpart of the
// gradient flows in flow.hpp: along ψ̇ = s - s̄ the accumulated decay channel
// equals k_energy of the traversed path.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "quillen/torus.hpp"

namespace quillen {

struct PathEnergy {
    double value = 0.0;
    double quadrature_error = 0.0; // |composite GL - half-resolution GL|
    int panels = 0;
};

namespace detail {

// ∫ ψ̇ (s - s̄) dv at the metric of ψ
inline double k_energy_integrand(const ConformalTorus& base, const Field& psi,
                                 const Field& psidot)
{
    ConformalTorus m = potential_to_conformal({base, psi});
    Field s = lap0(m.shape, m.phi);
    const std::size_t n = s.size();
    Field e2(n);
    double a = 0.0, sint = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        e2[i] = std::exp(2.0 * m.phi[i]);
        s[i] *= 2.0 / e2[i];
        a += e2[i];
        sint += s[i] * e2[i];
    }
    const double sbar = sint / a;
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += psidot[i] * (s[i] - sbar) * e2[i];
    return v * m.shape.A0() / double(n);
}

// composite 4-node Gauss-Legendre over [0,1]
template <class PathFn>
inline double gl_integral(const ConformalTorus& base, PathFn&& path, int panels)
{
    static constexpr double node[2] = {0.3399810435848563, 0.8611363115940526};
    static constexpr double wght[2] = {0.6521451548625461, 0.3478548451374538};
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = double(p) / panels, hi = double(p + 1) / panels;
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (int j = 0; j < 2; ++j)
            for (double sgn : {-1.0, 1.0}) {
                const double u = mid + sgn * half * node[j];
                auto [psi, psidot] = path(u);
                total += wght[j] * half * k_energy_integrand(base, psi, psidot);
            }
    }
    return total;
}

} // namespace detail

// path(u) must return {ψ(u), dψ/du(u)}
template <class PathFn>
inline PathEnergy k_energy_path(const ConformalTorus& base, PathFn&& path, int panels = 8)
{
    base.shape.validate();
    if (panels < 2 || panels % 2 != 0)
        throw std::invalid_argument("k_energy_path: panels must be even and >= 2");
    PathEnergy e;
    e.panels = panels;
    e.value = detail::gl_integral(base, path, panels);
    const double coarse = detail::gl_integral(base, path, panels / 2);
    e.quadrature_error = std::abs(e.value - coarse);
    return e;
}

// straight line between two potentials over the same base
inline PathEnergy k_energy(const ConformalTorus& base, const Field& psi_from,
                           const Field& psi_to, int panels = 8)
{
    if (psi_from.size() != base.shape.size() || psi_to.size() != base.shape.size())
        throw std::invalid_argument("k_energy: field size mismatch");
    Field dot(psi_from.size());
    for (std::size_t i = 0; i < dot.size(); ++i) dot[i] = psi_to[i] - psi_from[i];
    auto path = [&](double u) {
        Field psi(psi_from.size());
        for (std::size_t i = 0; i < psi.size(); ++i)
            psi[i] = (1.0 - u) * psi_from[i] + u * psi_to[i];
        return std::pair<Field, Field>(std::move(psi), dot);
    };
    return k_energy_path(base, path, panels);
}

// K(a->b) + K(b->c) - K(a->c); zero for an exact functional difference
inline double k_energy_cocycle_defect(const ConformalTorus& base, const Field& a, const Field& b,
                                      const Field& c, int panels, double& quadrature_error)
{
    PathEnergy ab = k_energy(base, a, b, panels);
    PathEnergy bc = k_energy(base, b, c, panels);
    PathEnergy ac = k_energy(base, a, c, panels);
    quadrature_error = ab.quadrature_error + bc.quadrature_error + ac.quadrature_error;
    return ab.value + bc.value - ac.value;
}

struct RelativeQl {
    double value = 0.0;
    double quadrature_error = 0.0;
};

// c_n k_energy(base -> g) with c_n = κ_2 (n+1) 2^{n-1} = 2 A at n = 1;
// requires g in the Kahler class of base (equal areas)
inline RelativeQl relative_qL(const ConformalTorus& g, const ConformalTorus& base,
                              int panels = 8)
{
    KahlerPotential p = conformal_to_potential(g, base);
    Field zero(base.shape.size(), 0.0);
    PathEnergy e = k_energy(base, zero, p.psi, panels);
    const double c = 2.0 * area(base);
    return {c * e.value, c * e.quadrature_error};
}

// ||s - s̄||_{L²(dv)}, the stationarity residual of the Q_L gradient flow
inline double critical_point_residual(const ConformalTorus& m)
{
    Field s = scalar_curvature(m);
    const double sbar = integral_dv(m, s) / area(m);
    Field d(s.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (s[i] - sbar) * (s[i] - sbar);
    return std::sqrt(integral_dv(m, d));
}

} // namespace quillen
