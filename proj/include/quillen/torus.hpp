#pragma once

// Discretized conformal geometry on a flat complex torus. The fundamental
// domain is (x,y) in [0,1)^2 with z = x + tau*y, base metric |dz|^2, base
// area A0 = Im tau, cell measure dA0 = A0/N^2. Fields are real N x N grids,
// row-major with index iy*N + ix.
//
// All derivatives are spectral (exact for band-limited data): the mode
// e^{2πi(px+qy)} is an eigenfunction of the nonnegative flat Laplacian
// Delta_0 = d*d with eigenvalue lambda(p,q) = 4π^2 |q - p*tau|^2 / (Im tau)^2.
//
// Conventions fixed here and used by every downstream module:
//   metric g = e^{2φ} |dz|^2, volume dv = e^{2φ} dA0,
//   Gauss curvature K = e^{-2φ} Delta_0 φ, scalar curvature s = 2K,
//   s0 = 4πχ/A = 0 on the torus.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

namespace quillen {

using Field = std::vector<double>;

struct TorusShape {
    double tau_re = 0.0;
    double tau_im = 1.0;
    int N = 32;

    void validate() const
    {
        if (!(tau_im > 0.0)) throw std::invalid_argument("TorusShape: Im tau must be positive");
        if (N < 8 || (N & (N - 1)) != 0)
            throw std::invalid_argument("TorusShape: N must be a power of two, N >= 8");
    }
    double A0() const { return tau_im; }
    std::complex<double> tau() const { return {tau_re, tau_im}; }
    std::size_t size() const { return std::size_t(N) * N; }
    bool operator==(const TorusShape& o) const
    {
        return tau_re == o.tau_re && tau_im == o.tau_im && N == o.N;
    }
};

struct ConformalTorus {
    TorusShape shape;
    Field phi; // conformal factor exponent, g = e^{2φ}·base

    static ConformalTorus flat(const TorusShape& s)
    {
        s.validate();
        return {s, Field(s.size(), 0.0)};
    }
};

struct KahlerPotential {
    ConformalTorus base;
    Field psi; // mean-zero potential; admissible iff e^{2φ_base} - Δ0 ψ > 0
};

class AdmissibilityError : public std::runtime_error {
public:
    explicit AdmissibilityError(double min_value)
        : std::runtime_error("admissibility lost: min(e^{2phi_base} - lap0 psi) = "
                             + std::to_string(min_value)),
          min_value(min_value)
    {
    }
    double min_value;
};

class AreaMismatchError : public std::runtime_error {
public:
    AreaMismatchError(double got, double want)
        : std::runtime_error("metric outside the Kahler class: area " + std::to_string(got)
                             + " vs base " + std::to_string(want)),
          got(got), want(want)
    {
    }
    double got, want;
};

// ------------------------------------------------------------------ fft core

namespace detail {

// cached forward/backward complex 2D plans per grid size; FFTW_ESTIMATE keeps
// planning deterministic, a mutex serializes use of the shared buffers
class Fft2 {
public:
    static Fft2& get(int N)
    {
        static std::mutex reg_mu;
        static std::map<int, std::unique_ptr<Fft2>> reg;
        std::lock_guard<std::mutex> lk(reg_mu);
        auto& slot = reg[N];
        if (!slot) slot = std::unique_ptr<Fft2>(new Fft2(N));
        return *slot;
    }

    // real field -> full complex spectrum (unnormalized)
    void forward(const Field& in, std::vector<std::complex<double>>& out)
    {
        std::lock_guard<std::mutex> lk(mu_);
        for (std::size_t i = 0; i < n2_; ++i) {
            buf_[i][0] = in[i];
            buf_[i][1] = 0.0;
        }
        fftw_execute(fwd_);
        out.resize(n2_);
        for (std::size_t i = 0; i < n2_; ++i) out[i] = {spec_[i][0], spec_[i][1]};
    }

    // complex spectrum -> real field, normalized by 1/N^2 (imag part discarded)
    void inverse(const std::vector<std::complex<double>>& in, Field& out)
    {
        std::lock_guard<std::mutex> lk(mu_);
        for (std::size_t i = 0; i < n2_; ++i) {
            spec_[i][0] = in[i].real();
            spec_[i][1] = in[i].imag();
        }
        fftw_execute(bwd_);
        out.resize(n2_);
        const double norm = 1.0 / double(n2_);
        for (std::size_t i = 0; i < n2_; ++i) out[i] = buf_[i][0] * norm;
    }

    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;

private:
    explicit Fft2(int N) : n_(N), n2_(std::size_t(N) * N)
    {
        buf_ = fftw_alloc_complex(n2_);
        spec_ = fftw_alloc_complex(n2_);
        fwd_ = fftw_plan_dft_2d(N, N, buf_, spec_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(N, N, spec_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }

    int n_;
    std::size_t n2_;
    fftw_complex* buf_;
    fftw_complex* spec_;
    fftw_plan fwd_;
    fftw_plan bwd_;
    std::mutex mu_;
};

inline int freq_of(int k, int N) { return (k <= N / 2 - 1) ? k : k - N; }

} // namespace detail

// flat Laplacian symbol at integer mode (p,q): 4π^2 |q - p tau|^2 / (Im tau)^2
inline double lap0_symbol(const TorusShape& s, int p, int q)
{
    const double a = s.tau_re, b = s.tau_im;
    const double u = double(q) - double(p) * a;
    const double c = 4.0 * std::numbers::pi * std::numbers::pi;
    return c * (u * u / (b * b) + double(p) * double(p));
}

inline double lap0_symbol_max(const TorusShape& s)
{
    double m = 0.0;
    for (int p = -s.N / 2; p < s.N / 2; ++p)
        for (int q = -s.N / 2; q < s.N / 2; ++q) m = std::max(m, lap0_symbol(s, p, q));
    return m;
}

// smallest flat symbol among modes just outside the DFT band; bounds the first
// continuum eigenvalue the discretization cannot represent
inline double lap0_symbol_band_missing(const TorusShape& s)
{
    double m = std::numeric_limits<double>::infinity();
    const int B = s.N / 2;
    for (int p = -B - 1; p <= B; ++p)
        for (int q = -B - 1; q <= B; ++q) {
            bool inside = (p >= -B && p < B && q >= -B && q < B);
            if (!inside) m = std::min(m, lap0_symbol(s, p, q));
        }
    return m;
}

namespace detail {

// multiply spectrum by a real symbol sym(p,q)
template <class Sym>
inline Field apply_symbol(const TorusShape& s, const Field& f, Sym&& sym)
{
    auto& fft = Fft2::get(s.N);
    std::vector<std::complex<double>> spec;
    fft.forward(f, spec);
    const int N = s.N;
    for (int ky = 0; ky < N; ++ky)
        for (int kx = 0; kx < N; ++kx) {
            int q = freq_of(ky, N), p = freq_of(kx, N);
            spec[std::size_t(ky) * N + kx] *= sym(p, q);
        }
    Field out;
    fft.inverse(spec, out);
    return out;
}

} // namespace detail

inline Field lap0(const TorusShape& s, const Field& f)
{
    return detail::apply_symbol(s, f, [&](int p, int q) { return lap0_symbol(s, p, q); });
}

// mean-zero solution of lap0 u = f - mean(f)
inline Field inv_lap0(const TorusShape& s, const Field& f)
{
    return detail::apply_symbol(s, f, [&](int p, int q) {
        double l = lap0_symbol(s, p, q);
        return (p == 0 && q == 0) ? 0.0 : 1.0 / l;
    });
}

// euclidean-frame first derivatives (X = x + Re(tau) y, Y = Im(tau) y);
// the unmatched Nyquist row is zeroed in odd symbols
inline std::pair<Field, Field> grad0(const TorusShape& s, const Field& f)
{
    auto& fft = detail::Fft2::get(s.N);
    std::vector<std::complex<double>> spec, sx, sy;
    fft.forward(f, spec);
    const int N = s.N;
    sx = spec;
    sy = spec;
    const double twopi = 2.0 * std::numbers::pi;
    for (int ky = 0; ky < N; ++ky)
        for (int kx = 0; kx < N; ++kx) {
            int q = detail::freq_of(ky, N), p = detail::freq_of(kx, N);
            std::size_t i = std::size_t(ky) * N + kx;
            bool nyq_x = (kx == N / 2), nyq_y = (ky == N / 2);
            double wx = (nyq_x) ? 0.0 : twopi * p;
            double wy = (nyq_x || nyq_y) ? 0.0 : twopi * (q - p * s.tau_re) / s.tau_im;
            if (nyq_y && !nyq_x) wy = 0.0;
            sx[i] *= std::complex<double>(0.0, wx);
            sy[i] *= std::complex<double>(0.0, wy);
        }
    Field gx, gy;
    fft.inverse(sx, gx);
    fft.inverse(sy, gy);
    return {gx, gy};
}

// --------------------------------------------------------------- field utils

inline double grid_mean(const Field& f)
{
    double s = 0.0;
    for (double v : f) s += v;
    return s / double(f.size());
}

inline double sup_norm(const Field& f)
{
    double m = 0.0;
    for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

// ∫ f dA0 (exact for band-limited integrands)
inline double integral_dA0(const TorusShape& s, const Field& f)
{
    return s.A0() * grid_mean(f);
}

inline double area(const ConformalTorus& m)
{
    double s = 0.0;
    for (double v : m.phi) s += std::exp(2.0 * v);
    return m.shape.A0() * s / double(m.phi.size());
}

// ∫ f dv = ∫ f e^{2φ} dA0
inline double integral_dv(const ConformalTorus& m, const Field& f)
{
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * std::exp(2.0 * m.phi[i]);
    return m.shape.A0() * s / double(f.size());
}

inline Field gauss_curvature(const ConformalTorus& m)
{
    Field k = lap0(m.shape, m.phi);
    for (std::size_t i = 0; i < k.size(); ++i) k[i] *= std::exp(-2.0 * m.phi[i]);
    return k;
}

inline Field scalar_curvature(const ConformalTorus& m)
{
    Field s = gauss_curvature(m);
    for (double& v : s) v *= 2.0;
    return s;
}

// ∫ s dv / ∫ dv; the class constant 4πχ/A, identically 0 on the torus
inline double average_scalar_curvature(const ConformalTorus& m)
{
    return integral_dv(m, scalar_curvature(m)) / area(m);
}

// φ = (1/2) log(e^{2φ_base} - Δ0 ψ); exact area preservation by construction
inline ConformalTorus potential_to_conformal(const KahlerPotential& p)
{
    const TorusShape& s = p.base.shape;
    Field lp = lap0(s, p.psi);
    Field h(lp.size());
    double minh = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lp.size(); ++i) {
        h[i] = std::exp(2.0 * p.base.phi[i]) - lp[i];
        minh = std::min(minh, h[i]);
    }
    if (!(minh > 0.0)) throw AdmissibilityError(minh);
    Field phi(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) phi[i] = 0.5 * std::log(h[i]);
    return {s, std::move(phi)};
}

// unique mean-zero ψ with e^{2φ_base} - Δ0 ψ = e^{2φ_m}; requires area match
inline KahlerPotential conformal_to_potential(const ConformalTorus& m, const ConformalTorus& base,
                                              double area_tol = 1e-8)
{
    if (!(m.shape == base.shape))
        throw std::invalid_argument("conformal_to_potential: shape mismatch");
    double am = area(m), ab = area(base);
    if (std::abs(am - ab) > area_tol * std::max(1.0, ab)) throw AreaMismatchError(am, ab);
    Field rhs(m.phi.size());
    for (std::size_t i = 0; i < rhs.size(); ++i)
        rhs[i] = std::exp(2.0 * base.phi[i]) - std::exp(2.0 * m.phi[i]);
    KahlerPotential p{base, inv_lap0(m.shape, rhs)};
    return p;
}

// deterministic band-limited random field: modes with 0 < max(|p|,|q|) <= kmax,
// mean zero, rescaled to the requested sup norm
inline Field random_band_limited(const TorusShape& s, int kmax, double amplitude,
                                 std::uint64_t seed)
{
    s.validate();
    if (kmax < 1 || kmax > s.N / 4)
        throw std::invalid_argument("random_band_limited: need 1 <= kmax <= N/4");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    struct Mode {
        int p, q;
        double a, b;
    };
    std::vector<Mode> modes;
    for (int p = -kmax; p <= kmax; ++p)
        for (int q = -kmax; q <= kmax; ++q) {
            if (p == 0 && q == 0) continue;
            if (p < 0 || (p == 0 && q < 0)) continue; // half lattice, conjugates implied
            modes.push_back({p, q, gauss(rng), gauss(rng)});
        }
    const int N = s.N;
    Field f(s.size(), 0.0);
    const double twopi = 2.0 * std::numbers::pi;
    for (int iy = 0; iy < N; ++iy)
        for (int ix = 0; ix < N; ++ix) {
            double x = double(ix) / N, y = double(iy) / N;
            double v = 0.0;
            for (const Mode& m : modes) {
                double ph = twopi * (m.p * x + m.q * y);
                v += m.a * std::cos(ph) + m.b * std::sin(ph);
            }
            f[std::size_t(iy) * N + ix] = v;
        }
    double sup = sup_norm(f);
    if (sup > 0.0) {
        double sc = amplitude / sup;
        for (double& v : f) v *= sc;
    }
    return f;
}

// spectral resampling to a new grid size (truncation or zero padding)
inline Field resample(const TorusShape& s, const Field& f, int n_new)
{
    TorusShape t = s;
    t.N = n_new;
    t.validate();
    auto& fin = detail::Fft2::get(s.N);
    std::vector<std::complex<double>> spec;
    fin.forward(f, spec);
    std::vector<std::complex<double>> out(t.size(), {0.0, 0.0});
    const int keep = std::min(s.N, n_new) / 2;
    const double norm = double(n_new) * n_new / (double(s.N) * s.N);
    for (int q = -keep; q < keep; ++q)
        for (int p = -keep; p < keep; ++p) {
            int kyo = (q + s.N) % s.N, kxo = (p + s.N) % s.N;
            int kyn = (q + n_new) % n_new, kxn = (p + n_new) % n_new;
            out[std::size_t(kyn) * n_new + kxn] = spec[std::size_t(kyo) * s.N + kxo] * norm;
        }
    Field g;
    detail::Fft2::get(n_new).inverse(out, g);
    return g;
}

inline ConformalTorus resample(const ConformalTorus& m, int n_new)
{
    TorusShape t = m.shape;
    Field phi = resample(m.shape, m.phi, n_new);
    t.N = n_new;
    return {t, std::move(phi)};
}

// cyclic grid shift by (sx, sy) cells
inline Field translate_grid(const Field& f, int N, int sx, int sy)
{
    Field g(f.size());
    for (int iy = 0; iy < N; ++iy)
        for (int ix = 0; ix < N; ++ix) {
            int jx = ((ix - sx) % N + N) % N;
            int jy = ((iy - sy) % N + N) % N;
            g[std::size_t(iy) * N + ix] = f[std::size_t(jy) * N + jx];
        }
    return g;
}

// FNV-1a provenance hash over shape and field bytes
inline std::string metric_id(const ConformalTorus& m)
{
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t len) {
        const unsigned char* b = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    mix(&m.shape.tau_re, sizeof(double));
    mix(&m.shape.tau_im, sizeof(double));
    mix(&m.shape.N, sizeof(int));
    mix(m.phi.data(), m.phi.size() * sizeof(double));
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace quillen
