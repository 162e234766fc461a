#pragma once

// Geometric flows on the conformal torus.
//
//   ricci_flow            φ̇ = (s̄ - s)/2 in the conformal-factor chart;
//                         the live average s̄ pins the area exactly.
//   ricci_flow_potential  the same trajectory in the potential chart,
//                         Δ0 ψ̇ = e^{2φ(ψ)} (s - s̄); area conservation is
//                         structural (Δ0 output has no mean).
//   qL_gradient_flow      ψ̇ = s - s̄, linearization -Δ0²; integrated with an
//                         exponential integrator so the stiff quadratic symbol
//                         is handled exactly. Loss of potential admissibility
//                         is a designated outcome, not an error.
//
// Both Ricci charts use adaptive Dormand-Prince 5(4) with the step capped at
// cfl_margin / (e^{-2 min φ} λ_max(Δ0)), the explicit-RK stability limit of
// the stiffest linearized mode.
//
// Every accepted step accumulates cum_decay = ∫0^t ∫(s - s̄)² dv dt', the
// channel that feeds both the determinant monotonicity prediction
// Δ log det' = cum_decay / 24π and the K-energy trace μ(t) = -cum_decay.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "quillen/spectral.hpp"
#include "quillen/torus.hpp"

namespace quillen {

enum class FlowOutcome { reached_t_end, reached_target, admissibility_lost, step_limit };

inline const char* to_string(FlowOutcome o)
{
    switch (o) {
    case FlowOutcome::reached_t_end: return "reached_t_end";
    case FlowOutcome::reached_target: return "reached_target";
    case FlowOutcome::admissibility_lost: return "admissibility_lost";
    case FlowOutcome::step_limit: return "step_limit";
    }
    return "unknown";
}

struct FlowConfig {
    double t_end = 0.1;
    double dt_init = 1e-6;
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    int max_steps = 2000000;
    int records = 64;               // trace rows beyond the t = 0 row
    double target_residual = 0.0;   // stop when sup|s - s̄| drops below; 0 = off
    double admissibility_delta = 1e-6;
    double cfl_margin = 3.0;
};

struct FlowRecord {
    double t = 0.0;
    double sup_s_dev = 0.0;   // sup |s - s̄|
    double l2_s_dev_sq = 0.0; // ∫ (s - s̄)² dv
    double area = 0.0;
    double cum_decay = 0.0;      // ∫0^t ∫(s - s̄)² dv dt'
    double k_energy_rate = 0.0;  // -∫ ψ̇ (s - s̄) dv at this instant
    Field state;                 // φ (conformal chart) or ψ (potential charts)
};

struct FlowResult {
    ConformalTorus terminal;
    Field terminal_psi;  // potential charts only
    bool state_is_potential = false;
    std::vector<FlowRecord> trace;
    FlowOutcome outcome = FlowOutcome::reached_t_end;
    long steps_accepted = 0;
    long steps_rejected = 0;
};

namespace detail {

// curvature bundle shared by every flow right-hand side
struct CurvatureEval {
    Field s;        // scalar curvature field
    double s_bar;   // ∫ s dv / A
    double area;
    double sup_dev; // sup |s - s̄|
    double l2_dev;  // ∫ (s - s̄)² dv
};

inline CurvatureEval curvature_eval(const TorusShape& sh, const Field& phi)
{
    CurvatureEval c;
    c.s = lap0(sh, phi);
    const std::size_t n = phi.size();
    Field e2(n);
    double a = 0.0, sint = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        e2[i] = std::exp(2.0 * phi[i]);
        c.s[i] *= 2.0 / e2[i]; // s = 2 e^{-2φ} Δ0 φ
        a += e2[i];
        sint += c.s[i] * e2[i];
    }
    const double cell = sh.A0() / double(n);
    c.area = a * cell;
    c.s_bar = sint * cell / c.area;
    c.sup_dev = 0.0;
    c.l2_dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = c.s[i] - c.s_bar;
        c.sup_dev = std::max(c.sup_dev, std::abs(d));
        c.l2_dev += d * d * e2[i];
    }
    c.l2_dev *= cell;
    return c;
}

// -∫ ψ̇ (s - s̄) dv with Δ0 ψ̇ = e^{2φ}(s - s̄)
inline double k_energy_rate_of(const TorusShape& sh, const Field& phi, const CurvatureEval& c)
{
    const std::size_t n = phi.size();
    Field rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = std::exp(2.0 * phi[i]) * (c.s[i] - c.s_bar);
    Field psidot = inv_lap0(sh, rhs);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += psidot[i] * rhs[i];
    return -v * sh.A0() / double(n);
}

struct Dp54Tableau {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640,
                            e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
};

// adaptive Dormand-Prince 5(4) driver over a Field state. rhs(y, out) returns
// false if y leaves the admissible set (forces a retry with a smaller step);
// dt_cap(y) bounds the next step; next_stop(t) is the next time the step may
// not overshoot (record boundaries).
template <class Rhs, class DtCap, class NextStop, class OnAccept>
inline FlowOutcome dp54_drive(Field& y, double& t, const FlowConfig& cfg, Rhs&& rhs,
                              DtCap&& dt_cap, NextStop&& next_stop, OnAccept&& on_accept,
                              long& accepted, long& rejected)
{
    using T = Dp54Tableau;
    const std::size_t n = y.size();
    Field k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n);
    if (!rhs(y, k1)) return FlowOutcome::admissibility_lost;
    double dt = std::min(cfg.dt_init, dt_cap(y));
    bool fsal_valid = true;
    long stalls = 0;

    while (t < cfg.t_end - 1e-15 * cfg.t_end) {
        if (accepted + rejected >= cfg.max_steps) return FlowOutcome::step_limit;
        double dt_step = std::min(dt, dt_cap(y));
        dt_step = std::min(dt_step, cfg.t_end - t);
        double stop = next_stop(t);
        if (stop > t) dt_step = std::min(dt_step, stop - t);
        double dt_saved = dt;
        dt = dt_step;
        if (!fsal_valid) {
            if (!rhs(y, k1)) return FlowOutcome::admissibility_lost;
            fsal_valid = true;
        }

        auto stage = [&](Field& out, std::initializer_list<std::pair<const Field*, double>> ks) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = y[i];
                for (const auto& [k, c] : ks) acc += dt * c * (*k)[i];
                out[i] = acc;
            }
        };
        bool ok = true;
        stage(tmp, {{&k1, T::a21}});
        ok = ok && rhs(tmp, k2);
        if (ok) {
            stage(tmp, {{&k1, T::a31}, {&k2, T::a32}});
            ok = ok && rhs(tmp, k3);
        }
        if (ok) {
            stage(tmp, {{&k1, T::a41}, {&k2, T::a42}, {&k3, T::a43}});
            ok = ok && rhs(tmp, k4);
        }
        if (ok) {
            stage(tmp, {{&k1, T::a51}, {&k2, T::a52}, {&k3, T::a53}, {&k4, T::a54}});
            ok = ok && rhs(tmp, k5);
        }
        if (ok) {
            stage(tmp, {{&k1, T::a61}, {&k2, T::a62}, {&k3, T::a63}, {&k4, T::a64}, {&k5, T::a65}});
            ok = ok && rhs(tmp, k6);
        }
        if (ok) {
            for (std::size_t i = 0; i < n; ++i)
                ynew[i] = y[i]
                          + dt
                                * (T::b1 * k1[i] + T::b3 * k3[i] + T::b4 * k4[i] + T::b5 * k5[i]
                                   + T::b6 * k6[i]);
            ok = ok && rhs(ynew, k7);
        }
        if (!ok) {
            dt *= 0.25;
            ++rejected;
            if (++stalls > 60) return FlowOutcome::admissibility_lost;
            continue;
        }

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = dt
                       * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i]
                          + T::e6 * k6[i] + T::e7 * k7[i]);
            double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / double(n));

        const double proposal = dt * std::clamp(0.9 * std::pow(std::max(err, 1e-12), -0.2), 0.2, 5.0);
        if (err <= 1.0) {
            t += dt;
            y.swap(ynew);
            k1.swap(k7); // FSAL
            fsal_valid = true;
            ++accepted;
            stalls = 0;
            // a record-boundary clamp must not ratchet the controller down
            dt = (err < 0.1) ? std::max(proposal, dt_saved) : proposal;
            if (!on_accept(t, y, dt)) return FlowOutcome::reached_target;
        } else {
            ++rejected;
            ++stalls;
            fsal_valid = true; // k1 still matches y
            if (stalls > 200) throw std::runtime_error("dp54_drive: step control stalled");
            dt = proposal;
        }
    }
    return FlowOutcome::reached_t_end;
}

} // namespace detail

// ------------------------------------------------------------------- flows

namespace detail {

// shared trace recorder: trapezoidal cum_decay at accepted steps, snapshot
// records at (approximately) uniform times
struct TraceRecorder {
    const TorusShape* shape;
    const FlowConfig* cfg;
    std::function<Field(const Field&)> to_phi; // chart -> conformal factor
    std::vector<FlowRecord>* trace;
    bool velocity_is_s_dev = false; // qL flow: ψ̇ = s - s̄, so μ̇ = -∫(s-s̄)²dv
    double prev_l2 = 0.0, prev_t = 0.0, cum = 0.0;
    double record_dt = 0.0;
    int next_record = 1;

    void emit(double t, const Field& state, const CurvatureEval& c, const Field& phi)
    {
        FlowRecord r;
        r.t = t;
        r.sup_s_dev = c.sup_dev;
        r.l2_s_dev_sq = c.l2_dev;
        r.area = c.area;
        r.cum_decay = cum;
        r.k_energy_rate = velocity_is_s_dev ? -c.l2_dev : k_energy_rate_of(*shape, phi, c);
        r.state = state;
        trace->push_back(std::move(r));
    }

    void start(const Field& state)
    {
        record_dt = cfg->t_end / double(std::max(1, cfg->records));
        Field phi = to_phi(state);
        CurvatureEval c = curvature_eval(*shape, phi);
        prev_l2 = c.l2_dev;
        prev_t = 0.0;
        emit(0.0, state, c, phi);
    }

    double next_time() const { return next_record * record_dt; }

    // returns false when the target residual is reached; mid_l2 (when >= 0)
    // upgrades the decay accumulator from trapezoid to Simpson
    bool accept(double t, const Field& state, bool force_record, double mid_l2 = -1.0)
    {
        Field phi = to_phi(state);
        CurvatureEval c = curvature_eval(*shape, phi);
        const double dt = t - prev_t;
        if (mid_l2 >= 0.0)
            cum += dt / 6.0 * (prev_l2 + 4.0 * mid_l2 + c.l2_dev);
        else
            cum += 0.5 * (c.l2_dev + prev_l2) * dt;
        prev_l2 = c.l2_dev;
        prev_t = t;
        bool hit_target = cfg->target_residual > 0.0 && c.sup_dev < cfg->target_residual;
        if (force_record || hit_target || t >= next_record * record_dt - 1e-14) {
            emit(t, state, c, phi);
            while (t >= next_record * record_dt - 1e-14) ++next_record;
        }
        return !hit_target;
    }
};

} // namespace detail

// conformal-chart Ricci flow φ̇ = (s̄ - s)/2
inline FlowResult ricci_flow(const ConformalTorus& m0, const FlowConfig& cfg)
{
    m0.shape.validate();
    const TorusShape sh = m0.shape;
    const double lam_max = lap0_symbol_max(sh);

    FlowResult out;
    out.state_is_potential = false;

    detail::TraceRecorder rec;
    rec.shape = &sh;
    rec.cfg = &cfg;
    rec.to_phi = [](const Field& f) { return f; };
    rec.trace = &out.trace;

    auto rhs = [&](const Field& phi, Field& dphi) {
        detail::CurvatureEval c = detail::curvature_eval(sh, phi);
        for (std::size_t i = 0; i < phi.size(); ++i) dphi[i] = 0.5 * (c.s_bar - c.s[i]);
        return true;
    };
    auto dt_cap = [&](const Field& phi) {
        double mn = phi[0];
        for (double v : phi) mn = std::min(mn, v);
        // linearized operator e^{-2φ} Δ0; stability bound of the stiffest mode
        return cfg.cfl_margin / (std::exp(-2.0 * mn) * lam_max);
    };

    Field y = m0.phi;
    double t = 0.0;
    rec.start(y);
    auto next_stop = [&](double) { return rec.next_time(); };
    auto on_accept = [&](double tt, const Field& yy, double) { return rec.accept(tt, yy, false); };
    out.outcome = detail::dp54_drive(y, t, cfg, rhs, dt_cap, next_stop, on_accept,
                                     out.steps_accepted, out.steps_rejected);
    if (out.trace.back().t < t - 1e-14) rec.accept(t, y, true);
    out.terminal = ConformalTorus{sh, y};
    return out;
}

// potential-chart Ricci flow: Δ0 ψ̇ = e^{2φ(ψ)} (s - s̄) with
// e^{2φ(ψ)} = e^{2φ_base} - Δ0 ψ
inline FlowResult ricci_flow_potential(const ConformalTorus& base, const Field& psi0,
                                       const FlowConfig& cfg)
{
    base.shape.validate();
    const TorusShape sh = base.shape;
    const double lam_max = lap0_symbol_max(sh);

    FlowResult out;
    out.state_is_potential = true;

    auto to_phi = [&](const Field& psi) -> Field {
        Field lp = lap0(sh, psi);
        Field phi(psi.size());
        for (std::size_t i = 0; i < psi.size(); ++i) {
            double h = std::exp(2.0 * base.phi[i]) - lp[i];
            if (!(h > cfg.admissibility_delta)) throw AdmissibilityError(h);
            phi[i] = 0.5 * std::log(h);
        }
        return phi;
    };

    detail::TraceRecorder rec;
    rec.shape = &sh;
    rec.cfg = &cfg;
    rec.to_phi = to_phi;
    rec.trace = &out.trace;

    auto rhs = [&](const Field& psi, Field& dpsi) {
        Field lp = lap0(sh, psi);
        Field phi(psi.size());
        for (std::size_t i = 0; i < psi.size(); ++i) {
            double h = std::exp(2.0 * base.phi[i]) - lp[i];
            if (!(h > cfg.admissibility_delta)) return false;
            phi[i] = 0.5 * std::log(h);
        }
        detail::CurvatureEval c = detail::curvature_eval(sh, phi);
        Field r(psi.size());
        for (std::size_t i = 0; i < psi.size(); ++i)
            r[i] = std::exp(2.0 * phi[i]) * (c.s[i] - c.s_bar);
        dpsi = inv_lap0(sh, r);
        return true;
    };
    auto dt_cap = [&](const Field& psi) {
        Field phi = to_phi(psi);
        double mn = phi[0];
        for (double v : phi) mn = std::min(mn, v);
        return cfg.cfl_margin / (std::exp(-2.0 * mn) * lam_max);
    };

    Field y = psi0;
    double t = 0.0;
    try {
        rec.start(y);
    } catch (const AdmissibilityError&) {
        out.outcome = FlowOutcome::admissibility_lost;
        out.terminal_psi = y;
        out.terminal = base;
        return out;
    }
    auto next_stop = [&](double) { return rec.next_time(); };
    auto on_accept = [&](double tt, const Field& yy, double) { return rec.accept(tt, yy, false); };
    out.outcome = detail::dp54_drive(y, t, cfg, rhs, dt_cap, next_stop, on_accept,
                                     out.steps_accepted, out.steps_rejected);
    if (out.trace.back().t < t - 1e-14) rec.accept(t, y, true);
    out.terminal_psi = y;
    out.terminal = potential_to_conformal({base, y});
    return out;
}

// gradient flow of the Q_L energy in the potential chart: ψ̇ = s - s̄.
// The -Δ0² linearization is integrated exactly (exponential two-stage scheme
// with step doubling); only the nonlinear remainder N(ψ) = (s - s̄) + Δ0²ψ is
// treated explicitly.
inline FlowResult qL_gradient_flow(const ConformalTorus& base, const Field& psi0,
                                   const FlowConfig& cfg)
{
    base.shape.validate();
    const TorusShape sh = base.shape;
    const int N = sh.N;
    const std::size_t n = sh.size();

    FlowResult out;
    out.state_is_potential = true;

    auto to_phi = [&](const Field& psi) -> Field {
        Field lp = lap0(sh, psi);
        Field phi(n);
        for (std::size_t i = 0; i < n; ++i) {
            double h = std::exp(2.0 * base.phi[i]) - lp[i];
            if (!(h > cfg.admissibility_delta)) throw AdmissibilityError(h);
            phi[i] = 0.5 * std::log(h);
        }
        return phi;
    };

    detail::TraceRecorder rec;
    rec.shape = &sh;
    rec.cfg = &cfg;
    rec.to_phi = to_phi;
    rec.trace = &out.trace;
    rec.velocity_is_s_dev = true;

    // admissibility-aware nonlinear remainder
    auto remainder = [&](const Field& psi, Field& nl) {
        Field lp = lap0(sh, psi);
        Field phi(n);
        for (std::size_t i = 0; i < n; ++i) {
            double h = std::exp(2.0 * base.phi[i]) - lp[i];
            if (!(h > cfg.admissibility_delta)) return false;
            phi[i] = 0.5 * std::log(h);
        }
        detail::CurvatureEval c = detail::curvature_eval(sh, phi);
        Field l2psi = lap0(sh, lp);
        nl.resize(n);
        for (std::size_t i = 0; i < n; ++i) nl[i] = (c.s[i] - c.s_bar) + l2psi[i];
        return true;
    };

    auto& fft = detail::Fft2::get(N);
    std::vector<std::complex<double>> sp_y, sp_n, sp_a, sp_na, sp_out;
    Field a(n), na(n), y1(n);

    // one exponential two-stage step of size h, in place on spec(y)&friends;
    // returns false on admissibility loss inside the stage
    auto etd_step = [&](const Field& y, double h, Field& ynext) -> bool {
        Field nl(n);
        if (!remainder(y, nl)) return false;
        fft.forward(y, sp_y);
        fft.forward(nl, sp_n);
        sp_a.resize(n);
        for (int ky = 0; ky < N; ++ky)
            for (int kx = 0; kx < N; ++kx) {
                std::size_t i = std::size_t(ky) * N + kx;
                double lam = lap0_symbol(sh, detail::freq_of(kx, N), detail::freq_of(ky, N));
                double z = -lam * lam * h;
                double ez = std::exp(z);
                double p1 = (z > -1e-3 && z < 1e-3)
                                ? 1.0 + z / 2.0 + z * z / 6.0
                                : std::expm1(z) / z;
                sp_a[i] = ez * sp_y[i] + h * p1 * sp_n[i];
            }
        fft.inverse(sp_a, a);
        if (!remainder(a, na)) return false;
        fft.forward(na, sp_na);
        sp_out.resize(n);
        for (int ky = 0; ky < N; ++ky)
            for (int kx = 0; kx < N; ++kx) {
                std::size_t i = std::size_t(ky) * N + kx;
                double lam = lap0_symbol(sh, detail::freq_of(kx, N), detail::freq_of(ky, N));
                double z = -lam * lam * h;
                double p2 = (z > -1e-3 && z < 1e-3)
                                ? 0.5 + z / 6.0 + z * z / 24.0
                                : (std::expm1(z) - z) / (z * z);
                sp_out[i] = sp_a[i] + h * p2 * (sp_na[i] - sp_n[i]);
            }
        fft.inverse(sp_out, ynext);
        double mean = grid_mean(ynext);
        for (double& v : ynext) v -= mean; // mean of ψ is gauge
        return true;
    };

    Field y = psi0;
    {
        double mean = grid_mean(y);
        for (double& v : y) v -= mean;
    }
    double t = 0.0;
    try {
        rec.start(y);
    } catch (const AdmissibilityError&) {
        out.outcome = FlowOutcome::admissibility_lost;
        out.terminal_psi = y;
        out.terminal = base;
        return out;
    }

    double dt = cfg.dt_init;
    out.outcome = FlowOutcome::reached_t_end;
    Field yfull(n), yhalf(n), yhalf2(n);
    long stalls = 0;
    while (t < cfg.t_end - 1e-15 * cfg.t_end) {
        if (out.steps_accepted + out.steps_rejected >= cfg.max_steps) {
            out.outcome = FlowOutcome::step_limit;
            break;
        }
        double dt_step = std::min(dt, cfg.t_end - t);
        double stop = rec.next_time();
        if (stop > t) dt_step = std::min(dt_step, stop - t);
        bool ok = etd_step(y, dt_step, yfull) && etd_step(y, 0.5 * dt_step, yhalf)
                  && etd_step(yhalf, 0.5 * dt_step, yhalf2);
        if (!ok) {
            dt = 0.25 * dt_step;
            ++out.steps_rejected;
            if (++stalls > 60) {
                out.outcome = FlowOutcome::admissibility_lost;
                break;
            }
            continue;
        }
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = yfull[i] - yhalf2[i];
            double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(yhalf2[i]));
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / double(n));
        const double proposal =
            dt_step * std::clamp(0.9 * std::pow(std::max(err, 1e-12), -1.0 / 3.0), 0.2, 5.0);
        if (err <= 1.0) {
            t += dt_step;
            double mid_l2 = detail::curvature_eval(sh, to_phi(yhalf)).l2_dev;
            y.swap(yhalf2); // keep the fine solution
            ++out.steps_accepted;
            stalls = 0;
            dt = (err < 0.1) ? std::max(proposal, dt) : proposal;
            if (!rec.accept(t, y, false, mid_l2)) {
                out.outcome = FlowOutcome::reached_target;
                break;
            }
        } else {
            ++out.steps_rejected;
            if (++stalls > 200) throw std::runtime_error("qL_gradient_flow: step control stalled");
            dt = proposal;
        }
    }
    if (out.trace.back().t < t - 1e-14) rec.accept(t, y, true);
    out.terminal_psi = y;
    out.terminal = potential_to_conformal({base, y});
    return out;
}

// ------------------------------------------------------- trace diagnostics

struct TailFit {
    double rate = 0.0; // d/dt log sup|s - s̄|
    double r_squared = 0.0;
    int points = 0;
};

// linear regression of log sup_s_dev over the trailing fraction of the trace
inline TailFit exp_tail_fit(const std::vector<FlowRecord>& trace, double fraction = 0.5)
{
    TailFit f;
    if (trace.empty()) return f;
    const double t_cut = trace.back().t - fraction * (trace.back().t - trace.front().t);
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    int n = 0;
    for (const FlowRecord& r : trace) {
        if (r.t < t_cut || r.sup_s_dev <= 0.0) continue;
        double x = r.t, y = std::log(r.sup_s_dev);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        ++n;
    }
    f.points = n;
    if (n < 3) return f;
    const double det = n * sxx - sx * sx;
    f.rate = (n * sxy - sx * sy) / det;
    const double ss_tot = syy - sy * sy / n;
    const double ss_res = ss_tot - f.rate * (sxy - sx * sy / n);
    f.r_squared = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

struct MonotonicityRow {
    double t = 0.0;
    double log_det = 0.0;
    double error_estimate = 0.0;
    double delta_log_det = 0.0; // vs previous checkpoint
    double predicted = 0.0;     // Δ cum_decay / 24π
};

struct MonotonicityReport {
    std::vector<MonotonicityRow> rows;
    bool log_det_nondecreasing = true;
    bool decay_nonincreasing = true;
    double max_rel_mismatch = 0.0; // |Δ log det - predicted| / predicted
};

// determinant checkpoints along a recorded flow, resampled to det_N; verifies
// d/dt log det' = (1/24π) ∫(s - s̄)² dv in integrated form
inline MonotonicityReport monotonicity_report(const FlowResult& flow, const TorusShape& shape,
                                              const ConformalTorus& base, int checkpoints,
                                              int det_N)
{
    MonotonicityReport rep;
    const auto& tr = flow.trace;
    if (tr.size() < 2 || checkpoints < 2) return rep;

    std::vector<std::size_t> idx;
    for (int k = 0; k < checkpoints; ++k)
        idx.push_back(std::size_t(k) * (tr.size() - 1) / (checkpoints - 1));

    // decay channel monotone along the full trace, not only at checkpoints
    for (std::size_t i = 1; i < tr.size(); ++i)
        if (tr[i].l2_s_dev_sq > tr[i - 1].l2_s_dev_sq * (1.0 + 1e-9) + 1e-14)
            rep.decay_nonincreasing = false;

    double prev_v = 0.0, prev_cum = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const FlowRecord& r = tr[idx[j]];
        ConformalTorus m = flow.state_is_potential
                               ? potential_to_conformal({base, r.state})
                               : ConformalTorus{shape, r.state};
        LogDetResult d = zeta_log_det(resample(m, det_N));
        MonotonicityRow row;
        row.t = r.t;
        row.log_det = d.log_det;
        row.error_estimate = d.error_estimate;
        if (j > 0) {
            row.delta_log_det = d.log_det - prev_v;
            row.predicted = (r.cum_decay - prev_cum) / (24.0 * std::numbers::pi);
            if (row.delta_log_det < -(3.0 * d.error_estimate + 1e-9))
                rep.log_det_nondecreasing = false;
            if (row.predicted > 1e-12)
                rep.max_rel_mismatch =
                    std::max(rep.max_rel_mismatch,
                             std::abs(row.delta_log_det - row.predicted) / row.predicted);
        }
        prev_v = d.log_det;
        prev_cum = r.cum_decay;
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace quillen
