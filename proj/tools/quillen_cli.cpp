// quillen: zeta determinants, analytic torsion, and curvature flows on
// conformal tori.
//
// Subcommands: det, flow, kenergy, verify-chern, torsion-variation.
// A run is declared by a JSON config (--config), with flags overriding
// individual fields; the resolved config, defaults included, is echoed into
// every summary. Outputs are written atomically at the end of a successful
// run; QUILLEN_OUT overrides the output directory without entering the
// summary, so reruns into different directories stay byte-identical.
//
// Exit codes: 0 ok, 2 config error, 3 admissibility failure, 4 solver
// failure, 5 acceptance-check failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "quillen/chern.hpp"
#include "quillen/energy.hpp"
#include "quillen/flow.hpp"
#include "quillen/io.hpp"
#include "quillen/spectral.hpp"

using namespace quillen;
using nlohmann::json;

namespace {

enum ExitCode {
    kOk = 0,
    kConfigError = 2,
    kAdmissibility = 3,
    kSolverFailure = 4,
    kCheckFailure = 5,
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // torus + field source, shared by every subcommand
    double tau_re = 0.0;
    double tau_im = 1.0;
    int N = 32;
    unsigned seed = 0;
    std::string field_file;  // metric phi / potential psi from a field file
    double amplitude = 0.0;  // random band-limited source when > 0
    int kmax = 1;
    std::string output = "out";
    bool torus_explicit = false; // any of tau_re/tau_im/N set by user
    // det
    std::string method = "zeta"; // zeta | polyakov | epstein
    // flow
    std::string flow_kind = "ricci"; // ricci | ricci-potential | qL
    FlowConfig fc;
    int det_n = 0; // checkpoint eigensolve grid; 0 disables determinant rows
    int det_checkpoints = 10;
    // kenergy
    std::string from_file;
    std::string to_file;
    int panels = 8;
    // verify-chern
    int dim_n = 2;
    int trials = 100;
    // torsion-variation
    std::string direction_file;
    double dir_amplitude = 0.05;
    int dir_kmax = 2;
    double fd_h = 0.02;
    int fd_order = 4;
};

// ------------------------------------------------------------- config file

void apply_config_file(const std::string& path, RunConfig& c, std::string& file_command)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j = json::parse(in);
    static const std::map<std::string, int> keys = {
        {"command", 0},        {"tau_re", 1},          {"tau_im", 1},
        {"N", 2},              {"seed", 3},            {"field_file", 4},
        {"amplitude", 1},      {"kmax", 2},            {"output", 4},
        {"method", 4},         {"flow_kind", 4},       {"t_end", 1},
        {"dt_init", 1},        {"rel_tol", 1},         {"abs_tol", 1},
        {"max_steps", 2},      {"records", 2},         {"target_residual", 1},
        {"admissibility_delta", 1},                    {"cfl_margin", 1},
        {"det_n", 2},          {"det_checkpoints", 2}, {"from_file", 4},
        {"to_file", 4},        {"panels", 2},          {"n", 2},
        {"trials", 2},         {"direction_file", 4},  {"dir_amplitude", 1},
        {"dir_kmax", 2},       {"h", 1},               {"order", 2},
    };
    for (const auto& [key, val] : j.items())
        if (!keys.count(key)) throw ConfigError("unknown config key: " + key);

    auto d = [&](const char* k, double& v) { if (j.contains(k)) j.at(k).get_to(v); };
    auto i = [&](const char* k, int& v) { if (j.contains(k)) j.at(k).get_to(v); };
    auto s = [&](const char* k, std::string& v) { if (j.contains(k)) j.at(k).get_to(v); };
    s("command", file_command);
    c.torus_explicit = j.contains("tau_re") || j.contains("tau_im") || j.contains("N");
    d("tau_re", c.tau_re);
    d("tau_im", c.tau_im);
    i("N", c.N);
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    s("field_file", c.field_file);
    d("amplitude", c.amplitude);
    i("kmax", c.kmax);
    s("output", c.output);
    s("method", c.method);
    s("flow_kind", c.flow_kind);
    d("t_end", c.fc.t_end);
    d("dt_init", c.fc.dt_init);
    d("rel_tol", c.fc.rel_tol);
    d("abs_tol", c.fc.abs_tol);
    i("max_steps", c.fc.max_steps);
    i("records", c.fc.records);
    d("target_residual", c.fc.target_residual);
    d("admissibility_delta", c.fc.admissibility_delta);
    d("cfl_margin", c.fc.cfl_margin);
    i("det_n", c.det_n);
    i("det_checkpoints", c.det_checkpoints);
    s("from_file", c.from_file);
    s("to_file", c.to_file);
    i("panels", c.panels);
    i("n", c.dim_n);
    i("trials", c.trials);
    s("direction_file", c.direction_file);
    d("dir_amplitude", c.dir_amplitude);
    i("dir_kmax", c.dir_kmax);
    d("h", c.fd_h);
    i("order", c.fd_order);
}

// ----------------------------------------------------------- summary pieces

json torus_json(const TorusShape& s)
{
    return json{{"N", s.N}, {"tau_re", s.tau_re}, {"tau_im", s.tau_im}};
}

// the full resolved config, defaults included; the output override from the
// environment is deliberately absent
json config_json(const RunConfig& c, const std::string& command)
{
    json j{{"command", command},
           {"torus", torus_json(TorusShape{c.tau_re, c.tau_im, c.N})},
           {"seed", c.seed},
           {"field_file", c.field_file},
           {"amplitude", c.amplitude},
           {"kmax", c.kmax},
           {"output", c.output}};
    if (command == "det") j["method"] = c.method;
    if (command == "flow") {
        j["flow_kind"] = c.flow_kind;
        j["flow"] = json{{"t_end", c.fc.t_end},
                         {"dt_init", c.fc.dt_init},
                         {"rel_tol", c.fc.rel_tol},
                         {"abs_tol", c.fc.abs_tol},
                         {"max_steps", c.fc.max_steps},
                         {"records", c.fc.records},
                         {"target_residual", c.fc.target_residual},
                         {"admissibility_delta", c.fc.admissibility_delta},
                         {"cfl_margin", c.fc.cfl_margin}};
        j["det_n"] = c.det_n;
        j["det_checkpoints"] = c.det_checkpoints;
    }
    if (command == "kenergy") {
        j["from_file"] = c.from_file;
        j["to_file"] = c.to_file;
        j["panels"] = c.panels;
    }
    if (command == "verify-chern") {
        j["n"] = c.dim_n;
        j["trials"] = c.trials;
    }
    if (command == "torsion-variation") {
        j["direction_file"] = c.direction_file;
        j["dir_amplitude"] = c.dir_amplitude;
        j["dir_kmax"] = c.dir_kmax;
        j["h"] = c.fd_h;
        j["order"] = c.fd_order;
    }
    return j;
}

std::filesystem::path resolve_outdir(const RunConfig& c)
{
    const char* env = std::getenv("QUILLEN_OUT");
    return (env && *env) ? std::filesystem::path(env) : std::filesystem::path(c.output);
}

// ------------------------------------------------------------ field sources

TorusShape resolved_shape(const RunConfig& c)
{
    TorusShape s{c.tau_re, c.tau_im, c.N};
    s.validate();
    return s;
}

// field file header wins over untouched defaults; an explicit conflicting
// torus config is an error
std::pair<TorusShape, Field> load_field_file(const std::string& path, const RunConfig& c)
{
    auto [s, f] = io::read_field(path);
    if (c.torus_explicit && !(s == resolved_shape(c)))
        throw ConfigError("torus config conflicts with field file header of " + path);
    return {s, f};
}

// metric phi / potential psi: file > random band-limited > zero
std::pair<TorusShape, Field> source_field(const RunConfig& c, unsigned seed_salt = 0)
{
    if (!c.field_file.empty()) return load_field_file(c.field_file, c);
    TorusShape s = resolved_shape(c);
    if (c.amplitude > 0.0)
        return {s, random_band_limited(s, c.kmax, c.amplitude, c.seed + seed_salt)};
    return {s, Field(s.size(), 0.0)};
}

// ---------------------------------------------------------------- commands

int cmd_det(const RunConfig& c)
{
    auto [shape, phi] = source_field(c);
    ConformalTorus m{shape, phi};
    json out;
    out["metric_id"] = metric_id(m);
    out["method"] = c.method;
    out["N"] = shape.N;
    out["tau"] = json{{"re", shape.tau_re}, {"im", shape.tau_im}};
    if (c.method == "zeta") {
        LogDetResult r = zeta_log_det(m);
        out["log_det"] = r.log_det;
        out["error_estimate"] = r.error_estimate;
        out["kernel_dim"] = r.kernel_dim;
        out["t_star"] = r.t_star;
        out["max_residual"] = r.max_residual;
        out["reliable"] = r.reliable;
    } else if (c.method == "polyakov") {
        const double v = polyakov_log_det(m);
        out["log_det"] = v;
        out["error_estimate"] = 1e-12 * (1.0 + std::abs(v));
        out["kernel_dim"] = 1;
    } else if (c.method == "epstein") {
        if (sup_norm(phi) != 0.0) throw ConfigError("epstein method requires the flat metric");
        const double v = epstein_log_det(shape.tau(), shape.A0());
        out["log_det"] = v;
        out["error_estimate"] = 1e-13 * (1.0 + std::abs(v));
        out["kernel_dim"] = 1;
    } else {
        throw ConfigError("unknown det method: " + c.method);
    }
    out["config"] = config_json(c, "det");
    io::write_json_atomic(resolve_outdir(c) / "det.json", out);
    return kOk;
}

int cmd_flow(const RunConfig& c)
{
    auto [shape, f0] = source_field(c);
    ConformalTorus base = ConformalTorus::flat(shape);
    FlowResult fr;
    if (c.flow_kind == "ricci")
        fr = ricci_flow(ConformalTorus{shape, f0}, c.fc);
    else if (c.flow_kind == "ricci-potential")
        fr = ricci_flow_potential(base, f0, c.fc);
    else if (c.flow_kind == "qL")
        fr = qL_gradient_flow(base, f0, c.fc);
    else
        throw ConfigError("unknown flow kind: " + c.flow_kind);

    if (fr.outcome == FlowOutcome::step_limit)
        throw std::runtime_error("flow hit the step limit before finishing");
    if (fr.trace.empty()) {
        // admissibility failed on the initial data: abort before artifacts
        std::fprintf(stderr, "error: initial data is inadmissible\n");
        return kAdmissibility;
    }

    json out;
    out["command"] = "flow";
    out["outcome"] = to_string(fr.outcome);
    out["steps_accepted"] = fr.steps_accepted;
    out["steps_rejected"] = fr.steps_rejected;
    const FlowRecord& last = fr.trace.back();
    out["terminal"] = json{{"t", last.t},
                           {"sup_s_dev", last.sup_s_dev},
                           {"l2_s_dev_sq", last.l2_s_dev_sq},
                           {"area", last.area},
                           {"cum_decay", last.cum_decay},
                           {"metric_id", metric_id(fr.terminal)}};
    TailFit tf = exp_tail_fit(fr.trace);
    if (tf.points >= 3)
        out["tail_fit"] =
            json{{"rate", tf.rate}, {"r_squared", tf.r_squared}, {"points", tf.points}};

    std::map<std::size_t, double> dets;
    if (c.det_n > 0 && fr.trace.size() >= 2 && c.det_checkpoints >= 2) {
        MonotonicityReport rep =
            monotonicity_report(fr, shape, base, c.det_checkpoints, c.det_n);
        json rows = json::array();
        for (std::size_t k = 0; k < rep.rows.size(); ++k) {
            const MonotonicityRow& r = rep.rows[k];
            rows.push_back(json{{"t", r.t},
                                {"log_det", r.log_det},
                                {"error_estimate", r.error_estimate},
                                {"delta_log_det", r.delta_log_det},
                                {"predicted", r.predicted}});
            dets[std::size_t(k) * (fr.trace.size() - 1) / (rep.rows.size() - 1)] = r.log_det;
        }
        out["monotonicity"] = json{{"det_n", c.det_n},
                                   {"rows", rows},
                                   {"log_det_nondecreasing", rep.log_det_nondecreasing},
                                   {"decay_nonincreasing", rep.decay_nonincreasing},
                                   {"max_rel_mismatch", rep.max_rel_mismatch}};
    }
    out["config"] = config_json(c, "flow");

    const std::filesystem::path dir = resolve_outdir(c);
    io::write_text_atomic(dir / "trace.csv", io::flow_trace_csv(fr.trace, dets));
    io::write_field(dir / "terminal_phi.f64", shape, fr.terminal.phi);
    if (fr.state_is_potential) io::write_field(dir / "terminal_psi.f64", shape, fr.terminal_psi);
    io::write_json_atomic(dir / "summary.json", out);
    return fr.outcome == FlowOutcome::admissibility_lost ? kAdmissibility : kOk;
}

int cmd_kenergy(const RunConfig& c)
{
    if (c.to_file.empty()) throw ConfigError("kenergy requires --to <field file>");
    auto [shape, to] = load_field_file(c.to_file, c);
    Field from(shape.size(), 0.0);
    if (!c.from_file.empty()) {
        auto [s2, f2] = io::read_field(c.from_file);
        if (!(s2 == shape)) throw ConfigError("kenergy endpoints live on different tori");
        from = f2;
    }
    ConformalTorus base = ConformalTorus::flat(shape);
    PathEnergy e = k_energy(base, from, to, c.panels);
    const double cn = 2.0 * area(base);
    json out{{"command", "kenergy"},
             {"value", e.value},
             {"quadrature_error", e.quadrature_error},
             {"c_n", cn},
             {"relative_ql", cn * e.value},
             {"mu", -e.value},
             {"panels", e.panels},
             {"config", config_json(c, "kenergy")}};
    io::write_json_atomic(resolve_outdir(c) / "kenergy.json", out);
    return kOk;
}

int cmd_verify_chern(const RunConfig& c)
{
    ChernIdentityReport r = verify_chern_identities(c.dim_n, c.trials, c.seed);
    const double bound_fd = 1e-8, bound_exact = 1e-10;
    const bool pass = r.max_derivative_residual < bound_fd
                      && r.max_route_residual < bound_exact
                      && r.max_binomial_residual < bound_exact
                      && r.max_trace_residual < bound_exact
                      && r.max_integrand_residual < bound_exact;
    json out{{"command", "verify-chern"},
             {"n", r.n},
             {"trials", r.trials},
             {"seed", r.seed},
             {"max_residuals", json{{"derivative_vs_fd", r.max_derivative_residual},
                                    {"minor_vs_newton", r.max_route_residual},
                                    {"binomial_classes", r.max_binomial_residual},
                                    {"trace_identity", r.max_trace_residual},
                                    {"n2_integrand", r.max_integrand_residual}}},
             {"bounds", json{{"derivative_vs_fd", bound_fd}, {"exact_identities", bound_exact}}},
             {"pass", pass},
             {"config", config_json(c, "verify-chern")}};
    io::write_json_atomic(resolve_outdir(c) / "verify_chern.json", out);
    return pass ? kOk : kCheckFailure;
}

int cmd_torsion_variation(const RunConfig& c)
{
    auto [shape, phi] = source_field(c);
    ConformalTorus m{shape, phi};
    Field dir;
    if (!c.direction_file.empty()) {
        auto [s2, f2] = load_field_file(c.direction_file, c);
        if (!(s2 == shape)) throw ConfigError("direction field lives on a different torus");
        dir = f2;
    } else {
        dir = random_band_limited(shape, c.dir_kmax, c.dir_amplitude, c.seed + 1);
    }
    const double fd = torsion_variation_fd(m, dir, c.fd_h, c.fd_order);
    const double quad = torsion_variation_quadrature(m, dir);
    json out{{"command", "torsion-variation"},
             {"metric_id", metric_id(m)},
             {"fd", fd},
             {"quadrature", quad},
             {"difference", fd - quad},
             {"h", c.fd_h},
             {"order", c.fd_order},
             {"config", config_json(c, "torsion-variation")}};
    io::write_json_atomic(resolve_outdir(c) / "torsion_variation.json", out);
    return kOk;
}

void add_common(CLI::App* cmd, RunConfig& c, std::string& config_path)
{
    cmd->add_option("--config", config_path, "JSON config file (flags override fields)");
    cmd->add_option("--tau-re", c.tau_re, "real part of tau");
    cmd->add_option("--tau-im", c.tau_im, "imaginary part of tau (> 0)");
    cmd->add_option("--N", c.N, "grid size per side (power of two >= 8)");
    cmd->add_option("--seed", c.seed, "RNG seed for random fields");
    cmd->add_option("--field-file", c.field_file, "metric/potential field file");
    cmd->add_option("--amplitude", c.amplitude, "sup-norm of a random band-limited field");
    cmd->add_option("--kmax", c.kmax, "max frequency of the random field (<= N/4)");
    cmd->add_option("--output", c.output, "output directory (env QUILLEN_OUT overrides)");
}

} // namespace

int main(int argc, char** argv)
{
    RunConfig cfg;
    std::string config_path, file_command;

    // the config file seeds the defaults, so it must load before CLI11 parses
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--config" && i + 1 < argc)
            config_path = argv[i + 1];
        else if (a.rfind("--config=", 0) == 0)
            config_path = a.substr(9);
    }
    if (!config_path.empty()) {
        try {
            apply_config_file(config_path, cfg, file_command);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return kConfigError;
        }
    }

    CLI::App app{"zeta determinants, torsion, and curvature flows on conformal tori"};
    app.require_subcommand(1);
    std::string dummy_config;

    CLI::App* det = app.add_subcommand("det", "zeta-regularized log det' of the Laplacian");
    add_common(det, cfg, dummy_config);
    det->add_option("--method", cfg.method, "zeta | polyakov | epstein");

    CLI::App* flow = app.add_subcommand("flow", "run a curvature flow and record its trace");
    add_common(flow, cfg, dummy_config);
    flow->add_option("--flow-kind", cfg.flow_kind, "ricci | ricci-potential | qL");
    flow->add_option("--t-end", cfg.fc.t_end, "flow horizon");
    flow->add_option("--dt-init", cfg.fc.dt_init, "initial step");
    flow->add_option("--rel-tol", cfg.fc.rel_tol, "relative step tolerance");
    flow->add_option("--abs-tol", cfg.fc.abs_tol, "absolute step tolerance");
    flow->add_option("--max-steps", cfg.fc.max_steps, "accepted-step limit");
    flow->add_option("--records", cfg.fc.records, "trace rows beyond t = 0");
    flow->add_option("--target-residual", cfg.fc.target_residual,
                     "stop when sup|s - s̄| falls below (0 = off)");
    flow->add_option("--admissibility-delta", cfg.fc.admissibility_delta,
                     "potential-chart admissibility margin");
    flow->add_option("--cfl-margin", cfg.fc.cfl_margin, "explicit-step CFL safety factor");
    flow->add_option("--det-n", cfg.det_n, "eigensolve grid for det checkpoints (0 = off)");
    flow->add_option("--det-checkpoints", cfg.det_checkpoints, "number of det checkpoints");

    CLI::App* ken = app.add_subcommand("kenergy", "K-energy between two potentials");
    add_common(ken, cfg, dummy_config);
    ken->add_option("--from", cfg.from_file, "start potential field file (default: zero)");
    ken->add_option("--to", cfg.to_file, "end potential field file");
    ken->add_option("--panels", cfg.panels, "Gauss-Legendre panels (even)");

    CLI::App* vch = app.add_subcommand("verify-chern", "randomized Chern/Todd identity suite");
    add_common(vch, cfg, dummy_config);
    vch->add_option("--n", cfg.dim_n, "complex dimension (1..4)");
    vch->add_option("--trials", cfg.trials, "random trials");

    CLI::App* tv = app.add_subcommand("torsion-variation",
                                      "d/du log T0 along a potential direction, FD vs quadrature");
    add_common(tv, cfg, dummy_config);
    tv->add_option("--direction-file", cfg.direction_file, "direction field file");
    tv->add_option("--dir-amplitude", cfg.dir_amplitude, "random direction sup-norm");
    tv->add_option("--dir-kmax", cfg.dir_kmax, "random direction max frequency");
    tv->add_option("--fd-h", cfg.fd_h, "finite-difference step");
    tv->add_option("--order", cfg.fd_order, "finite-difference order (2 or 4)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    CLI::App* active = app.get_subcommands().front();
    const std::string command = active->get_name();
    cfg.torus_explicit = cfg.torus_explicit || active->count("--tau-re") > 0
                         || active->count("--tau-im") > 0 || active->count("--N") > 0;
    if (!file_command.empty() && file_command != command) {
        std::fprintf(stderr, "error: config file declares command '%s' but '%s' was invoked\n",
                     file_command.c_str(), command.c_str());
        return kConfigError;
    }

    try {
        if (command == "det") return cmd_det(cfg);
        if (command == "flow") return cmd_flow(cfg);
        if (command == "kenergy") return cmd_kenergy(cfg);
        if (command == "verify-chern") return cmd_verify_chern(cfg);
        return cmd_torsion_variation(cfg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    } catch (const AdmissibilityError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kAdmissibility;
    } catch (const AreaMismatchError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kAdmissibility;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kSolverFailure;
    }
}
