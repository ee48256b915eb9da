#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>

#include "fpi/analysis.hpp"
#include "fpi/config.hpp"
#include "fpi/lowerbound.hpp"
#include "fpi/operators.hpp"
#include "fpi/pep.hpp"
#include "fpi/pgextra.hpp"
#include "fpi/schedules.hpp"

using namespace fpi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAuditFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

std::string default_output_dir() {
    const char* env = std::getenv("FPI_OUTPUT_DIR");
    return env && *env ? env : ".";
}

Schedule schedule_from_spec(const std::string& spec) {
    if (spec == "picard") return Schedule::picard();
    if (spec == "ohm") return Schedule::ohm();
    if (spec.rfind("km:", 0) == 0) {
        double l = std::stod(spec.substr(3));
        return Schedule::km([l](int) { return l; });
    }
    if (spec.rfind("halpern:", 0) == 0) {
        double l = std::stod(spec.substr(8));
        return Schedule::halpern([l](int) { return l; });
    }
    throw CLI::ValidationError("--schedule", "unknown schedule " + spec);
}

Vec default_start(const Operator& op) {
    if (op.kind() == "rotation_shift") return Vec{1.0, 0.0, 0.0};
    return Vec(op.dimension());
}

struct AuditSpec {
    EnvelopeId id;
    AuditQuantity quantity;
};

// audit names attach a named envelope to the measured quantity it bounds
std::vector<AuditSpec> audits_from_name(const std::string& name, const Schedule& s) {
    if (name == "km-optimal") {
        // the optimized constant-lambda rates: lambda 0 for the normalized
        // iterate, lambda 1/2 for the residual forms
        if (s.kind() == Schedule::Kind::picard)
            return {{EnvelopeId::picard_norm_iter, AuditQuantity::norm_iter_dist_v_sq}};
        return {{EnvelopeId::km_half_fpr, AuditQuantity::cesaro_dist_v_sq},
                {EnvelopeId::km_half_fpr, AuditQuantity::fpr_normgap_sq}};
    }
    if (name == "anchored-optimal")
        return {{EnvelopeId::ohm_norm_iter, AuditQuantity::norm_iter_dist_v_sq},
                {EnvelopeId::ohm_fpr_normgap, AuditQuantity::fpr_normgap_sq},
                {EnvelopeId::ohm_fpr_dist, AuditQuantity::fpr_dist_v_sq}};
    if (name == "km-norm-iter")
        return {{EnvelopeId::km_norm_iter, AuditQuantity::norm_iter_dist_v_sq}};
    if (name == "km-fpr")
        return {{EnvelopeId::km_fpr, AuditQuantity::cesaro_dist_v_sq},
                {EnvelopeId::km_fpr, AuditQuantity::fpr_normgap_sq}};
    if (name == "anchored-norm-iter")
        return {{EnvelopeId::halpern_norm_iter, AuditQuantity::norm_iter_dist_v_sq}};
    if (name == "anchored-fpr") return {{EnvelopeId::ohm_fpr_dist, AuditQuantity::fpr_dist_v_sq}};
    throw CLI::ValidationError("--audit", "unknown audit " + name);
}

RateEnvelope envelope_for(const AuditSpec& spec, double r0_sq, const Schedule& s) {
    switch (spec.id) {
        case EnvelopeId::km_norm_iter:
        case EnvelopeId::km_fpr:
        case EnvelopeId::halpern_norm_iter: return make_envelope(spec.id, r0_sq, s);
        default: return make_envelope(spec.id, r0_sq);
    }
}

int cmd_iterate(const std::string& op_spec, const std::string& op_file,
                const std::string& schedule_spec, int horizon, const std::vector<double>& x0_flag,
                const std::string& audit_name, std::string out_path, bool strict) {
    Operator op = op_file.empty() ? operator_from_spec(op_spec)
                                  : operator_from_config(Config::parse_file(op_file));
    Schedule schedule = schedule_from_spec(schedule_spec);
    Vec x0 = x0_flag.empty() ? default_start(op) : Vec(x0_flag);

    Trajectory traj = run(op, schedule, x0, horizon);
    if (traj.aborted_nonfinite) {
        std::fprintf(stderr, "iteration diverged after %zu records\n", traj.records.size());
        return kExitNumerical;
    }
    if (schedule.kind() == Schedule::Kind::ohm && op.ground_truth() &&
        op.ground_truth()->x_star)
        traj = with_lyapunov(op, std::move(traj), *op.ground_truth()->x_star);

    if (out_path.empty()) out_path = default_output_dir() + "/trajectory.csv";
    write_trajectory_csv(traj, out_path);
    std::printf("wrote %s (%zu records)\n", out_path.c_str(), traj.records.size());

    bool audit_failed = false;
    if (!audit_name.empty()) {
        if (!op.ground_truth() || !op.ground_truth()->x_star) {
            std::fprintf(stderr, "audit requires an operator with a known witness point\n");
            return kExitUsage;
        }
        double r0_sq = norm_sq(x0 - *op.ground_truth()->x_star);
        for (const AuditSpec& spec : audits_from_name(audit_name, schedule)) {
            AuditReport rep = audit_rate(traj, envelope_for(spec, r0_sq, schedule), spec.quantity);
            std::printf("audit %s on %s: min_slack=%.6e at k=%d -> %s\n", audit_name.c_str(),
                        audit_quantity_name(spec.quantity), rep.min_slack, rep.argmin_k,
                        rep.pass ? "pass" : "FAIL");
            std::ofstream audit_out(out_path + "." + audit_quantity_name(spec.quantity) +
                                    ".audit.csv");
            audit_out << audit_csv_string(rep);
            audit_failed = audit_failed || !rep.pass;
        }
    }
    return (strict && audit_failed) ? kExitAuditFailure : kExitOk;
}

IterationCallback picard_callback() {
    return [](const Vec& x0, const std::vector<Vec>& residuals) {
        Vec x = x0;
        for (const Vec& r : residuals) axpy(-1.0, r, x);
        return x;
    };
}

IterationCallback ohm_callback() {
    return [](const Vec& x0, const std::vector<Vec>& residuals) {
        std::size_t k = residuals.size();
        Vec x = x0;
        for (std::size_t i = 0; i < k; ++i)
            axpy(-(static_cast<double>(i) + 1.0) / (static_cast<double>(k) + 1.0), residuals[i], x);
        return x;
    };
}

IterationCallback heavy_ball_callback() {
    auto xs = std::make_shared<std::vector<Vec>>();
    return [xs](const Vec& x0, const std::vector<Vec>& residuals) {
        if (xs->empty()) xs->push_back(x0);
        Vec next = xs->back();
        axpy(-0.8, residuals.back(), next);
        if (xs->size() >= 2) next += 0.4 * (xs->back() - (*xs)[xs->size() - 2]);
        xs->push_back(next);
        return next;
    };
}

int cmd_lowerbound(std::size_t k, int draws, std::uint64_t seed, bool resisting) {
    if (k < 1) {
        std::fprintf(stderr, "lowerbound: --k must be >= 1\n");
        return kExitUsage;
    }
    Rng rng(seed);
    Operator op = make_worst_case(k, 1.0, worst_case_default_alpha(k, 1.0));
    Trajectory pic = run(op, Schedule::picard(), Vec(k + 1), static_cast<int>(k));
    Trajectory ohm = run(op, Schedule::ohm(), Vec(k + 1), static_cast<int>(k));

    bool all_pass = true;
    auto check = [&](const char* label, const SpanTrace& trace) {
        LowerBoundReport rep = verify_lower_bound(op, trace);
        all_pass = all_pass && rep.pass;
        std::printf("%-24s dist: %.6e >= %.6e, gap: %.6e >= %.6e -> %s\n", label,
                    rep.lhs_dist_sq, rep.rhs_dist_sq, rep.lhs_gap_sq, rep.rhs_gap_sq,
                    rep.pass ? "pass" : "FAIL");
    };
    check("picard normalized", span_trace_from_trajectory(pic, k, uniform_weights(k)));
    check("anchored normalized", span_trace_from_trajectory(ohm, k, anchored_weights(k)));
    for (int d = 0; d < draws; ++d) {
        std::vector<double> w(k);
        double total = 0.0;
        for (double& x : w) {
            x = -std::log(1.0 - rng.uniform());
            total += x;
        }
        for (double& x : w) x /= total;
        SpanTrace t = span_trace_from_trajectory(pic, k, w);
        LowerBoundReport rep = verify_lower_bound(op, t);
        all_pass = all_pass && rep.pass;
    }
    std::printf("%d random convex-weight draws audited\n", draws);

    if (resisting) {
        std::size_t ambient = 2 * k - 1;
        std::vector<std::pair<const char*, IterationCallback>> algos;
        algos.emplace_back("picard", picard_callback());
        algos.emplace_back("anchored", ohm_callback());
        algos.emplace_back("heavy-ball", heavy_ball_callback());
        for (auto& [name, algo] : algos) {
            Vec v = random_gaussian_vec(ambient, rng);
            v *= 1.0 / norm(v);
            Vec x0 = random_gaussian_vec(ambient, rng);
            ResistingResult res = resisting_rotation(algo, op, x0, v, ambient, k);
            ZeroRespectReport zr = audit_zero_respecting(res);
            LowerBoundReport rep = verify_lower_bound(op, res.pulled_back);
            all_pass = all_pass && rep.pass && zr.pass;
            std::printf("resisting vs %-11s zero-respecting leak %.2e, bounds -> %s\n", name,
                        zr.worst_leak, (rep.pass && zr.pass) ? "pass" : "FAIL");
        }
    }
    return all_pass ? kExitOk : kExitAuditFailure;
}

std::vector<int> parse_k_range(const std::string& text) {
    std::size_t dots = text.find("..");
    std::vector<int> ks;
    if (dots == std::string::npos) {
        ks.push_back(std::stoi(text));
    } else {
        int lo = std::stoi(text.substr(0, dots));
        int hi = std::stoi(text.substr(dots + 2));
        for (int k = lo; k <= hi; ++k) ks.push_back(k);
    }
    return ks;
}

int cmd_pep_gen(int k, std::string out, bool dump) {
    pep::Problem p = pep::build(k);
    if (out.empty()) out = default_output_dir() + "/pep" + std::to_string(k) + ".dat-s";
    pep::export_sdpa(p, out);
    std::printf("wrote %s (%zu constraints, order %d)\n", out.c_str(), p.constraints.size(),
                p.order);
    if (dump) {
        std::string dump_path = out + ".txt";
        std::ofstream dout(dump_path, std::ios::binary);
        dout << pep::text_dump(p);
        std::printf("wrote %s\n", dump_path.c_str());
    }
    return kExitOk;
}

int cmd_pep_solve(const std::string& range, double tol, int max_iters, int jobs,
                  const std::string& out_dir) {
    std::vector<int> ks = parse_k_range(range);
    pep::SolveOptions opts;
    opts.tol = tol;
    opts.max_iters = max_iters;

    std::vector<std::future<pep::SolveResult>> futures;
    std::size_t next = 0;
    std::vector<pep::SolveResult> results(ks.size());
    // bounded fan-out over a worker pool
    while (next < ks.size()) {
        std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)),
                                                  ks.size() - next);
        futures.clear();
        for (std::size_t b = 0; b < batch; ++b) {
            int k = ks[next + b];
            futures.push_back(std::async(std::launch::async, [k, opts] {
                return pep::solve(pep::build(k), opts);
            }));
        }
        for (std::size_t b = 0; b < batch; ++b) results[next + b] = futures[b].get();
        next += batch;
    }

    bool all_pass = true;
    std::printf("%4s %12s %12s %12s %10s %6s\n", "k", "value", "lower", "upper", "scaled",
                "status");
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const pep::SolveResult& res = results[i];
        pep::BoundsReport rep = pep::verify_bounds(ks[i], res.value, tol);
        all_pass = all_pass && rep.pass && res.converged;
        double scaled = res.value * (ks[i] + 1.0) * (ks[i] + 1.0);
        std::printf("%4d %12.8f %12.8f %12.8f %10.4f %6s\n", ks[i], res.value, rep.lower,
                    rep.upper, scaled, rep.pass ? "pass" : "FAIL");
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            std::ofstream csv(out_dir + "/pep_k" + std::to_string(ks[i]) + ".csv");
            csv << "k,value,raw_value,lower,upper,iterations,converged\n";
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%d,%d\n", ks[i],
                          res.value, res.raw_value, rep.lower, rep.upper, res.iterations,
                          res.converged ? 1 : 0);
            csv << buf;
        }
    }
    return all_pass ? kExitOk : kExitAuditFailure;
}

pgx::EdgeList parse_edge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open graph file " + path);
    pgx::EdgeList edges;
    int a, b;
    while (in >> a >> b) edges.push_back({a, b});
    return edges;
}

int cmd_pgextra(const std::string& config_path, pgx::ExperimentConfig cfg) {
    if (!config_path.empty()) {
        Config file = Config::parse_file(config_path);
        file.require_known_keys("instance", {"m", "n", "p", "epsilon", "seed", "objective"});
        file.require_known_keys("graph", {"builtin", "file"});
        file.require_known_keys("algo", {"alpha", "beta", "horizon", "variant"});
        file.require_known_keys("output", {"dir"});
        if (file.has("instance", "m")) cfg.chain.m = static_cast<int>(file.get_int("instance", "m"));
        if (file.has("instance", "n")) cfg.chain.n = static_cast<int>(file.get_int("instance", "n"));
        if (file.has("instance", "p")) cfg.chain.p = static_cast<int>(file.get_int("instance", "p"));
        if (file.has("instance", "epsilon")) cfg.chain.epsilon = file.get_double("instance", "epsilon");
        if (file.has("instance", "seed"))
            cfg.chain.seed = static_cast<std::uint64_t>(file.get_int("instance", "seed"));
        if (file.has("instance", "objective"))
            cfg.chain.zero_objective = file.get("instance", "objective") == "zero";
        if (file.has("graph", "file")) cfg.edges = parse_edge_file(file.get("graph", "file"));
        if (file.has("algo", "alpha")) cfg.alpha = file.get_double("algo", "alpha");
        if (file.has("algo", "beta")) cfg.beta = file.get_double("algo", "beta");
        if (file.has("algo", "horizon")) cfg.horizon = static_cast<int>(file.get_int("algo", "horizon"));
        if (file.has("algo", "variant")) cfg.variant = file.get("algo", "variant");
        if (file.has("output", "dir")) cfg.output_dir = file.get("output", "dir");
    }
    if (cfg.output_dir.empty()) cfg.output_dir = default_output_dir();

    pgx::ExperimentResult res = pgx::run_experiment(cfg);
    std::size_t K = res.picard.fpr_mnorm_sq.size() - 1;
    std::printf("displacement estimate |v|^2 = %.10g (metric norm)\n", res.v_hat_mnorm_sq);
    std::printf("%-8s nis[K]=%.8g fpr[K]=%.8g\n", res.picard.name.c_str(),
                res.picard.norm_iter_norm_sq[K], res.picard.fpr_mnorm_sq[K]);
    std::printf("%-8s nis[K]=%.8g fpr[K]=%.8g\n", res.anchored.name.c_str(),
                res.anchored.norm_iter_norm_sq[K], res.anchored.fpr_mnorm_sq[K]);
    std::printf("tail projection margins: residual %.3e, normalized iterate %.3e -> %s\n",
                res.tail_min_margin_fpr, res.tail_min_margin_norm_iter,
                res.projection_pass ? "pass" : "FAIL");
    std::printf("wrote CSVs under %s\n", cfg.output_dir.c_str());
    return res.projection_pass ? kExitOk : kExitAuditFailure;
}

int cmd_demo(const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);

    // counterexample trajectory: residual stays sqrt(2) away while the
    // normalized iterate homes in on the displacement
    Operator rot = make_counterexample();
    write_trajectory_csv(run(rot, Schedule::picard(), Vec{1.0, 0.0, 0.0}, 1000),
                         out_dir + "/rotation_picard.csv");

    // hard instance: the normalized-iterate error meets the envelope exactly
    Operator wc = make_worst_case(10, 1.0, worst_case_default_alpha(10, 1.0));
    Trajectory t = run(wc, Schedule::picard(), Vec(11), 10);
    AuditReport rep =
        audit_rate(t, make_envelope(EnvelopeId::picard_norm_iter, norm_sq(*wc.ground_truth()->x_star)),
                   AuditQuantity::norm_iter_dist_v_sq);
    std::printf("hard instance tightness: min slack %.3e at k=%d\n", rep.min_slack, rep.argmin_k);

    // small pep solve
    pep::SolveResult sdp = pep::solve(pep::build(3));
    std::printf("pep k=3 value %.6f in [%.6f, %.6f]\n", sdp.value,
                pep::verify_bounds(3, sdp.value).lower, pep::verify_bounds(3, sdp.value).upper);

    // a short decentralized run
    pgx::ExperimentConfig cfg;
    cfg.chain = pgx::ChainParams{5, 4, 5, 0.5, 42, false};
    cfg.alpha = cfg.beta = 0.01;
    cfg.horizon = 1000;
    cfg.output_dir = out_dir;
    pgx::ExperimentResult res = pgx::run_experiment(cfg);
    std::printf("pg-extra demo: |v|^2 ~ %.6g, files under %s\n", res.v_hat_mnorm_sq,
                out_dir.c_str());

    // an operator config to start from
    operator_to_config(wc).write_file(out_dir + "/worst_case_operator.cfg");
    std::printf("demo artifacts written to %s\n", out_dir.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fixed-point infeasibility toolkit"};
    app.require_subcommand(1);

    // iterate
    auto* iterate = app.add_subcommand("iterate", "run an operator under an iteration schedule");
    std::string op_spec, op_file, schedule_spec = "picard", audit_name, out_path;
    int horizon = 100;
    std::vector<double> x0_flag;
    bool strict = false;
    iterate->add_option("--op", op_spec, "operator spec, e.g. worst-case:k=10 or translation:v=0,0,1");
    iterate->add_option("--op-file", op_file, "operator config file");
    iterate->add_option("--schedule", schedule_spec, "picard | ohm | km:<lambda> | halpern:<lambda>");
    iterate->add_option("--k", horizon, "iteration horizon")->check(CLI::PositiveNumber);
    iterate->add_option("--x0", x0_flag, "start point (comma separated)")->delimiter(',');
    iterate->add_option("--audit", audit_name, "rate audit: km-optimal | anchored-optimal | km-norm-iter | km-fpr | anchored-norm-iter | anchored-fpr");
    iterate->add_option("--out", out_path, "trajectory csv path");
    iterate->add_flag("--strict", strict, "audit failures give a nonzero exit");

    // lowerbound
    auto* lower = app.add_subcommand("lowerbound", "audit the hard-instance inequalities");
    std::size_t lb_k = 8;
    int lb_draws = 100;
    std::uint64_t lb_seed = 1;
    bool lb_resisting = false;
    lower->add_option("--k", lb_k, "oracle-call budget");
    lower->add_option("--draws", lb_draws, "random convex-weight draws");
    lower->add_option("--seed", lb_seed, "rng seed");
    lower->add_flag("--resisting", lb_resisting, "also run the adversarial rotation");

    // pep gen / solve
    auto* pep_cmd = app.add_subcommand("pep", "worst-case semidefinite programs");
    pep_cmd->require_subcommand(1);
    auto* gen = pep_cmd->add_subcommand("gen", "emit the SDP in sparse exchange format");
    int gen_k = 5;
    std::string gen_out;
    bool gen_dump = false;
    gen->add_option("--k", gen_k, "iteration count")->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_out, "output path (.dat-s)");
    gen->add_flag("--dump", gen_dump, "also write the dense text dump");
    auto* solve = pep_cmd->add_subcommand("solve", "solve with the internal first-order method");
    std::string solve_range = "1..5", solve_out;
    double solve_tol = 1e-6;
    int solve_iters = 200000, solve_jobs = 4;
    solve->add_option("--k", solve_range, "k or range lo..hi");
    solve->add_option("--tol", solve_tol, "residual tolerance");
    solve->add_option("--max-iters", solve_iters, "iteration cap");
    solve->add_option("--jobs", solve_jobs, "concurrent solves");
    solve->add_option("--out", solve_out, "per-k csv directory");

    // pgextra
    auto* pgq = app.add_subcommand("pgextra", "decentralized infeasibility experiment");
    std::string pg_config;
    pgx::ExperimentConfig pg_cfg;
    pg_cfg.chain = pgx::ChainParams{11, 10, 10, 0.5, 1, false};
    pg_cfg.horizon = 50000;
    std::string pg_graph_file, pg_objective = "random", pg_out;
    pgq->add_option("--config", pg_config, "experiment config file");
    pgq->add_option("--m", pg_cfg.chain.m, "variable count");
    pgq->add_option("--n", pg_cfg.chain.n, "block order");
    pgq->add_option("--p", pg_cfg.chain.p, "agent count");
    pgq->add_option("--epsilon", pg_cfg.chain.epsilon, "chain parameter");
    pgq->add_option("--seed", pg_cfg.chain.seed, "instance seed");
    pgq->add_option("--alpha", pg_cfg.alpha, "primal step");
    pgq->add_option("--beta", pg_cfg.beta, "dual step");
    pgq->add_option("--horizon", pg_cfg.horizon, "sweep count");
    pgq->add_option("--variant", pg_cfg.variant, "picard | ohm | km:<lambda>");
    pgq->add_option("--graph-file", pg_graph_file, "edge list file (i j per line)");
    pgq->add_option("--objective", pg_objective, "random | zero");
    pgq->add_option("--out", pg_out, "output directory");

    // demo
    auto* demo = app.add_subcommand("demo", "small end-to-end sampler");
    std::string demo_out;
    demo->add_option("--out", demo_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (iterate->parsed())
            return cmd_iterate(op_spec, op_file, schedule_spec, horizon, x0_flag, audit_name,
                               out_path, strict);
        if (lower->parsed()) return cmd_lowerbound(lb_k, lb_draws, lb_seed, lb_resisting);
        if (pep_cmd->parsed()) {
            if (gen->parsed()) return cmd_pep_gen(gen_k, gen_out, gen_dump);
            return cmd_pep_solve(solve_range, solve_tol, solve_iters, solve_jobs, solve_out);
        }
        if (pgq->parsed()) {
            if (!pg_graph_file.empty()) pg_cfg.edges = parse_edge_file(pg_graph_file);
            pg_cfg.chain.zero_objective = pg_objective == "zero";
            if (!pg_out.empty()) pg_cfg.output_dir = pg_out;
            return cmd_pgextra(pg_config, pg_cfg);
        }
        if (demo->parsed())
            return cmd_demo(demo_out.empty() ? default_output_dir() + "/fpi-demo" : demo_out);
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
    return kExitUsage;
}
