// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure.  Everything runs from fixed seeds.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "fpi/analysis.hpp"
#include "fpi/lowerbound.hpp"
#include "fpi/operators.hpp"
#include "fpi/pep.hpp"
#include "fpi/pgextra.hpp"
#include "fpi/schedules.hpp"

using namespace fpi;

namespace {

int g_failures = 0;

void report(int criterion, const char* label, bool pass, const std::string& detail) {
    std::printf("[%s] %d. %s%s%s\n", pass ? "PASS" : "FAIL", criterion, label,
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

std::vector<Operator> acceptance_zoo() { return make_affine_zoo(20, 8, 0xf00d); }

Vec zoo_start(const Operator& op, std::uint64_t seed) {
    Rng rng(seed);
    return *op.ground_truth()->x_star + 2.0 * random_gaussian_vec(op.dimension(), rng);
}

// 1. Picard normalized-iterate error meets the hard-instance envelope exactly.
void criterion_tightness() {
    auto t0 = std::chrono::steady_clock::now();
    double worst_rel = 0.0;
    for (std::size_t k : {2, 5, 10, 25, 50}) {
        Operator op = make_worst_case(k, 1.0, std::sqrt(static_cast<double>(k)));
        Certificate cert = estimate_idv(op, Vec(k + 1), static_cast<int>(k));
        double err_sq = norm_sq(cert.v_hat - op.ground_truth()->v);
        double bound = 4.0 / (static_cast<double>(k) * k) * norm_sq(*op.ground_truth()->x_star);
        worst_rel = std::max(worst_rel, std::abs(err_sq - bound) / bound);
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(1, "tightness sandwich at k in {2,5,10,25,50}", worst_rel <= 1e-8 && secs < 1.0,
           "worst relative gap " + fmt(worst_rel));
}

// 2. Rotation counterexample: residual stuck at distance sqrt(2), normalized
//    iterate within 2/k of the displacement.
void criterion_counterexample() {
    auto t0 = std::chrono::steady_clock::now();
    Operator op = make_counterexample();
    Trajectory t = run(op, Schedule::picard(), Vec{1.0, 0.0, 0.0}, 10000);
    double worst_fpr = 0.0, worst_nit = 0.0;
    for (const TrajectoryRecord& r : t.records) {
        worst_fpr = std::max(worst_fpr, std::abs(*r.fpr_dist_v_sq - 2.0));
        if (r.k >= 1)
            worst_nit = std::max(worst_nit, *r.norm_iter_dist_v_sq -
                                                4.0 / (static_cast<double>(r.k) * r.k));
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(2, "rotation counterexample over 10^4 steps",
           worst_fpr <= 1e-12 && worst_nit <= 1e-12 && secs < 1.0,
           "fpr gap " + fmt(worst_fpr) + ", envelope overshoot " + fmt(worst_nit));
}

// 3. Anchored envelopes on the random-operator zoo.
void criterion_ohm_envelopes() {
    auto t0 = std::chrono::steady_clock::now();
    double min_slack = 1e300;
    std::uint64_t seed = 100;
    for (const Operator& op : acceptance_zoo()) {
        Vec x0 = zoo_start(op, seed++);
        double r0 = norm_sq(x0 - *op.ground_truth()->x_star);
        Trajectory t = run(op, Schedule::ohm(), x0, 500);
        for (auto [id, q] : {std::pair{EnvelopeId::ohm_norm_iter, AuditQuantity::norm_iter_dist_v_sq},
                             std::pair{EnvelopeId::ohm_fpr_normgap, AuditQuantity::fpr_normgap_sq},
                             std::pair{EnvelopeId::ohm_fpr_dist, AuditQuantity::fpr_dist_v_sq}}) {
            AuditReport rep = audit_rate(t, make_envelope(id, r0), q, 1e-8);
            min_slack = std::min(min_slack, rep.min_slack);
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(3, "anchored envelopes over the 20-operator zoo, k <= 500",
           min_slack >= -1e-8 && secs < 10.0, "min slack " + fmt(min_slack));
}

// 4. Potential decreases and starts below 3 R^2.
void criterion_lyapunov() {
    double worst_rise = -1e300;
    double worst_first = -1e300;
    std::uint64_t seed = 200;
    for (const Operator& op : acceptance_zoo()) {
        Vec x0 = zoo_start(op, seed++);
        const Vec& xs = *op.ground_truth()->x_star;
        Trajectory t = run(op, Schedule::ohm(), x0, 201);
        double prev = lyapunov(op, t, xs, 1);
        worst_first = std::max(worst_first, prev - 3.0 * norm_sq(x0 - xs));
        for (int k = 2; k <= 201; ++k) {
            double cur = lyapunov(op, t, xs, k);
            worst_rise = std::max(worst_rise, cur - prev);
            prev = cur;
        }
    }
    report(4, "potential monotone over the zoo, k <= 200",
           worst_rise <= 1e-8 && worst_first <= 1e-9,
           "worst rise " + fmt(worst_rise) + ", V1 - 3R^2 " + fmt(worst_first));
}

// 5. Affine identity: anchored residual = shifted Picard normalized iterate.
void criterion_affine_identity() {
    double worst = 0.0;
    std::uint64_t seed = 300;
    for (const Operator& op : acceptance_zoo()) {
        Vec x0 = zoo_start(op, seed++);
        Trajectory ohm = run(op, Schedule::ohm(), x0, 300);
        Trajectory pic = run(op, Schedule::picard(), x0, 301);
        for (int k = 0; k <= 300; ++k) {
            Vec rhs = (-1.0 / (k + 1)) * (pic.records[static_cast<std::size_t>(k) + 1].x - x0);
            worst = std::max(worst, norm(ohm.records[static_cast<std::size_t>(k)].fpr - rhs));
        }
    }
    report(5, "affine anchored residual vs shifted Picard normalized iterate, k <= 300",
           worst <= 1e-10, "max deviation " + fmt(worst));
}

// 6. Hard-instance inequalities and the adversarial rotation.
void criterion_lower_bounds() {
    auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;
    Rng rng(0xacce55);
    for (std::size_t k : {4, 8, 16}) {
        Operator op = make_worst_case(k, 1.0, worst_case_default_alpha(k, 1.0));
        Trajectory pic = run(op, Schedule::picard(), Vec(k + 1), static_cast<int>(k));
        for (int draw = 0; draw < 100; ++draw) {
            std::vector<double> w(k);
            double total = 0.0;
            for (double& x : w) {
                x = -std::log(1.0 - rng.uniform());
                total += x;
            }
            for (double& x : w) x /= total;
            if (!verify_lower_bound(op, span_trace_from_trajectory(pic, k, w)).pass) {
                pass = false;
                detail = "weight draw failed at k=" + std::to_string(k);
            }
        }
    }

    const std::size_t K = 6;
    const std::size_t ambient = 2 * K - 1;
    Operator inner = make_worst_case(K, 1.0, worst_case_default_alpha(K, 1.0));
    std::vector<std::pair<const char*, IterationCallback>> algos;
    algos.emplace_back("picard", [](const Vec& x0, const std::vector<Vec>& residuals) {
        Vec x = x0;
        for (const Vec& r : residuals) axpy(-1.0, r, x);
        return x;
    });
    algos.emplace_back("anchored", [](const Vec& x0, const std::vector<Vec>& residuals) {
        std::size_t k = residuals.size();
        Vec x = x0;
        for (std::size_t i = 0; i < k; ++i)
            axpy(-(static_cast<double>(i) + 1.0) / (static_cast<double>(k) + 1.0), residuals[i], x);
        return x;
    });
    auto xs = std::make_shared<std::vector<Vec>>();
    algos.emplace_back("heavy-ball", [xs](const Vec& x0, const std::vector<Vec>& residuals) {
        if (xs->empty()) xs->push_back(x0);
        Vec next = xs->back();
        axpy(-0.8, residuals.back(), next);
        if (xs->size() >= 2) next += 0.4 * (xs->back() - (*xs)[xs->size() - 2]);
        xs->push_back(next);
        return next;
    });
    for (auto& [name, algo] : algos) {
        Vec v = random_gaussian_vec(ambient, rng);
        v *= 1.0 / norm(v);
        Vec x0 = random_gaussian_vec(ambient, rng);
        ResistingResult res = resisting_rotation(algo, inner, x0, v, ambient, K);
        if (!audit_zero_respecting(res).pass ||
            !verify_lower_bound(inner, res.pulled_back).pass) {
            pass = false;
            detail = std::string("resisting rotation failed vs ") + name;
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    pass = pass && secs < 5.0;
    report(6, "hard-instance audits and the adversarial rotation at K=6", pass, detail);
}

// 7. Worst-case SDP values bracketed with a growing scaled trend, k = 1..15.
void criterion_pep() {
    auto t0 = std::chrono::steady_clock::now();
    const double tol = 1e-6;
    std::vector<int> ks;
    for (int k = 1; k <= 15; ++k) ks.push_back(k);
    std::vector<pep::SolveResult> results(ks.size());
    std::size_t next = 0;
    while (next < ks.size()) {
        std::size_t batch = std::min<std::size_t>(4, ks.size() - next);
        std::vector<std::future<pep::SolveResult>> futs;
        for (std::size_t b = 0; b < batch; ++b) {
            int k = ks[next + b];
            futs.push_back(std::async(std::launch::async, [k, tol] {
                pep::SolveOptions opts;
                opts.tol = tol;
                return pep::solve(pep::build(k), opts);
            }));
        }
        for (std::size_t b = 0; b < batch; ++b) results[next + b] = futs[b].get();
        next += batch;
    }
    bool pass = true;
    std::string detail;
    double prev_scaled = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        pep::BoundsReport rep = pep::verify_bounds(ks[i], results[i].value, tol);
        if (!rep.pass || !results[i].converged) {
            pass = false;
            detail = "bracket failed at k=" + std::to_string(ks[i]);
        }
        double scaled = results[i].value * (ks[i] + 1.0) * (ks[i] + 1.0);
        if (ks[i] >= 2 && ks[i] <= 15 && scaled < prev_scaled - 1e-3) {
            pass = false;
            detail = "scaled value decreased at k=" + std::to_string(ks[i]);
        }
        if (ks[i] >= 1) prev_scaled = scaled;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    pass = pass && secs < 300.0;
    if (detail.empty())
        detail = "scaled trend " + fmt(results[1].value * 9.0) + " -> " +
                 fmt(results[14].value * 256.0) + " in " + fmt(secs) + "s";
    report(7, "worst-case SDP bracketing and trend, k = 1..15", pass, detail);
}

// 8. Decentralized experiment at the reduced scale.
void criterion_pgextra() {
    auto t0 = std::chrono::steady_clock::now();
    pgx::ExperimentConfig cfg;
    cfg.chain = pgx::ChainParams{5, 4, 5, 0.5, 42, false};
    cfg.alpha = cfg.beta = 0.01;
    cfg.horizon = 5000;
    pgx::ExperimentResult res = pgx::run_experiment(cfg);
    std::size_t K = res.picard.fpr_mnorm_sq.size() - 1;
    double a = res.picard.norm_iter_norm_sq[K];
    double b = res.anchored.norm_iter_norm_sq[K];
    bool nis_agree = std::abs(a - b) <= 0.05 * std::max(a, b);
    bool fpr_order = res.anchored.fpr_mnorm_sq[K] <= res.picard.fpr_mnorm_sq[K];
    bool proj = res.projection_pass;
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(8, "decentralized run: (a) agreement (b) residual order (c) tail projection",
           nis_agree && fpr_order && proj && secs < 120.0,
           "nis gap " + fmt(std::abs(a - b) / std::max(a, b)) + ", tail margins " +
               fmt(res.tail_min_margin_fpr) + "/" + fmt(res.tail_min_margin_norm_iter));
}

// 9. Property suites re-run under the default seeds.
void criterion_properties() {
    bool pass = true;
    std::string detail;
    auto fail = [&](const std::string& what) {
        pass = false;
        if (detail.empty()) detail = what;
    };

    // nonexpansiveness audits over the built-in operators
    std::vector<Operator> ops;
    ops.push_back(make_translation(Vec{0.0, 0.0, 1.0}));
    ops.push_back(make_counterexample());
    ops.push_back(make_worst_case(6, 1.0, worst_case_default_alpha(6, 1.0)));
    {
        Rng rng(0xbeef);
        ops.push_back(rotate_operator(make_worst_case(4, 1.0, 2.0), random_orthogonal(5, rng),
                                      random_gaussian_vec(5, rng)));
    }
    for (const Operator& op : acceptance_zoo()) ops.push_back(op);
    for (const Operator& op : ops)
        if (audit_nonexpansive(op, 100, 0x5eed).flagged) fail("nonexpansiveness audit " + op.kind());

    // km residual monotonicity
    {
        std::uint64_t seed = 400;
        for (int trial = 0; trial < 3; ++trial) {
            Operator op = make_random_affine(8, seed++, 1.0, 1);
            Vec x0 = zoo_start(op, seed++);
            Trajectory t = run(op, Schedule::km([](int k) { return k % 2 ? 0.25 : 0.5; }), x0, 80);
            for (std::size_t k = 0; k + 1 < t.records.size(); ++k)
                if (norm(t.records[k + 1].fpr) > norm(t.records[k].fpr) + 1e-10)
                    fail("km residual monotonicity");
        }
    }

    // recursion closed forms
    if (std::abs(halpern_theta(Schedule::ohm(), 10) - 5.0) > 1e-13) fail("theta closed form");
    if (std::abs(halpern_theta(Schedule::halpern([](int) { return 0.0; }), 10) - 10.0) > 1e-13)
        fail("theta closed form at lambda 0");
    {
        Schedule mann_pic = Schedule::mann([](int k, int i) { return i == k ? 1.0 : 0.0; });
        if (std::abs(mann_alpha(mann_pic, 7) - 7.0) > 1e-13) fail("alpha closed form");
        Schedule mann_ohm = Schedule::mann([](int k, int i) {
            if (i == k) return static_cast<double>(k) / (k + 1);
            if (i == 0) return 1.0 / (k + 1);
            return 0.0;
        });
        if (std::abs(mann_alpha(mann_ohm, 10) - 5.0) > 1e-12) fail("anchored alpha closed form");
    }

    // gram faithfulness of the worst-case SDP
    {
        const int k = 4;
        pep::Problem p = pep::build(k);
        Operator op = make_random_affine(9, 777, 1.0, 1);
        Rng rng(12);
        Vec dir = random_gaussian_vec(9, rng);
        dir *= 0.9 / norm(dir);
        Vec x0 = *op.ground_truth()->x_star + dir;
        Trajectory t = run(op, Schedule::ohm(), x0, k);
        SymMatrix z = pep::gram_from_trajectory(op, t, k);
        for (const pep::Constraint& c : p.constraints) {
            double tr = trace_product(c.matrix, z);
            bool ok = true;
            switch (c.sense) {
                case pep::Sense::ge_zero: ok = tr >= -1e-8; break;
                case pep::Sense::le_zero: ok = tr <= 1e-8; break;
                case pep::Sense::le_one: ok = tr <= 1.0 + 1e-8; break;
            }
            if (!ok) fail("gram feasibility");
        }
        if (std::abs(trace_product(p.objective, z) - *t.records[k].fpr_dist_v_sq) >
            1e-10 * std::max(1.0, *t.records[k].fpr_dist_v_sq))
            fail("gram objective identity");
    }

    // sdpa round-trip
    {
        pep::Problem p = pep::build(3);
        pep::Problem q = pep::parse_sdpa_string(pep::sdpa_string(p));
        if ((q.objective - p.objective).frobenius_norm() != 0.0 ||
            q.constraints.size() != p.constraints.size())
            fail("sdpa round-trip");
        for (std::size_t c = 0; c < p.constraints.size(); ++c)
            if ((q.constraints[c].matrix - p.constraints[c].matrix).frobenius_norm() != 0.0 ||
                q.constraints[c].sense != p.constraints[c].sense)
                fail("sdpa round-trip");
    }

    // byte-identical reruns
    {
        Operator op = make_counterexample();
        std::string a = trajectory_csv_string(run(op, Schedule::picard(), Vec{1.0, 0.0, 0.0}, 64));
        std::string b = trajectory_csv_string(run(op, Schedule::picard(), Vec{1.0, 0.0, 0.0}, 64));
        if (a != b) fail("trajectory rerun not byte-identical");

        pgx::ExperimentConfig cfg;
        cfg.chain = pgx::ChainParams{3, 2, 2, 0.5, 9, false};
        cfg.alpha = cfg.beta = 0.05;
        cfg.horizon = 120;
        pgx::ExperimentResult r1 = pgx::run_experiment(cfg);
        pgx::ExperimentResult r2 = pgx::run_experiment(cfg);
        for (std::size_t k = 0; k < r1.picard.fpr_mnorm_sq.size(); ++k)
            if (r1.picard.fpr_mnorm_sq[k] != r2.picard.fpr_mnorm_sq[k])
                fail("experiment rerun not bit-identical");
    }

    report(9, "module property suites under the default seeds", pass, detail);
}

} // namespace

int main() {
    criterion_tightness();
    criterion_counterexample();
    criterion_ohm_envelopes();
    criterion_lyapunov();
    criterion_affine_identity();
    criterion_lower_bounds();
    criterion_pep();
    criterion_pgextra();
    criterion_properties();
    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria failed\n", g_failures);
    return 1;
}
