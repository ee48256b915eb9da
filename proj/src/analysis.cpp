#include "fpi/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace fpi {

Certificate estimate_idv(const Operator& op, const Vec& x0, int K, IdvMethod method) {
    if (K < 1) throw std::invalid_argument("estimate_idv: K must be >= 1");
    Schedule sched = (method == IdvMethod::halpern_normalized) ? Schedule::ohm()
                                                               : Schedule::picard();
    Trajectory traj = run(op, sched, x0, K);
    if (traj.records.size() != static_cast<std::size_t>(K) + 1)
        throw NumericalError("estimate_idv: trajectory aborted before K",
                             static_cast<double>(traj.records.size()));
    const TrajectoryRecord& last = traj.records.back();

    Certificate cert;
    cert.iterations = K;
    cert.source = method;
    Vec recomputed;
    if (method == IdvMethod::fpr) {
        cert.v_hat = last.fpr;
        recomputed = op.residual(last.x);
    } else {
        if (!(last.factor > 0.0))
            throw NumericalError("estimate_idv: degenerate normalization factor", last.factor);
        cert.v_hat = *last.norm_iter;
        // cross-check against the standalone factor recursion
        recomputed = (-1.0 / normalization_factor(sched, K)) * (last.x - x0);
    }
    cert.v_hat_norm = norm(cert.v_hat);
    cert.recompute_residual = std::abs(cert.v_hat_norm - norm(recomputed));
    if (cert.recompute_residual > 1e-12 * std::max(1.0, cert.v_hat_norm))
        throw NumericalError("estimate_idv: certificate norm does not reproduce",
                             cert.recompute_residual);
    return cert;
}

RateEnvelope make_envelope(EnvelopeId id, double r0_sq) {
    return RateEnvelope{id, r0_sq, std::nullopt};
}

RateEnvelope make_envelope(EnvelopeId id, double r0_sq, const Schedule& schedule) {
    return RateEnvelope{id, r0_sq, schedule};
}

double envelope_value(const RateEnvelope& env, int k) {
    if (k < 1) throw std::invalid_argument("envelope_value: k must be >= 1");
    const double r = env.r0_sq;
    switch (env.id) {
        case EnvelopeId::km_norm_iter: {
            if (!env.schedule) throw std::invalid_argument("envelope: km form needs a schedule");
            double f = km_factor(*env.schedule, k);
            if (f <= 0.0) throw NumericalError("envelope: degenerate km factor", f);
            return 4.0 / (f * f) * r;
        }
        case EnvelopeId::km_fpr: {
            if (!env.schedule) throw std::invalid_argument("envelope: km form needs a schedule");
            double acc = 0.0;
            for (int i = 0; i <= k; ++i) {
                double l = env.schedule->lambda(i + 1);
                acc += l * (1.0 - l);
            }
            if (acc <= 0.0) throw NumericalError("envelope: degenerate km fpr weight sum", acc);
            return r / acc;
        }
        case EnvelopeId::halpern_norm_iter: {
            if (!env.schedule)
                throw std::invalid_argument("envelope: halpern form needs a schedule");
            double th = halpern_theta(*env.schedule, k);
            if (th <= 0.0) throw NumericalError("envelope: degenerate theta", th);
            return 4.0 / (th * th) * r;
        }
        case EnvelopeId::ohm_fpr_dist: {
            double h = 0.0;
            for (int n = 1; n <= k; ++n) h += 1.0 / n;
            double c = (std::sqrt(h + 4.0) + 1.0) / (k + 1);
            return c * c * r;
        }
        case EnvelopeId::picard_norm_iter: return 4.0 / (static_cast<double>(k) * k) * r;
        case EnvelopeId::km_half_fpr: return 4.0 / (k + 1.0) * r;
        case EnvelopeId::ohm_norm_iter:
        case EnvelopeId::ohm_fpr_normgap: return 16.0 / (static_cast<double>(k) * k) * r;
    }
    throw std::invalid_argument("envelope_value: unknown envelope id");
}

double lyapunov(const Operator& op, const Trajectory& traj, const Vec& x_anchor, int k) {
    if (traj.schedule_kind != Schedule::Kind::ohm)
        throw std::invalid_argument("lyapunov: defined for ohm trajectories only");
    if (k < 1 || static_cast<std::size_t>(k) >= traj.records.size())
        throw std::invalid_argument("lyapunov: k out of range");
    const Vec& xk = traj.records[static_cast<std::size_t>(k)].x;
    const Vec rk = op.residual(xk);
    const Vec ra = op.residual(x_anchor);
    const Vec dx = xk - traj.x0;
    const double kd = static_cast<double>(k);

    double term1 = (kd + 1.0) * (kd * norm_sq(rk) + 2.0 * dot(rk, dx));
    double term2 = kd * (kd + 1.0) * dot((-2.0 / kd) * dx - ra, ra);
    double term3 = (2.0 * (kd + 1.0) / kd) * norm_sq(xk - x_anchor + (kd / 2.0) * ra);
    double harmonic = 0.0;
    for (int n = 1; n <= k; ++n) harmonic += 1.0 / n;
    double term4 = -harmonic * norm_sq(traj.x0 - x_anchor);
    return term1 + term2 + term3 + term4;
}

Trajectory with_lyapunov(const Operator& op, Trajectory traj, const Vec& x_anchor) {
    for (std::size_t i = 1; i < traj.records.size(); ++i)
        traj.records[i].lyapunov = lyapunov(op, traj, x_anchor, static_cast<int>(i));
    return traj;
}

ProjectionReport check_projection_inequality(const Trajectory& traj, const Vec& v, double tol) {
    ProjectionReport rep;
    const double v_sq = norm_sq(v);
    bool first = true;
    for (const TrajectoryRecord& rec : traj.records) {
        auto consider = [&](const Vec& vk) {
            double margin = dot(vk, v) - v_sq;
            if (first || margin < rep.worst_margin) {
                rep.worst_margin = margin;
                rep.argmin_k = rec.k;
                first = false;
            }
        };
        consider(rec.fpr);
        if (rec.norm_iter) consider(*rec.norm_iter);
    }
    rep.pass = rep.worst_margin >= -tol;
    return rep;
}

const char* audit_quantity_name(AuditQuantity q) {
    switch (q) {
        case AuditQuantity::norm_iter_dist_v_sq: return "norm_iter_dist_v_sq";
        case AuditQuantity::fpr_dist_v_sq: return "fpr_dist_v_sq";
        case AuditQuantity::fpr_normgap_sq: return "fpr_normgap_sq";
        case AuditQuantity::cesaro_dist_v_sq: return "cesaro_dist_v_sq";
    }
    return "?";
}

AuditReport audit_rate(const Trajectory& traj, const RateEnvelope& env, AuditQuantity quantity,
                       double tol) {
    if (!traj.ground_truth_v)
        throw std::invalid_argument("audit_rate: trajectory has no ground truth");
    AuditReport rep;
    bool first = true;
    for (const TrajectoryRecord& rec : traj.records) {
        if (rec.k < 1) continue;
        std::optional<double> measured;
        switch (quantity) {
            case AuditQuantity::norm_iter_dist_v_sq: measured = rec.norm_iter_dist_v_sq; break;
            case AuditQuantity::fpr_dist_v_sq: measured = rec.fpr_dist_v_sq; break;
            case AuditQuantity::fpr_normgap_sq: measured = rec.fpr_normgap_sq; break;
            case AuditQuantity::cesaro_dist_v_sq: measured = rec.cesaro_dist_v_sq; break;
        }
        if (!measured) continue;
        double slack = envelope_value(env, rec.k) - *measured;
        rep.ks.push_back(rec.k);
        rep.slack.push_back(slack);
        if (first || slack < rep.min_slack) {
            rep.min_slack = slack;
            rep.argmin_k = rec.k;
            first = false;
        }
    }
    if (rep.ks.empty()) throw std::invalid_argument("audit_rate: quantity absent from trajectory");
    rep.pass = rep.min_slack >= -tol;
    return rep;
}

namespace {
std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace

std::string audit_csv_string(const AuditReport& rep) {
    std::ostringstream os;
    os << "k,slack\n";
    for (std::size_t i = 0; i < rep.ks.size(); ++i)
        os << rep.ks[i] << ',' << fmt17(rep.slack[i]) << '\n';
    os << "# min_slack=" << fmt17(rep.min_slack) << " argmin_k=" << rep.argmin_k
       << " pass=" << (rep.pass ? 1 : 0) << '\n';
    return os.str();
}

} // namespace fpi
