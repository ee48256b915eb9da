#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fpi/operators.hpp"
#include "fpi/schedules.hpp"

namespace fpi {

enum class IdvMethod { picard_normalized, halpern_normalized, fpr };

struct Certificate {
    Vec v_hat;
    IdvMethod source = IdvMethod::picard_normalized;
    int iterations = 0;
    double v_hat_norm = 0.0;
    double recompute_residual = 0.0; // |reported norm - recomputation|
};

// Displacement-vector estimate from a run of the chosen schedule.
Certificate estimate_idv(const Operator& op, const Vec& x0, int K,
                         IdvMethod method = IdvMethod::picard_normalized);

// Worst-case envelopes.  Each is the exact right-hand side of the matching
// convergence guarantee, evaluated at iteration k for a run with
// ||x0 - x_star||^2 = r0_sq (the displacement must be attained).
enum class EnvelopeId {
    km_norm_iter,        // 4 / (sum (1-lambda_i))^2 * r0_sq
    km_fpr,              // r0_sq / sum_{i=0..k} lambda_{i+1}(1-lambda_{i+1})
    halpern_norm_iter,   // 4 / theta_k^2 * r0_sq
    ohm_fpr_dist,        // ((sqrt(H_k + 4) + 1) / (k+1))^2 * r0_sq
    picard_norm_iter,    // 4 / k^2 * r0_sq
    km_half_fpr,         // 4 / (k+1) * r0_sq
    ohm_norm_iter,       // 16 / k^2 * r0_sq
    ohm_fpr_normgap      // 16 / k^2 * r0_sq
};

struct RateEnvelope {
    EnvelopeId id;
    double r0_sq = 1.0;
    // schedule needed by the km/halpern forms with general lambda
    std::optional<Schedule> schedule;
};

double envelope_value(const RateEnvelope& env, int k);

RateEnvelope make_envelope(EnvelopeId id, double r0_sq);
RateEnvelope make_envelope(EnvelopeId id, double r0_sq, const Schedule& schedule);

// The anchored-iteration potential, evaluated exactly as displayed:
//   V^k = (k+1) { k ||r^k||^2 + 2 <r^k, x^k - x0> }
//         + k(k+1) < -(2/k)(x^k - x0) - r_a, r_a >
//         + (2(k+1)/k) || x^k - x_a + (k/2) r_a ||^2
//         - (sum_{n=1..k} 1/n) ||x0 - x_a||^2
// with r^k = x^k - T x^k recomputed and r_a = x_a - T x_a.
// Only defined for OHM trajectories.
double lyapunov(const Operator& op, const Trajectory& traj, const Vec& x_anchor, int k);

// Copy of the trajectory with the lyapunov column filled at every k >= 1.
Trajectory with_lyapunov(const Operator& op, Trajectory traj, const Vec& x_anchor);

struct ProjectionReport {
    bool pass = true;
    double worst_margin = 0.0; // min over records of <v^k, v> - ||v||^2
    int argmin_k = -1;
};

// Checks <v^k, v> >= ||v||^2 - 1e-8 for the stored fixed-point residuals and
// normalized iterates of the trajectory.
ProjectionReport check_projection_inequality(const Trajectory& traj, const Vec& v,
                                             double tol = 1e-8);

enum class AuditQuantity { norm_iter_dist_v_sq, fpr_dist_v_sq, fpr_normgap_sq, cesaro_dist_v_sq };

struct AuditReport {
    bool pass = true;
    double min_slack = 0.0;
    int argmin_k = -1;
    std::vector<int> ks;
    std::vector<double> slack; // envelope(k) - measured(k)
};

// Per-k slack of a measured trajectory quantity against an envelope.
AuditReport audit_rate(const Trajectory& traj, const RateEnvelope& env, AuditQuantity quantity,
                       double tol = 1e-8);

std::string audit_csv_string(const AuditReport& rep);

const char* audit_quantity_name(AuditQuantity q);

} // namespace fpi
