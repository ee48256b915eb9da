#pragma once

#include <functional>
#include <vector>

#include "fpi/operators.hpp"
#include "fpi/schedules.hpp"

namespace fpi {

// Query points, their residuals, and convex weights over the residuals.
struct SpanTrace {
    std::vector<Vec> iterates;  // x^0 .. x^{k-1}
    std::vector<Vec> residuals; // x^i - T x^i
    std::vector<double> weights; // nu_0 .. nu_{k-1}, sums to 1
};

// Trace of the first k query points of a trajectory, with the given weights.
SpanTrace span_trace_from_trajectory(const Trajectory& traj, std::size_t k,
                                     std::vector<double> weights);

// Uniform weights reproduce the Picard normalized iterate; the anchored
// weights nu_i proportional to (i+1) reproduce the OHM one.
std::vector<double> uniform_weights(std::size_t k);
std::vector<double> anchored_weights(std::size_t k);

struct LowerBoundReport {
    bool pass = false;
    double lhs_dist_sq = 0.0; // || sum nu_i v^i - v ||^2
    double rhs_dist_sq = 0.0; // (4/k^2) ||x0 - x_star||^2
    double lhs_gap_sq = 0.0;  // (|| sum nu_i v^i || - ||v||)^2
    double rhs_gap_sq = 0.0;  // (1/(2k^2)) ||x0 - x_star||^2
    double span_violation = 0.0;
    int span_violation_index = -1;
};

// Audits both hard-instance inequalities against a span trace on an operator
// built by make_worst_case (x^0 = 0 required).
LowerBoundReport verify_lower_bound(const Operator& op_worst, const SpanTrace& trace,
                                    double span_tol = 1e-8, double ineq_tol = 1e-9);

// A deterministic iteration interacting with the residual oracle only:
// given x^0 and the residuals observed so far, produce the next query point.
using IterationCallback =
    std::function<Vec(const Vec& x0, const std::vector<Vec>& residuals)>;

struct ResistingResult {
    Operator rotated;            // the adversarially rotated operator
    Matrix u;                    // ambient_dim x (K+1), U^T U = I
    std::vector<Vec> ambient_iterates;  // x^0 .. x^{K-1} against the rotated operator
    std::vector<Vec> ambient_residuals;
    SpanTrace pulled_back;       // U^T (x^t - x^0) and inner residuals, uniform weights
    bool completion_constrained = true; // completion columns orthogonal to all iterates
};

// Adversarial rotation of the worst-case instance built incrementally against
// a deterministic iteration: columns of U are revealed only as the pulled-back
// residual supports grow, and the column of the displacement coordinate is
// fixed to v/||v||.
ResistingResult resisting_rotation(const IterationCallback& algorithm, const Operator& inner,
                                   const Vec& x0, const Vec& v, std::size_t ambient_dim,
                                   std::size_t K, double support_tol = 1e-9);

struct ZeroRespectReport {
    bool pass = true;
    double worst_leak = 0.0; // largest pulled-back coordinate outside the allowed support
    int argmax_t = -1;
};

// Checks supp{U^T (x^t - x^0)} against the union of earlier residual supports.
ZeroRespectReport audit_zero_respecting(const ResistingResult& result, double support_tol = 1e-9);

} // namespace fpi
