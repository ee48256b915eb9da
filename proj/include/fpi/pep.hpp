#pragma once

#include <string>
#include <vector>

#include "fpi/matrix.hpp"
#include "fpi/operators.hpp"
#include "fpi/schedules.hpp"

namespace fpi::pep {

enum class Sense { ge_zero, le_zero, le_one };

struct ConstraintTag {
    enum class Kind { nonexp, nonexp_star, idv, radius } kind;
    int i = -1;
    int j = -1;
};

struct Constraint {
    SymMatrix matrix;
    Sense sense;
    ConstraintTag tag;
};

// Worst-case SDP for the anchored lambda_k = 1/(k+1) iteration after k steps:
// maximize tr(C_k Z) over PSD Gram matrices Z of [v^0..v^k, v, x^0 - x_star]
// subject to the interpolation constraints.
struct Problem {
    int k = 0;
    int order = 0; // k + 3
    SymMatrix objective;
    std::vector<Constraint> constraints;
};

Problem build(int k);

// Sparse SDPA-style text file; inequality senses documented in the header
// comment and recoverable from the per-constraint tag comments.
void export_sdpa(const Problem& p, const std::string& path);
std::string sdpa_string(const Problem& p);
Problem parse_sdpa(const std::string& path);
Problem parse_sdpa_string(const std::string& text);

// self-describing dense dump, one matrix per section; for debugging
std::string text_dump(const Problem& p);

struct SolveOptions {
    int max_iters = 200000;
    double tol = 1e-6;
    int check_every = 50;
};

struct SolveResult {
    double value = 0.0;       // objective of the feasibility-rounded iterate
    double raw_value = 0.0;   // objective of the final solver iterate
    SymMatrix z;              // rounded iterate
    bool converged = false;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double worst_constraint_violation = 0.0;
};

// First-order primal-dual solve; the sweep is exposed as an operator and the
// outer loop drives it with the Picard runner.  The displacement column is
// pinned to unit scale while solving (the objective is otherwise unbounded
// along growing ||v||), so the reported value is the worst case at ||v|| = 1.
SolveResult solve(const Problem& p, const SolveOptions& opts = {});

// The primal-dual sweep as a self-map on the stacked (svec Z, duals) state.
Operator pdhg_operator(const Problem& p, double tau, double sigma);

struct BoundsReport {
    bool pass = false;
    double value = 0.0;
    double lower = 0.0; // 4/(k+1)^2: hard-instance bound at k+1 oracle calls
    double upper = 0.0; // harmonic-sum envelope at unit radius
    double slack_used = 0.0;
};

BoundsReport verify_bounds(int k, double value, double solver_tol = 1e-6,
                           double rel_slack = 0.05);

// Gram matrix of [v^0..v^k, v, x^0 - x_star] assembled from an OHM run;
// the operator must carry attained ground truth.
SymMatrix gram_from_trajectory(const Operator& op, const Trajectory& traj, int k);

// svec packing with sqrt(2) off-diagonal scaling, so inner products match
// trace products.
Vec svec(const SymMatrix& s);
SymMatrix unsvec(const Vec& v, std::size_t order);

} // namespace fpi::pep
