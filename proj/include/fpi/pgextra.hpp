#pragma once

#include <string>
#include <vector>

#include "fpi/linalg.hpp"
#include "fpi/matrix.hpp"
#include "fpi/operators.hpp"

namespace fpi::pgx {

// Decentralized SDP data: p agents, m primal variables, n x n LMI blocks.
// Agent i holds A_i^j (j = 1..m), B_i and the objective slice c_i.
struct SdpInstance {
    int p = 0;
    int m = 0;
    int n = 0;
    std::vector<std::vector<SymMatrix>> a; // [agent][j]
    std::vector<SymMatrix> b;              // [agent]
    std::vector<Vec> c;                    // [agent], length m
    int active_constraints = 0;            // constraints actually distributed
    bool has_trivial_agents = false;       // p exceeded the constraint count
};

struct ChainParams {
    int m = 11;
    int n = 10;
    int p = 10;
    double epsilon = 0.5;
    std::uint64_t seed = 1;
    bool zero_objective = false;
};

// Chained 2x2 blocks forcing x_1 = ... = x_{m-1} = 0, the sign-flipped chain,
// and a final block demanding x_1 >= 1 and x_m >= 1: jointly infeasible.
// Constraints are distributed round-robin over the p agents.
SdpInstance make_infeasible_chain(const ChainParams& params);

// Tiny satisfiable instance for consistency runs: diag(x) <= I on every agent.
SdpInstance make_feasible_box(int p, int m, int n, std::uint64_t seed, bool zero_objective);

using EdgeList = std::vector<std::pair<int, int>>;

EdgeList ring_with_chords(int p);

struct MixingMatrix {
    SymMatrix w;
    EigenDecomposition laplacian_eig; // eigendecomposition of I - W
    int consensus_index = -1;         // position of the zero eigenvalue
};

// Metropolis weights of a connected undirected simple graph.
MixingMatrix metropolis_weights(const EdgeList& edges, int p);

struct AgentState {
    Matrix x; // p x m
    std::vector<SymMatrix> u; // p dual blocks
    Matrix w; // p x m, stays in range(I - W)
};

class PgExtra {
public:
    // Rejects (alpha, beta) when the induced metric is not positive definite.
    PgExtra(SdpInstance instance, MixingMatrix mixing, double alpha, double beta);

    const SdpInstance& instance() const { return inst_; }
    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    std::size_t state_dim() const;

    AgentState zero_state() const;
    AgentState sweep(const AgentState& s) const;

    Vec flatten(const AgentState& s) const;
    AgentState unflatten(const Vec& v) const;

    // metric inner product; both arguments must have w in range(I - W)
    double m_inner(const AgentState& a, const AgentState& b) const;
    double m_norm_sq(const AgentState& a) const;
    double m_norm_sq_diff(const AgentState& a, const AgentState& b) const;

    // the sweep as a plain operator on the flattened state
    Operator as_operator() const;

    // random state with w projected into range(I - W); for audits
    AgentState random_state(Rng& rng, double scale) const;

    double metric_upper_bound() const { return metric_norm_bound_; }

private:
    SdpInstance inst_;
    MixingMatrix mix_;
    double alpha_, beta_;
    double metric_norm_bound_; // alpha*beta*||L||^2, must stay below 1
    std::vector<double> sqrt_half_sigma_; // sqrt(sigma_i / 2) per eigenvalue of I - W
};

// One PG-EXTRA sweep as a plain operator on the flattened state; rejects
// (alpha, beta) for which the induced metric is not positive definite.
Operator pg_extra_operator(const SdpInstance& instance, const MixingMatrix& mixing, double alpha,
                           double beta);

struct ExperimentConfig {
    ChainParams chain;
    EdgeList edges;        // empty -> ring_with_chords(p)
    double alpha = 0.01;
    double beta = 0.01;
    int horizon = 5000;
    int idv_multiplier = 4; // reference displacement from a run this many times longer
    std::string variant = "ohm"; // picard | ohm | km:<lambda>
    std::string output_dir;      // empty -> no files written
};

struct VariantSeries {
    std::string name;
    std::vector<double> norm_iter_norm_sq;
    std::vector<double> fpr_mnorm_sq;
    std::vector<double> norm_iter_dist_v_sq;
    std::vector<double> fpr_dist_v_sq;
};

struct ExperimentResult {
    VariantSeries picard;
    VariantSeries anchored;
    double v_hat_mnorm_sq = 0.0;
    double tail_min_margin_norm_iter = 0.0; // min over tail of <v^k, v_hat>_M - scaled bound
    double tail_min_margin_fpr = 0.0;
    bool projection_pass = false;     // <v^k, v_hat> >= ||v_hat||^2 (1 - 1e-3) on the tail half
};

// Runs the plain iteration and the anchored variant side by side and
// measures everything in the metric norm.
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_series_csv(const VariantSeries& s, const std::string& path);

} // namespace fpi::pgx
