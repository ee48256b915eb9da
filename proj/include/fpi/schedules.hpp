#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fpi/operators.hpp"
#include "fpi/vec.hpp"

namespace fpi {

// Iteration rules:
//   picard     x^{k+1} = T x^k
//   km         x^{k+1} = lambda_{k+1} x^k + (1 - lambda_{k+1}) T x^k
//   halpern    x^{k+1} = lambda_{k+1} x^0 + (1 - lambda_{k+1}) T x^k
//   ohm        halpern with lambda_k = 1/(k+1)
//   mann       x^k = sum_{i=0}^k nu_i^k T x^{i-1},  T x^{-1} := x^0
class Schedule {
public:
    enum class Kind { picard, km, halpern, ohm, mann };

    static Schedule picard();
    static Schedule km(std::function<double(int)> lambda);
    static Schedule halpern(std::function<double(int)> lambda);
    static Schedule ohm();
    static Schedule mann(std::function<double(int, int)> nu);

    Kind kind() const { return kind_; }
    bool is_anchored() const { return kind_ == Kind::halpern || kind_ == Kind::ohm; }

    // lambda_k for k >= 1, range-checked to [0, 1)
    double lambda(int k) const;
    // nu_i^k for 0 <= i <= k (mann only)
    double nu(int k, int i) const;

    std::string name() const;

private:
    Schedule(Kind kind, std::function<double(int)> lambda, std::function<double(int, int)> nu)
        : kind_(kind), lambda_(std::move(lambda)), nu_(std::move(nu)) {}
    Kind kind_;
    std::function<double(int)> lambda_;
    std::function<double(int, int)> nu_;
};

// sum_{i=1}^k (1 - lambda_i); equals k for picard.  A zero value is the
// degenerate signal: callers must not divide by it.
double km_factor(const Schedule& s, int k);

// theta recursion theta_{k+1} = (1 - lambda_{k+1})(1 + theta_k), theta_0 = 0.
double halpern_theta(const Schedule& s, int k);

// alpha recursion alpha_k = (1 - nu_0^k) + sum_{i=1}^k nu_i^k alpha_{i-1}.
double mann_alpha(const Schedule& s, int k);

// normalization factor of the schedule at iteration k
double normalization_factor(const Schedule& s, int k);

struct TrajectoryRecord {
    int k = 0;
    Vec x;
    Vec fpr;                        // x^k - T x^k
    double factor = 0.0;            // schedule normalization at k
    std::optional<Vec> norm_iter;   // -(x^k - x^0)/factor, absent when factor == 0
    double fpr_norm_sq = 0.0;
    std::optional<double> norm_iter_norm_sq;
    // filled only when the operator carries ground truth
    std::optional<double> fpr_dist_v_sq;       // ||fpr - v||^2
    std::optional<double> norm_iter_dist_v_sq; // ||norm_iter - v||^2
    std::optional<double> fpr_normgap_sq;      // (||fpr|| - ||v||)^2
    std::optional<double> cesaro_dist_v_sq;    // KM-weighted mean of ||fpr^i - v||^2
    std::optional<double> lyapunov;            // attached by analysis for OHM runs
};

struct Trajectory {
    Vec x0;
    std::string schedule_name;
    Schedule::Kind schedule_kind = Schedule::Kind::picard;
    std::vector<TrajectoryRecord> records; // k = 0 .. K (possibly truncated)
    bool aborted_nonfinite = false;
    std::optional<Vec> ground_truth_v;
};

// Runs K steps and fills every derived quantity the records define.
// Mann keeps the whole operator-output history (O(K * dim) memory).
Trajectory run(const Operator& op, const Schedule& schedule, const Vec& x0, int K);

// Fixed CSV column order:
// k,fpr_norm_sq,norm_iter_norm_sq,fpr_dist_v_sq,norm_iter_dist_v_sq,cesaro_dist_v_sq,lyapunov
// Values printed with 17 significant digits; absent fields left empty.
void write_trajectory_csv(const Trajectory& t, const std::string& path);
std::string trajectory_csv_string(const Trajectory& t);

} // namespace fpi
