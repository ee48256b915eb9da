#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "fpi/linalg.hpp"
#include "fpi/matrix.hpp"
#include "fpi/rng.hpp"
#include "fpi/vec.hpp"

namespace fpi {

// Optional ground truth attached to an operator: the infimal displacement
// vector v and, when it is attained, a witness point with x - Tx = v.
struct GroundTruth {
    Vec v;
    std::optional<Vec> x_star;
};

// Construction parameters kept around for serialization; composites carry none.
struct OperatorParams {
    std::map<std::string, double> scalars;
    std::map<std::string, Vec> vecs;
    std::map<std::string, Matrix> matrices;
    std::shared_ptr<const OperatorParams> inner;
    std::string inner_kind;
};

// A nonexpansive self-map T together with its metadata.  Immutable after
// construction; evaluate/residual are re-entrant.
class Operator {
public:
    Operator(std::string kind, std::size_t dim, std::function<Vec(const Vec&)> map,
             std::optional<GroundTruth> truth = std::nullopt,
             std::shared_ptr<const OperatorParams> params = nullptr)
        : kind_(std::move(kind)), dim_(dim), map_(std::move(map)), truth_(std::move(truth)),
          params_(std::move(params)) {}

    const std::string& kind() const { return kind_; }
    std::size_t dimension() const { return dim_; }
    const std::optional<GroundTruth>& ground_truth() const { return truth_; }
    const std::shared_ptr<const OperatorParams>& params() const { return params_; }

    Vec evaluate(const Vec& x) const {
        if (x.size() != dim_) throw std::invalid_argument("Operator::evaluate: dimension mismatch");
        return map_(x);
    }

    Vec residual(const Vec& x) const { return x - evaluate(x); }

private:
    std::string kind_;
    std::size_t dim_;
    std::function<Vec(const Vec&)> map_;
    std::optional<GroundTruth> truth_;
    std::shared_ptr<const OperatorParams> params_;
};

// T x = x - v (every point witnesses the displacement v).
Operator make_translation(const Vec& v);

// The 3-d map T(x, y, z) = (-y, x, z - 1): quarter-turn in the plane plus a
// unit downward shift.  Normalized iterates converge while the fixed-point
// residual stays sqrt(2) away from v = (0, 0, 1).
Operator make_counterexample();

// T x = A x + b with optional ground truth computed from (I - A).
Operator make_affine(const Matrix& a, const Vec& b, bool attach_ground_truth = true);

// Hard instance in R^{k+1}: residual(x) = M x + alpha e_1 + v_norm e_{k+1},
// where I - M is a signed k-cycle (exact isometry).  Ground truth:
// v = v_norm e_{k+1}, x_star = -(alpha/2) (e_1 + ... + e_k).
Operator make_worst_case(std::size_t k, double v_norm, double alpha);

// The residual-map matrix M of make_worst_case, exposed for auditing.
Matrix worst_case_m(std::size_t k);

// Tightness choice for alpha when only v_norm is given.
double worst_case_default_alpha(std::size_t k, double v_norm);

// T_U(y) = U T(U^T (y - x0)) + x0 for column-orthogonal U (U^T U = I).
// Ground truth maps as v -> U v, x_star -> x0 + U x_star.
Operator rotate_operator(const Operator& inner, const Matrix& u, const Vec& x0);

// Arbitrary composite map (used by the PG-EXTRA and PDHG modules).
Operator make_composite(std::string kind, std::size_t dim, std::function<Vec(const Vec&)> map,
                        std::optional<GroundTruth> truth = std::nullopt);

struct NonexpansivenessReport {
    double max_ratio = 0.0;
    std::size_t samples = 0;
    bool flagged = false; // max_ratio > 1 + 1e-9
};

NonexpansivenessReport audit_nonexpansive(const Operator& op, std::size_t samples,
                                          std::uint64_t seed, double point_scale = 3.0);

// Random nonexpansive affine operator with computable ground truth:
// A = Q diag(I_r, B) Q^T with ||B||_2 <= spectral_target <= 1, so I - A has a
// rank-r kernel and the displacement vector is generally nonzero once r > 0.
Operator make_random_affine(std::size_t dim, std::uint64_t seed, double spectral_target,
                            std::size_t fixed_rank);

// Seeded zoo of random nonexpansive affine operators with known x_star; mixes
// strict contractions (r = 0) with genuinely inconsistent instances (r >= 1).
std::vector<Operator> make_affine_zoo(std::size_t count, std::size_t dim, std::uint64_t seed);

} // namespace fpi
