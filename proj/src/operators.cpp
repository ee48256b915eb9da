#include "fpi/operators.hpp"

#include <cmath>

namespace fpi {

Operator make_translation(const Vec& v) {
    if (v.size() == 0 || !v.all_finite()) throw std::invalid_argument("make_translation: bad v");
    Vec vc = v;
    GroundTruth truth{vc, Vec(v.size(), 0.0)};
    auto params = std::make_shared<OperatorParams>();
    params->vecs["v"] = vc;
    return Operator("translation", v.size(), [vc](const Vec& x) { return x - vc; },
                    std::move(truth), std::move(params));
}

Operator make_counterexample() {
    Vec v{0.0, 0.0, 1.0};
    GroundTruth truth{v, Vec{0.0, 0.0, 0.0}};
    return Operator("rotation_shift", 3,
                    [](const Vec& x) {
                        return Vec{-x[1], x[0], x[2] - 1.0};
                    },
                    std::move(truth), std::make_shared<OperatorParams>());
}

namespace {

std::optional<GroundTruth> affine_ground_truth(const Matrix& a, const Vec& b) {
    const std::size_t n = a.rows();
    Matrix ima = Matrix::identity(n) - a;
    // residual(x) = (I - A) x - b; v is the projection of b onto R(I - A), minus b
    std::vector<Vec> cols;
    for (std::size_t j = 0; j < n; ++j) cols.push_back(ima.col(j));
    std::vector<Vec> basis = orthonormalize(cols, 1e-8);
    Vec pb = project_onto_span(b, basis);
    Vec v = pb - b;
    Vec x_star = pseudo_solve(ima, pb, 1e-12);
    // witness must reproduce the displacement; refuse to attach a sloppy one
    if (norm(ima.apply(x_star) - pb) > 1e-10 * std::max(1.0, norm(b))) return std::nullopt;
    return GroundTruth{v, x_star};
}

} // namespace

Operator make_affine(const Matrix& a, const Vec& b, bool attach_ground_truth) {
    if (a.rows() != a.cols() || a.rows() != b.size())
        throw std::invalid_argument("make_affine: dimension mismatch");
    std::optional<GroundTruth> truth;
    if (attach_ground_truth) truth = affine_ground_truth(a, b);
    Matrix ac = a;
    Vec bc = b;
    auto params = std::make_shared<OperatorParams>();
    params->matrices["A"] = ac;
    params->vecs["b"] = bc;
    return Operator("affine", b.size(), [ac, bc](const Vec& x) { return ac.apply(x) + bc; },
                    std::move(truth), std::move(params));
}

Matrix worst_case_m(std::size_t k) {
    if (k < 1) throw std::invalid_argument("worst_case_m: k must be >= 1");
    const std::size_t n = k + 1;
    Matrix m(n, n);
    for (std::size_t i = 0; i + 1 < n; ++i) m(i, i) = 1.0;
    for (std::size_t i = 0; i + 2 < n; ++i) m(i + 1, i) = -1.0;
    m(0, k - 1) += 1.0; // for k = 1 this lands on the diagonal
    return m;
}

double worst_case_default_alpha(std::size_t k, double v_norm) {
    return v_norm > 0.0 ? std::sqrt(static_cast<double>(k)) * v_norm : 1.0;
}

Operator make_worst_case(std::size_t k, double v_norm, double alpha) {
    if (k < 1) throw std::invalid_argument("make_worst_case: k must be >= 1");
    if (alpha == 0.0) throw std::invalid_argument("make_worst_case: alpha must be nonzero");
    if (v_norm < 0.0) throw std::invalid_argument("make_worst_case: v_norm must be >= 0");
    const std::size_t n = k + 1;
    Matrix m = worst_case_m(k);
    Vec shift(n);
    shift[0] = alpha;
    shift[k] = v_norm;

    Vec v(n);
    v[k] = v_norm;
    Vec x_star(n);
    for (std::size_t i = 0; i < k; ++i) x_star[i] = -alpha / 2.0;
    GroundTruth truth{v, x_star};

    auto params = std::make_shared<OperatorParams>();
    params->scalars["k"] = static_cast<double>(k);
    params->scalars["v_norm"] = v_norm;
    params->scalars["alpha"] = alpha;
    return Operator("worst_case", n,
                    [m, shift](const Vec& x) {
                        // T x = x - (M x + shift)
                        Vec r = m.apply(x) + shift;
                        return x - r;
                    },
                    std::move(truth), std::move(params));
}

Operator rotate_operator(const Operator& inner, const Matrix& u, const Vec& x0) {
    const std::size_t m = u.cols();
    const std::size_t d = u.rows();
    if (m != inner.dimension()) throw std::invalid_argument("rotate_operator: U column count");
    if (x0.size() != d) throw std::invalid_argument("rotate_operator: x0 dimension");
    Matrix utu = u.transposed() * u;
    double err = (utu - Matrix::identity(m)).frobenius_norm();
    if (err > 1e-10) throw std::invalid_argument("rotate_operator: U^T U != I");

    std::optional<GroundTruth> truth;
    if (inner.ground_truth()) {
        GroundTruth t;
        t.v = u.apply(inner.ground_truth()->v);
        if (inner.ground_truth()->x_star)
            t.x_star = x0 + u.apply(*inner.ground_truth()->x_star);
        truth = std::move(t);
    }

    // capture inner by value through a shared_ptr: Operator stays copyable
    auto inner_ptr = std::make_shared<Operator>(inner);
    Matrix uc = u;
    Vec x0c = x0;
    std::shared_ptr<OperatorParams> params;
    if (inner.params()) {
        params = std::make_shared<OperatorParams>();
        params->matrices["U"] = uc;
        params->vecs["x0"] = x0c;
        params->inner = inner.params();
        params->inner_kind = inner.kind();
    }
    return Operator("rotated", d,
                    [inner_ptr, uc, x0c](const Vec& y) {
                        Vec pulled = uc.apply_transposed(y - x0c);
                        return uc.apply(inner_ptr->evaluate(pulled)) + x0c;
                    },
                    std::move(truth), std::move(params));
}

Operator make_composite(std::string kind, std::size_t dim, std::function<Vec(const Vec&)> map,
                        std::optional<GroundTruth> truth) {
    return Operator(std::move(kind), dim, std::move(map), std::move(truth));
}

NonexpansivenessReport audit_nonexpansive(const Operator& op, std::size_t samples,
                                          std::uint64_t seed, double point_scale) {
    Rng rng(seed);
    NonexpansivenessReport rep;
    rep.samples = samples;
    for (std::size_t s = 0; s < samples; ++s) {
        Vec x = point_scale * random_gaussian_vec(op.dimension(), rng);
        Vec y = point_scale * random_gaussian_vec(op.dimension(), rng);
        double dxy = norm(x - y);
        if (dxy <= 1e-12) continue;
        double ratio = norm(op.evaluate(x) - op.evaluate(y)) / dxy;
        rep.max_ratio = std::max(rep.max_ratio, ratio);
    }
    rep.flagged = rep.max_ratio > 1.0 + 1e-9;
    return rep;
}

Operator make_random_affine(std::size_t dim, std::uint64_t seed, double spectral_target,
                            std::size_t fixed_rank) {
    if (fixed_rank >= dim) throw std::invalid_argument("make_random_affine: fixed_rank >= dim");
    if (spectral_target <= 0.0 || spectral_target > 1.0)
        throw std::invalid_argument("make_random_affine: spectral_target must be in (0, 1]");
    Rng rng(seed);

    const std::size_t br = dim - fixed_rank;
    Matrix b0(br, br);
    for (std::size_t i = 0; i < br; ++i)
        for (std::size_t j = 0; j < br; ++j) b0(i, j) = rng.gaussian();
    double sn = spectral_norm(b0, 1e-12);
    double scale = sn > 0.0 ? spectral_target * (1.0 - 1e-12) / sn : 0.0;

    Matrix core(dim, dim);
    for (std::size_t i = 0; i < fixed_rank; ++i) core(i, i) = 1.0;
    for (std::size_t i = 0; i < br; ++i)
        for (std::size_t j = 0; j < br; ++j)
            core(fixed_rank + i, fixed_rank + j) = scale * b0(i, j);

    Matrix q = random_orthogonal(dim, rng);
    Matrix a = q * core * q.transposed();
    Vec b = random_gaussian_vec(dim, rng);
    return make_affine(a, b, true);
}

std::vector<Operator> make_affine_zoo(std::size_t count, std::size_t dim, std::uint64_t seed) {
    std::vector<Operator> zoo;
    zoo.reserve(count);
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t op_seed = rng.next_u64();
        std::size_t fixed_rank = i % 3; // 0: consistent, 1-2: displacement attained, nonzero
        double target = 0.5 + 0.45 * rng.uniform();
        zoo.push_back(make_random_affine(dim, op_seed, target, fixed_rank));
    }
    return zoo;
}

} // namespace fpi
