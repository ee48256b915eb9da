#include "fpi/lowerbound.hpp"

#include <cmath>
#include <set>

namespace fpi {

SpanTrace span_trace_from_trajectory(const Trajectory& traj, std::size_t k,
                                     std::vector<double> weights) {
    if (traj.records.size() < k) throw std::invalid_argument("span_trace: trajectory too short");
    if (weights.size() != k) throw std::invalid_argument("span_trace: weight count mismatch");
    SpanTrace t;
    for (std::size_t i = 0; i < k; ++i) {
        t.iterates.push_back(traj.records[i].x);
        t.residuals.push_back(traj.records[i].fpr);
    }
    t.weights = std::move(weights);
    return t;
}

std::vector<double> uniform_weights(std::size_t k) {
    return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

std::vector<double> anchored_weights(std::size_t k) {
    // x^k - x^0 = -sum (i+1)/(k+1) v^i and theta_k = k/2
    std::vector<double> w(k);
    for (std::size_t i = 0; i < k; ++i)
        w[i] = 2.0 * (static_cast<double>(i) + 1.0) /
               (static_cast<double>(k) * (static_cast<double>(k) + 1.0));
    return w;
}

LowerBoundReport verify_lower_bound(const Operator& op_worst, const SpanTrace& trace,
                                    double span_tol, double ineq_tol) {
    if (!op_worst.ground_truth() || !op_worst.ground_truth()->x_star)
        throw std::invalid_argument("verify_lower_bound: operator has no ground truth");
    const std::size_t k = trace.residuals.size();
    if (k == 0 || trace.iterates.size() != k || trace.weights.size() != k)
        throw std::invalid_argument("verify_lower_bound: malformed trace");
    double wsum = 0.0;
    for (double w : trace.weights) wsum += w;
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("verify_lower_bound: weights do not sum to 1");
    if (norm(trace.iterates[0]) > 1e-12)
        throw std::invalid_argument("verify_lower_bound: trace must start at x^0 = 0");

    LowerBoundReport rep;

    // span condition: x^{n+1} - x^0 within span{v^0..v^n}
    std::vector<Vec> basis;
    for (std::size_t n = 0; n + 1 < k; ++n) {
        basis = orthonormalize({trace.residuals.begin(),
                                trace.residuals.begin() + static_cast<std::ptrdiff_t>(n) + 1});
        Vec d = trace.iterates[n + 1] - trace.iterates[0];
        double viol = norm(d - project_onto_span(d, basis));
        if (viol > rep.span_violation) {
            rep.span_violation = viol;
            rep.span_violation_index = static_cast<int>(n) + 1;
        }
    }
    if (rep.span_violation > span_tol) {
        rep.pass = false;
        return rep;
    }

    const Vec& v = op_worst.ground_truth()->v;
    const Vec& x_star = *op_worst.ground_truth()->x_star;
    const double r0_sq = norm_sq(trace.iterates[0] - x_star);

    Vec combo(op_worst.dimension());
    for (std::size_t i = 0; i < k; ++i) axpy(trace.weights[i], trace.residuals[i], combo);

    rep.lhs_dist_sq = norm_sq(combo - v);
    rep.rhs_dist_sq = 4.0 / (static_cast<double>(k) * k) * r0_sq;
    double gap = norm(combo) - norm(v);
    rep.lhs_gap_sq = gap * gap;
    rep.rhs_gap_sq = 1.0 / (2.0 * static_cast<double>(k) * k) * r0_sq;
    rep.pass = rep.lhs_dist_sq >= rep.rhs_dist_sq - ineq_tol &&
               rep.lhs_gap_sq >= rep.rhs_gap_sq - ineq_tol;
    return rep;
}

namespace {

std::set<std::size_t> vec_support(const Vec& v, double tol) {
    std::set<std::size_t> s;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::abs(v[i]) > tol) s.insert(i);
    return s;
}

// one unit vector orthogonal to `against`, drawn deterministically
Vec fresh_orthonormal_column(const std::vector<Vec>& against, std::size_t dim, Rng& rng) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        Vec c = random_gaussian_vec(dim, rng);
        for (int pass = 0; pass < 2; ++pass)
            for (const Vec& b : against) axpy(-dot(c, b), b, c);
        double cn = norm(c);
        if (cn > 1e-8) {
            c *= 1.0 / cn;
            return c;
        }
    }
    throw NumericalError("resisting_rotation: Gram-Schmidt breakdown while drawing a column",
                         static_cast<double>(against.size()));
}

} // namespace

ResistingResult resisting_rotation(const IterationCallback& algorithm, const Operator& inner,
                                   const Vec& x0, const Vec& v, std::size_t ambient_dim,
                                   std::size_t K, double support_tol) {
    if (K < 1) throw std::invalid_argument("resisting_rotation: K must be >= 1");
    if (ambient_dim < 2 * K - 1)
        throw std::invalid_argument("resisting_rotation: ambient dimension must be >= 2K-1");
    if (x0.size() != ambient_dim || v.size() != ambient_dim)
        throw std::invalid_argument("resisting_rotation: x0/v dimension mismatch");
    const std::size_t n_inner = inner.dimension();
    if (n_inner != K + 1)
        throw std::invalid_argument("resisting_rotation: inner must be worst_case(K, ...)");
    if (!inner.ground_truth())
        throw std::invalid_argument("resisting_rotation: inner operator has no ground truth");
    const double vn = norm(v);
    if (vn <= 0.0) throw std::invalid_argument("resisting_rotation: v must be nonzero");
    if (std::abs(norm(inner.ground_truth()->v) - vn) > 1e-9 * std::max(1.0, vn))
        throw std::invalid_argument(
            "resisting_rotation: inner displacement norm must equal ||v||");
    const std::size_t idv_coord = n_inner - 1; // coordinate carrying the displacement

    Rng rng(0x1d3a5ULL);
    std::vector<std::optional<Vec>> columns(n_inner);
    std::vector<Vec> chosen;       // orthonormal set built so far
    std::vector<Vec> iterate_diffs; // x^t - x^0 observed so far

    // the displacement column is pinned first so the rotated instance carries
    // exactly the requested vector
    columns[idv_coord] = (1.0 / vn) * v;
    chosen.push_back(*columns[idv_coord]);

    auto pull_back = [&](const Vec& y) {
        Vec p(n_inner);
        for (std::size_t i = 0; i < n_inner; ++i)
            if (columns[i]) p[i] = dot(*columns[i], y - x0);
        return p;
    };

    auto reveal = [&](std::size_t idx) {
        if (columns[idx]) return;
        std::vector<Vec> against = chosen;
        for (const Vec& d : iterate_diffs) against.push_back(d);
        against = orthonormalize(against, 1e-12);
        Vec col = fresh_orthonormal_column(against, x0.size(), rng);
        columns[idx] = col;
        chosen.push_back(col);
    };

    std::vector<Vec> ambient_iterates{x0};
    std::vector<Vec> ambient_residuals;
    std::vector<Vec> inner_points;
    std::vector<Vec> inner_residuals;
    std::set<std::size_t> support_union;

    for (std::size_t t = 0; t < K; ++t) {
        const Vec& xt = ambient_iterates[t];
        Vec pulled = pull_back(xt);
        Vec r_inner = inner.residual(pulled);
        inner_points.push_back(pulled);
        inner_residuals.push_back(r_inner);
        // reveal the columns for newly touched coordinates; the displacement
        // coordinate is always assigned v/||v||
        std::set<std::size_t> supp = vec_support(r_inner, support_tol);
        for (std::size_t idx : supp)
            if (!support_union.count(idx)) reveal(idx);
        support_union.insert(supp.begin(), supp.end());

        // ambient residual: x^t - T_U x^t = (x^t - x0) - U T(pulled)
        Vec t_inner = pulled - r_inner;
        Vec r_amb = xt - x0;
        for (std::size_t i = 0; i < n_inner; ++i)
            if (columns[i] && t_inner[i] != 0.0) axpy(-t_inner[i], *columns[i], r_amb);
        ambient_residuals.push_back(r_amb);

        if (t + 1 < K) {
            Vec next = algorithm(x0, ambient_residuals);
            if (next.size() != ambient_dim)
                throw std::invalid_argument("resisting_rotation: callback dimension mismatch");
            ambient_iterates.push_back(next);
            iterate_diffs.push_back(next - x0);
        }
    }

    // complete U; prefer columns orthogonal to every iterate as well so the
    // pulled-back supports stay inside the observed ones
    bool completion_constrained = true;
    for (std::size_t i = 0; i < n_inner; ++i) {
        if (columns[i]) continue;
        std::vector<Vec> against = chosen;
        for (const Vec& d : iterate_diffs) against.push_back(d);
        against = orthonormalize(against, 1e-12);
        Vec col;
        try {
            col = fresh_orthonormal_column(against, x0.size(), rng);
        } catch (const NumericalError&) {
            col = fresh_orthonormal_column(chosen, x0.size(), rng);
            completion_constrained = false;
        }
        columns[i] = col;
        chosen.push_back(col);
    }

    Matrix u(ambient_dim, n_inner);
    for (std::size_t j = 0; j < n_inner; ++j) u.set_col(j, *columns[j]);

    ResistingResult out{rotate_operator(inner, u, x0), std::move(u), std::move(ambient_iterates),
                        std::move(ambient_residuals), SpanTrace{}, completion_constrained};
    out.pulled_back.iterates = std::move(inner_points);
    out.pulled_back.residuals = std::move(inner_residuals);
    out.pulled_back.weights = uniform_weights(K);
    return out;
}

ZeroRespectReport audit_zero_respecting(const ResistingResult& result, double support_tol) {
    ZeroRespectReport rep;
    const Vec& x0 = result.ambient_iterates[0];
    std::set<std::size_t> allowed;
    for (std::size_t t = 0; t < result.ambient_iterates.size(); ++t) {
        Vec pulled = result.u.apply_transposed(result.ambient_iterates[t] - x0);
        for (std::size_t i = 0; i < pulled.size(); ++i) {
            if (allowed.count(i)) continue;
            double leak = std::abs(pulled[i]);
            if (leak > rep.worst_leak) {
                rep.worst_leak = leak;
                rep.argmax_t = static_cast<int>(t);
            }
        }
        if (t < result.pulled_back.residuals.size()) {
            const Vec& r = result.pulled_back.residuals[t];
            for (std::size_t i = 0; i < r.size(); ++i)
                if (std::abs(r[i]) > support_tol) allowed.insert(i);
        }
    }
    rep.pass = rep.worst_leak <= support_tol;
    return rep;
}

} // namespace fpi
