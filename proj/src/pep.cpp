#include "fpi/pep.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fpi/analysis.hpp"
#include "fpi/linalg.hpp"

namespace fpi::pep {

namespace {

// span encoding of the anchored iteration: x^i - x^0 = -sum_{l<i} (l+1)/(i+1) v^l,
// expressed in the Gram basis [v^0..v^k, v, x0-x_star]
Vec iterate_coeffs(int order, int i) {
    Vec c(static_cast<std::size_t>(order));
    for (int l = 0; l < i; ++l)
        c[static_cast<std::size_t>(l)] = -(static_cast<double>(l) + 1.0) / (i + 1.0);
    return c;
}

} // namespace

Problem build(int k) {
    if (k < 1) throw std::invalid_argument("pep::build: k must be >= 1");
    const int order = k + 3;
    const std::size_t n = static_cast<std::size_t>(order);
    const std::size_t iv = n - 2;  // column of v
    const std::size_t ir = n - 1;  // column of x^0 - x_star

    Problem p;
    p.k = k;
    p.order = order;

    // objective ||v^k - v||^2
    Vec ck(n);
    ck[static_cast<std::size_t>(k)] = 1.0;
    ck[iv] = -1.0;
    p.objective = outer(ck);

    // nonexpansiveness between iterate pairs:
    // ||x^i-x^j||^2 - ||y^i-y^j||^2 = 2 <v^i - v^j, x^i - x^j> - ||v^i - v^j||^2 >= 0
    for (int i = 0; i <= k; ++i) {
        for (int j = 0; j <= k; ++j) {
            if (i == j) continue;
            Vec dv(n);
            dv[static_cast<std::size_t>(i)] = 1.0;
            dv[static_cast<std::size_t>(j)] = -1.0;
            Vec dx = iterate_coeffs(order, i) - iterate_coeffs(order, j);
            SymMatrix a = 2.0 * sym_outer(dv, dx) - outer(dv);
            p.constraints.push_back({std::move(a), Sense::ge_zero,
                                     {ConstraintTag::Kind::nonexp, i, j}});
        }
    }

    // nonexpansiveness against the witness point:
    // 2 <v^i - v, x^i - x_star> - ||v^i - v||^2 >= 0, x^i - x_star = (x^i - x^0) + (x^0 - x_star)
    for (int i = 0; i <= k; ++i) {
        Vec dv(n);
        dv[static_cast<std::size_t>(i)] = 1.0;
        dv[iv] = -1.0;
        Vec dx = iterate_coeffs(order, i);
        dx[ir] += 1.0;
        SymMatrix a = 2.0 * sym_outer(dv, dx) - outer(dv);
        p.constraints.push_back({std::move(a), Sense::ge_zero,
                                 {ConstraintTag::Kind::nonexp_star, i, -1}});
    }

    // displacement conditions <v^i, v> - ||v||^2 >= 0
    for (int i = 0; i <= k; ++i) {
        Vec dv(n);
        dv[static_cast<std::size_t>(i)] = 1.0;
        dv[iv] = -1.0;
        SymMatrix b = sym_outer(dv, unit(n, iv));
        p.constraints.push_back({std::move(b), Sense::ge_zero, {ConstraintTag::Kind::idv, i, -1}});
    }

    // radius ||x^0 - x_star||^2 <= 1
    p.constraints.push_back({outer(unit(n, ir)), Sense::le_one, {ConstraintTag::Kind::radius, -1, -1}});
    return p;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* tag_name(ConstraintTag::Kind k) {
    switch (k) {
        case ConstraintTag::Kind::nonexp: return "nonexp";
        case ConstraintTag::Kind::nonexp_star: return "nonexp_star";
        case ConstraintTag::Kind::idv: return "idv";
        case ConstraintTag::Kind::radius: return "radius";
    }
    return "?";
}

void emit_matrix(std::ostringstream& os, int matno, const SymMatrix& m) {
    for (std::size_t i = 0; i < m.order(); ++i)
        for (std::size_t j = i; j < m.order(); ++j)
            if (m(i, j) != 0.0)
                os << matno << " 1 " << (i + 1) << ' ' << (j + 1) << ' ' << fmt17(m(i, j)) << '\n';
}

} // namespace

std::string sdpa_string(const Problem& p) {
    std::ostringstream os;
    os << "* fpi pep export, k=" << p.k << '\n';
    os << "* maximize tr(F0 Z) over Z >= 0\n";
    os << "* senses: every constraint is tr(Fi Z) >= rhs except the radius row,\n";
    os << "*         which is tr(Fi Z) <= rhs; rhs values are on line 4.\n";
    for (std::size_t c = 0; c < p.constraints.size(); ++c) {
        const ConstraintTag& t = p.constraints[c].tag;
        os << "*c " << (c + 1) << ' ' << tag_name(t.kind);
        if (t.i >= 0) os << ' ' << t.i;
        if (t.j >= 0) os << ' ' << t.j;
        os << ' ' << (p.constraints[c].sense == Sense::le_one
                          ? "le"
                          : (p.constraints[c].sense == Sense::le_zero ? "le" : "ge"))
           << '\n';
    }
    os << p.constraints.size() << " = mDIM\n";
    os << "1 = nBLOCK\n";
    os << p.order << " = bLOCKsTRUCT\n";
    for (std::size_t c = 0; c < p.constraints.size(); ++c) {
        if (c) os << ' ';
        os << (p.constraints[c].sense == Sense::le_one ? "1" : "0");
    }
    os << '\n';
    emit_matrix(os, 0, p.objective);
    for (std::size_t c = 0; c < p.constraints.size(); ++c)
        emit_matrix(os, static_cast<int>(c) + 1, p.constraints[c].matrix);
    return os.str();
}

void export_sdpa(const Problem& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pep::export_sdpa: cannot open " + path);
    out << sdpa_string(p);
}

Problem parse_sdpa_string(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    struct TagLine {
        std::string kind;
        int i = -1, j = -1;
        std::string sense;
    };
    std::vector<TagLine> tags;
    std::vector<std::string> data_lines;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '*') {
            if (line.rfind("*c ", 0) == 0) {
                std::istringstream ls(line.substr(3));
                std::size_t idx;
                TagLine t;
                ls >> idx >> t.kind;
                std::vector<std::string> rest;
                std::string tok;
                while (ls >> tok) rest.push_back(tok);
                if (rest.empty()) throw std::runtime_error("pep::parse_sdpa: bad tag line");
                t.sense = rest.back();
                rest.pop_back();
                if (rest.size() > 0) t.i = std::stoi(rest[0]);
                if (rest.size() > 1) t.j = std::stoi(rest[1]);
                if (idx != tags.size() + 1) throw std::runtime_error("pep::parse_sdpa: tag order");
                tags.push_back(std::move(t));
            }
            continue;
        }
        data_lines.push_back(line);
    }
    if (data_lines.size() < 4) throw std::runtime_error("pep::parse_sdpa: truncated file");

    auto leading_int = [](const std::string& s) {
        std::istringstream ls(s);
        long v;
        if (!(ls >> v)) throw std::runtime_error("pep::parse_sdpa: expected an integer");
        return v;
    };
    const long m = leading_int(data_lines[0]);
    const long nblock = leading_int(data_lines[1]);
    const long order = leading_int(data_lines[2]);
    if (nblock != 1) throw std::runtime_error("pep::parse_sdpa: expected a single block");
    if (static_cast<long>(tags.size()) != m)
        throw std::runtime_error("pep::parse_sdpa: tag count does not match mDIM");

    Problem p;
    p.k = static_cast<int>(order) - 3;
    p.order = static_cast<int>(order);
    p.objective = SymMatrix(static_cast<std::size_t>(order));
    p.constraints.resize(static_cast<std::size_t>(m));
    for (long c = 0; c < m; ++c) {
        Constraint& con = p.constraints[static_cast<std::size_t>(c)];
        con.matrix = SymMatrix(static_cast<std::size_t>(order));
        const TagLine& t = tags[static_cast<std::size_t>(c)];
        if (t.kind == "nonexp") con.tag = {ConstraintTag::Kind::nonexp, t.i, t.j};
        else if (t.kind == "nonexp_star") con.tag = {ConstraintTag::Kind::nonexp_star, t.i, -1};
        else if (t.kind == "idv") con.tag = {ConstraintTag::Kind::idv, t.i, -1};
        else if (t.kind == "radius") con.tag = {ConstraintTag::Kind::radius, -1, -1};
        else throw std::runtime_error("pep::parse_sdpa: unknown tag " + t.kind);
        con.sense = (t.sense == "le")
                        ? (con.tag.kind == ConstraintTag::Kind::radius ? Sense::le_one
                                                                       : Sense::le_zero)
                        : Sense::ge_zero;
    }

    for (std::size_t li = 4; li < data_lines.size(); ++li) {
        std::istringstream ls(data_lines[li]);
        long matno, blk, i, j;
        double val;
        if (!(ls >> matno >> blk >> i >> j >> val))
            throw std::runtime_error("pep::parse_sdpa: bad entry line");
        SymMatrix& target = (matno == 0) ? p.objective
                                         : p.constraints[static_cast<std::size_t>(matno) - 1].matrix;
        target.set(static_cast<std::size_t>(i) - 1, static_cast<std::size_t>(j) - 1, val);
    }
    return p;
}

Problem parse_sdpa(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pep::parse_sdpa: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_sdpa_string(buf.str());
}

std::string text_dump(const Problem& p) {
    std::ostringstream os;
    auto dump = [&](const std::string& name, const SymMatrix& m, const std::string& sense) {
        os << "[" << name << "]";
        if (!sense.empty()) os << " sense " << sense;
        os << '\n';
        for (std::size_t i = 0; i < m.order(); ++i) {
            for (std::size_t j = 0; j < m.order(); ++j) {
                if (j) os << ' ';
                os << fmt17(m(i, j));
            }
            os << '\n';
        }
        os << '\n';
    };
    os << "k " << p.k << "\norder " << p.order << "\nconstraints " << p.constraints.size()
       << "\n\n";
    dump("objective", p.objective, "");
    for (const Constraint& c : p.constraints) {
        std::ostringstream name;
        name << tag_name(c.tag.kind);
        if (c.tag.i >= 0) name << ' ' << c.tag.i;
        if (c.tag.j >= 0) name << ' ' << c.tag.j;
        dump(name.str(), c.matrix,
             c.sense == Sense::le_one ? "<= 1" : (c.sense == Sense::le_zero ? "<= 0" : ">= 0"));
    }
    return os.str();
}

Vec svec(const SymMatrix& s) {
    const std::size_t n = s.order();
    Vec v(n * (n + 1) / 2);
    const double rt2 = std::sqrt(2.0);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) v[idx++] = (i == j) ? s(i, j) : rt2 * s(i, j);
    return v;
}

SymMatrix unsvec(const Vec& v, std::size_t order) {
    if (v.size() != order * (order + 1) / 2) throw std::invalid_argument("unsvec: length mismatch");
    SymMatrix s(order);
    const double inv_rt2 = 1.0 / std::sqrt(2.0);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < order; ++i)
        for (std::size_t j = i; j < order; ++j) {
            s.set(i, j, (i == j) ? v[idx] : inv_rt2 * v[idx]);
            ++idx;
        }
    return s;
}

namespace {

// row senses inside the solver; the displacement-scale row is an equality
enum class RowSense { ge, le, eq };

struct PdhgData {
    Problem problem;
    std::size_t sdim = 0;
    std::size_t m = 0; // rows including the internal normalization row
    Matrix a;          // m x sdim rows of svec'd constraint matrices (unit Frobenius)
    Vec c;             // svec of the objective
    Vec rhs;           // scaled right-hand sides
    std::vector<RowSense> senses;
    double tau = 0.0, sigma = 0.0;
};

// The displacement column is pinned to unit scale while solving: without it
// the supremum degenerates along ||v|| -> infinity and the radius bound alone
// no longer caps the objective.  Values are reported at ||v|| = 1.
PdhgData make_pdhg_data(const Problem& p) {
    PdhgData d;
    d.problem = p;
    const std::size_t n = static_cast<std::size_t>(p.order);
    d.sdim = n * (n + 1) / 2;
    d.m = p.constraints.size() + 1;
    d.a = Matrix(d.m, d.sdim);
    d.c = svec(p.objective);
    d.rhs = Vec(d.m);
    d.senses.resize(d.m);
    for (std::size_t r = 0; r + 1 < d.m; ++r) {
        Vec row = svec(p.constraints[r].matrix);
        double fn = norm(row);
        if (fn <= 0.0) throw std::invalid_argument("pep::solve: zero constraint matrix");
        row *= 1.0 / fn;
        for (std::size_t cidx = 0; cidx < d.sdim; ++cidx) d.a(r, cidx) = row[cidx];
        switch (p.constraints[r].sense) {
            case Sense::ge_zero: d.senses[r] = RowSense::ge; d.rhs[r] = 0.0; break;
            case Sense::le_zero: d.senses[r] = RowSense::le; d.rhs[r] = 0.0; break;
            case Sense::le_one: d.senses[r] = RowSense::le; d.rhs[r] = 1.0 / fn; break;
        }
    }
    {
        const std::size_t iv = n - 2;
        SymMatrix vv(n);
        vv.set(iv, iv, 1.0);
        Vec row = svec(vv);
        for (std::size_t cidx = 0; cidx < d.sdim; ++cidx) d.a(d.m - 1, cidx) = row[cidx];
        d.senses[d.m - 1] = RowSense::eq;
        d.rhs[d.m - 1] = 1.0;
    }
    double op_norm = spectral_norm(d.a, 1e-10);
    double step = 0.95 / std::max(op_norm, 1e-12);
    d.tau = step;
    d.sigma = step;
    return d;
}

// one primal-dual sweep on the stacked state (z, y)
Vec pdhg_sweep(const PdhgData& d, const Vec& state) {
    const std::size_t sdim = d.sdim, m = d.m;
    Vec z(sdim), y(m);
    for (std::size_t i = 0; i < sdim; ++i) z[i] = state[i];
    for (std::size_t r = 0; r < m; ++r) y[r] = state[sdim + r];

    // primal: maximize <c, z>  ->  gradient ascent step then PSD projection
    Vec aty = d.a.apply_transposed(y);
    Vec z_arg(sdim);
    for (std::size_t i = 0; i < sdim; ++i) z_arg[i] = z[i] - d.tau * (aty[i] - d.c[i]);
    Vec z_new = svec(project_psd(unsvec(z_arg, static_cast<std::size_t>(d.problem.order)),
                                 ConeSign::plus));

    // dual: y + sigma A (2 z_new - z), then the per-sense prox
    Vec z_ext(sdim);
    for (std::size_t i = 0; i < sdim; ++i) z_ext[i] = 2.0 * z_new[i] - z[i];
    Vec az = d.a.apply(z_ext);
    Vec y_new(m);
    for (std::size_t r = 0; r < m; ++r) {
        double cand = y[r] + d.sigma * (az[r] - d.rhs[r]);
        switch (d.senses[r]) {
            case RowSense::ge: y_new[r] = std::min(cand, 0.0); break;
            case RowSense::le: y_new[r] = std::max(cand, 0.0); break;
            case RowSense::eq: y_new[r] = cand; break;
        }
    }

    Vec out(sdim + m);
    for (std::size_t i = 0; i < sdim; ++i) out[i] = z_new[i];
    for (std::size_t r = 0; r < m; ++r) out[sdim + r] = y_new[r];
    return out;
}

} // namespace

Operator pdhg_operator(const Problem& p, double tau, double sigma) {
    auto data = std::make_shared<PdhgData>(make_pdhg_data(p));
    if (tau > 0.0) data->tau = tau;
    if (sigma > 0.0) data->sigma = sigma;
    std::size_t dim = data->sdim + data->m;
    return make_composite("pdhg_sweep", dim,
                          [data](const Vec& s) { return pdhg_sweep(*data, s); });
}

SolveResult solve(const Problem& p, const SolveOptions& opts) {
    PdhgData d = make_pdhg_data(p);
    const std::size_t n = static_cast<std::size_t>(p.order);
    const std::size_t sdim = d.sdim, m = d.m;

    auto data = std::make_shared<PdhgData>(d);
    Operator sweep = make_composite("pdhg_sweep", sdim + m,
                                    [data](const Vec& s) { return pdhg_sweep(*data, s); });
    Schedule picard = Schedule::picard();

    Vec state(sdim + m);
    SolveResult res;
    int done = 0;
    const int window = std::max(opts.check_every, 1);
    while (done < opts.max_iters) {
        int steps = std::min(window, opts.max_iters - done);
        Trajectory t = run(sweep, picard, state, steps);
        if (t.aborted_nonfinite)
            throw NumericalError("pep::solve: iteration produced non-finite values",
                                 static_cast<double>(done));
        const Vec& prev = t.records[t.records.size() - 2].x;
        const Vec& cur = t.records.back().x;
        done += steps;

        // primal/dual residuals from the last two iterates
        Vec dz(sdim), dy(m);
        for (std::size_t i = 0; i < sdim; ++i) dz[i] = prev[i] - cur[i];
        for (std::size_t r = 0; r < m; ++r) dy[r] = prev[sdim + r] - cur[sdim + r];
        Vec aty = d.a.apply_transposed(dy);
        Vec adz = d.a.apply(dz);
        double pr = 0.0, du = 0.0;
        for (std::size_t i = 0; i < sdim; ++i) {
            double v = dz[i] / d.tau - aty[i];
            pr += v * v;
        }
        for (std::size_t r = 0; r < m; ++r) {
            double v = dy[r] / d.sigma - adz[r];
            du += v * v;
        }
        double znorm = 0.0, ynorm = 0.0;
        for (std::size_t i = 0; i < sdim; ++i) znorm += cur[i] * cur[i];
        for (std::size_t r = 0; r < m; ++r) ynorm += cur[sdim + r] * cur[sdim + r];
        res.primal_residual = std::sqrt(pr) / (1.0 + std::sqrt(znorm));
        res.dual_residual = std::sqrt(du) / (1.0 + std::sqrt(ynorm));
        state = cur;
        if (res.primal_residual < opts.tol && res.dual_residual < opts.tol) {
            res.converged = true;
            break;
        }
    }
    res.iterations = done;

    Vec zv(sdim);
    for (std::size_t i = 0; i < sdim; ++i) zv[i] = state[i];
    res.raw_value = dot(d.c, zv);

    // feasibility rounding: PSD projection, rescale the displacement scale
    // back to one, then shrink onto the radius ball if needed
    SymMatrix z = project_psd(unsvec(zv, n), ConeSign::plus);
    const std::size_t iv = n - 2;
    if (z(iv, iv) > 1e-12) z = (1.0 / z(iv, iv)) * z;
    double radius = 0.0;
    double worst = 0.0;
    for (const Constraint& con : p.constraints) {
        double t = trace_product(con.matrix, z);
        switch (con.sense) {
            case Sense::ge_zero: worst = std::max(worst, -t); break;
            case Sense::le_zero: worst = std::max(worst, t); break;
            case Sense::le_one: radius = t; break;
        }
    }
    if (radius > 1.0) {
        z = (1.0 / radius) * z;
        worst /= radius;
    }
    res.worst_constraint_violation = worst;
    res.z = z;
    res.value = trace_product(p.objective, z);
    return res;
}

BoundsReport verify_bounds(int k, double value, double solver_tol, double rel_slack) {
    BoundsReport rep;
    rep.value = value;
    // the residual after k anchored steps consumes k+1 oracle calls, so the
    // hard-instance bound enters at k+1
    double kk = static_cast<double>(k) + 1.0;
    rep.lower = 4.0 / (kk * kk);
    rep.upper = envelope_value(make_envelope(EnvelopeId::ohm_fpr_dist, 1.0), k);
    rep.slack_used = rel_slack;
    double lo = rep.lower * (1.0 - rel_slack) - solver_tol;
    double hi = rep.upper * (1.0 + rel_slack) + solver_tol;
    rep.pass = value >= lo && value <= hi;
    return rep;
}

SymMatrix gram_from_trajectory(const Operator& op, const Trajectory& traj, int k) {
    if (!op.ground_truth() || !op.ground_truth()->x_star)
        throw std::invalid_argument("pep::gram_from_trajectory: operator lacks attained ground truth");
    if (traj.records.size() < static_cast<std::size_t>(k) + 1)
        throw std::invalid_argument("pep::gram_from_trajectory: trajectory too short");
    std::vector<Vec> cols;
    for (int i = 0; i <= k; ++i) cols.push_back(traj.records[static_cast<std::size_t>(i)].fpr);
    cols.push_back(op.ground_truth()->v);
    cols.push_back(traj.x0 - *op.ground_truth()->x_star);
    SymMatrix z(cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i)
        for (std::size_t j = i; j < cols.size(); ++j) z.set(i, j, dot(cols[i], cols[j]));
    return z;
}

} // namespace fpi::pep
