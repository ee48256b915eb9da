#include "fpi/schedules.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fpi {

Schedule Schedule::picard() { return Schedule(Kind::picard, nullptr, nullptr); }

Schedule Schedule::km(std::function<double(int)> lambda) {
    return Schedule(Kind::km, std::move(lambda), nullptr);
}

Schedule Schedule::halpern(std::function<double(int)> lambda) {
    return Schedule(Kind::halpern, std::move(lambda), nullptr);
}

Schedule Schedule::ohm() {
    return Schedule(Kind::ohm, [](int k) { return 1.0 / (k + 1); }, nullptr);
}

Schedule Schedule::mann(std::function<double(int, int)> nu) {
    return Schedule(Kind::mann, nullptr, std::move(nu));
}

double Schedule::lambda(int k) const {
    if (kind_ == Kind::picard) return 0.0;
    if (!lambda_) throw std::logic_error("Schedule: lambda undefined for this kind");
    double l = lambda_(k);
    if (!(l >= 0.0 && l < 1.0)) throw std::invalid_argument("Schedule: lambda_k outside [0,1)");
    return l;
}

double Schedule::nu(int k, int i) const {
    if (kind_ != Kind::mann) throw std::logic_error("Schedule: nu only defined for mann");
    if (i < 0 || i > k) throw std::invalid_argument("Schedule: nu index out of range");
    double v = nu_(k, i);
    if (v < 0.0) throw std::invalid_argument("Schedule: nu_i^k must be >= 0");
    return v;
}

std::string Schedule::name() const {
    switch (kind_) {
        case Kind::picard: return "picard";
        case Kind::km: return "km";
        case Kind::halpern: return "halpern";
        case Kind::ohm: return "ohm";
        case Kind::mann: return "mann";
    }
    return "?";
}

double km_factor(const Schedule& s, int k) {
    if (k < 1) throw std::invalid_argument("km_factor: k must be >= 1");
    if (s.kind() == Schedule::Kind::picard) return static_cast<double>(k);
    if (s.kind() != Schedule::Kind::km) throw std::invalid_argument("km_factor: schedule kind");
    double acc = 0.0;
    for (int i = 1; i <= k; ++i) acc += 1.0 - s.lambda(i);
    return acc;
}

double halpern_theta(const Schedule& s, int k) {
    if (k < 0) throw std::invalid_argument("halpern_theta: k must be >= 0");
    if (!s.is_anchored()) throw std::invalid_argument("halpern_theta: schedule kind");
    double theta = 0.0;
    for (int i = 1; i <= k; ++i) theta = (1.0 - s.lambda(i)) * (1.0 + theta);
    return theta;
}

double mann_alpha(const Schedule& s, int k) {
    if (k < 0) throw std::invalid_argument("mann_alpha: k must be >= 0");
    if (s.kind() != Schedule::Kind::mann) throw std::invalid_argument("mann_alpha: schedule kind");
    std::vector<double> alpha(static_cast<std::size_t>(k) + 1, 0.0);
    for (int j = 1; j <= k; ++j) {
        double row_sum = 0.0;
        double acc = 0.0;
        for (int i = 0; i <= j; ++i) {
            double nu = s.nu(j, i);
            row_sum += nu;
            if (i >= 1) acc += nu * alpha[static_cast<std::size_t>(i) - 1];
        }
        if (std::abs(row_sum - 1.0) > 1e-12)
            throw std::invalid_argument("mann_alpha: nu row does not sum to 1");
        alpha[static_cast<std::size_t>(j)] = (1.0 - s.nu(j, 0)) + acc;
    }
    return alpha[static_cast<std::size_t>(k)];
}

double normalization_factor(const Schedule& s, int k) {
    if (k == 0) return 0.0;
    switch (s.kind()) {
        case Schedule::Kind::picard:
        case Schedule::Kind::km: return km_factor(s, k);
        case Schedule::Kind::halpern:
        case Schedule::Kind::ohm: return halpern_theta(s, k);
        case Schedule::Kind::mann: return mann_alpha(s, k);
    }
    return 0.0;
}

namespace {

void fill_derived(TrajectoryRecord& rec, const Vec& x0, const std::optional<GroundTruth>& truth,
                  double cesaro_weight_sum, double cesaro_acc) {
    rec.fpr_norm_sq = norm_sq(rec.fpr);
    if (rec.factor > 0.0) {
        rec.norm_iter = (-1.0 / rec.factor) * (rec.x - x0);
        rec.norm_iter_norm_sq = norm_sq(*rec.norm_iter);
    }
    if (truth) {
        const Vec& v = truth->v;
        rec.fpr_dist_v_sq = norm_sq(rec.fpr - v);
        double gap = norm(rec.fpr) - norm(v);
        rec.fpr_normgap_sq = gap * gap;
        if (rec.norm_iter) rec.norm_iter_dist_v_sq = norm_sq(*rec.norm_iter - v);
        if (cesaro_weight_sum > 0.0) rec.cesaro_dist_v_sq = cesaro_acc / cesaro_weight_sum;
    }
}

} // namespace

Trajectory run(const Operator& op, const Schedule& schedule, const Vec& x0, int K) {
    if (K < 1) throw std::invalid_argument("run: K must be >= 1");
    if (x0.size() != op.dimension()) throw std::invalid_argument("run: x0 dimension mismatch");

    Trajectory traj;
    traj.x0 = x0;
    traj.schedule_name = schedule.name();
    traj.schedule_kind = schedule.kind();
    if (op.ground_truth()) traj.ground_truth_v = op.ground_truth()->v;
    traj.records.reserve(static_cast<std::size_t>(K) + 1);

    const bool is_km_like =
        schedule.kind() == Schedule::Kind::picard || schedule.kind() == Schedule::Kind::km;
    const bool is_mann = schedule.kind() == Schedule::Kind::mann;

    // lambda values memoized per trajectory (K+1 is needed by the Cesaro
    // weights of the final record)
    std::vector<double> lam(static_cast<std::size_t>(K) + 2, 0.0);
    if (!is_mann)
        for (int i = 1; i <= K + 1; ++i) lam[static_cast<std::size_t>(i)] = schedule.lambda(i);

    // mann history: outputs[i] = T x^{i-1} with outputs[0] = x^0
    std::vector<Vec> outputs;
    std::vector<double> alpha;
    if (is_mann) {
        outputs.push_back(x0);
        alpha.push_back(0.0);
    }

    double km_sum = 0.0;           // sum (1 - lambda_i), i = 1..k
    double theta = 0.0;            // halpern theta_k
    double cesaro_w = 0.0;         // sum lambda_{i+1}(1 - lambda_{i+1}), i = 0..k
    double cesaro_acc = 0.0;       // same weights against ||fpr^i - v||^2

    Vec x = x0;
    Vec tx = op.evaluate(x);
    for (int k = 0; k <= K; ++k) {
        TrajectoryRecord rec;
        rec.k = k;
        rec.x = x;
        rec.fpr = x - tx;
        if (!rec.x.all_finite() || !rec.fpr.all_finite()) {
            traj.aborted_nonfinite = true;
            break;
        }
        if (is_mann) {
            rec.factor = alpha[static_cast<std::size_t>(k)];
        } else if (is_km_like) {
            rec.factor = km_sum;
        } else {
            rec.factor = theta;
        }
        if (is_km_like && op.ground_truth()) {
            double w = lam[static_cast<std::size_t>(k) + 1] * (1.0 - lam[static_cast<std::size_t>(k) + 1]);
            cesaro_w += w;
            cesaro_acc += w * norm_sq(rec.fpr - op.ground_truth()->v);
        }
        fill_derived(rec, x0, op.ground_truth(), cesaro_w, cesaro_acc);
        traj.records.push_back(std::move(rec));
        if (k == K) break;

        const double l = lam[static_cast<std::size_t>(k) + 1];
        switch (schedule.kind()) {
            case Schedule::Kind::picard:
                x = tx;
                km_sum += 1.0;
                break;
            case Schedule::Kind::km:
                x = l * x + (1.0 - l) * tx;
                km_sum += 1.0 - l;
                break;
            case Schedule::Kind::halpern:
            case Schedule::Kind::ohm:
                x = l * x0 + (1.0 - l) * tx;
                theta = (1.0 - l) * (1.0 + theta);
                break;
            case Schedule::Kind::mann: {
                outputs.push_back(tx); // T x^{k}
                int next = k + 1;
                double row_sum = 0.0;
                Vec xn(op.dimension());
                double a_acc = 0.0;
                for (int i = 0; i <= next; ++i) {
                    double nu = schedule.nu(next, i);
                    row_sum += nu;
                    axpy(nu, outputs[static_cast<std::size_t>(i)], xn);
                    if (i >= 1) a_acc += nu * alpha[static_cast<std::size_t>(i) - 1];
                }
                if (std::abs(row_sum - 1.0) > 1e-12)
                    throw std::invalid_argument("run: mann nu row does not sum to 1");
                alpha.push_back((1.0 - schedule.nu(next, 0)) + a_acc);
                x = std::move(xn);
                break;
            }
        }
        if (!x.all_finite()) {
            traj.aborted_nonfinite = true;
            break;
        }
        tx = op.evaluate(x);
    }
    return traj;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string opt_field(const std::optional<double>& v) { return v ? fmt17(*v) : std::string(); }

} // namespace

std::string trajectory_csv_string(const Trajectory& t) {
    std::ostringstream os;
    os << "k,fpr_norm_sq,norm_iter_norm_sq,fpr_dist_v_sq,norm_iter_dist_v_sq,cesaro_dist_v_sq,lyapunov\n";
    for (const TrajectoryRecord& r : t.records) {
        os << r.k << ',' << fmt17(r.fpr_norm_sq) << ',' << opt_field(r.norm_iter_norm_sq) << ','
           << opt_field(r.fpr_dist_v_sq) << ',' << opt_field(r.norm_iter_dist_v_sq) << ','
           << opt_field(r.cesaro_dist_v_sq) << ',' << opt_field(r.lyapunov) << '\n';
    }
    return os.str();
}

void write_trajectory_csv(const Trajectory& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
    out << trajectory_csv_string(t);
}

} // namespace fpi
