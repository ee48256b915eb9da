#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fpi/analysis.hpp"
#include "fpi/linalg.hpp"
#include "fpi/operators.hpp"

using namespace fpi;

namespace {

// independent term-by-term rewrite of the potential; kept deliberately
// different in structure from the library evaluation
double lyapunov_reference(const Operator& op, const Vec& x0, const Vec& xk, const Vec& xa, int k) {
    Vec rk = xk - op.evaluate(xk);
    Vec ra = xa - op.evaluate(xa);
    double kd = k;
    double t1 = (kd + 1.0) * kd * dot(rk, rk);
    double t2 = (kd + 1.0) * 2.0 * dot(rk, xk - x0);
    double t3 = kd * (kd + 1.0) * (dot((-2.0 / kd) * (xk - x0), ra) - dot(ra, ra));
    Vec z = xk - xa + (kd / 2.0) * ra;
    double t4 = 2.0 * (kd + 1.0) / kd * dot(z, z);
    double h = 0.0;
    for (int n = 1; n <= k; ++n) h += 1.0 / n;
    double t5 = -h * dot(x0 - xa, x0 - xa);
    return t1 + t2 + t3 + t4 + t5;
}

} // namespace

TEST_CASE("estimate_idv on a translation is exact at K=1") {
    Operator op = make_translation(Vec{0.0, 2.0, -1.0});
    Certificate c = estimate_idv(op, Vec{5.0, 5.0, 5.0}, 1);
    CHECK(norm(c.v_hat - op.ground_truth()->v) <= 1e-14);
    CHECK(c.v_hat_norm == doctest::Approx(norm(op.ground_truth()->v)).epsilon(1e-12));
}

TEST_CASE("estimate_idv on the rotation counterexample") {
    Operator op = make_counterexample();
    Certificate c = estimate_idv(op, Vec{1.0, 0.0, 0.0}, 10000);
    CHECK(norm(c.v_hat - op.ground_truth()->v) <= 2.0 / 10000.0);
}

TEST_CASE("estimate_idv hits the tight worst-case error exactly") {
    const std::size_t k = 5;
    Operator op = make_worst_case(k, 1.0, std::sqrt(5.0));
    Certificate c = estimate_idv(op, Vec(k + 1), static_cast<int>(k));
    double err = norm_sq(c.v_hat - op.ground_truth()->v);
    double r0 = norm_sq(*op.ground_truth()->x_star);
    CHECK(err == doctest::Approx(4.0 / 25.0 * r0).epsilon(1e-8));
}

TEST_CASE("estimate_idv alternative sources") {
    Operator op = make_counterexample();
    Certificate h = estimate_idv(op, Vec{1.0, 0.0, 0.0}, 2000, IdvMethod::halpern_normalized);
    CHECK(norm(h.v_hat - op.ground_truth()->v) <= 4.0 / 1000.0);
    Certificate f = estimate_idv(op, Vec{1.0, 0.0, 0.0}, 50, IdvMethod::fpr);
    // the rotation keeps the residual sqrt(2) away from v
    CHECK(norm(f.v_hat - op.ground_truth()->v) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("envelope closed-form values") {
    CHECK(envelope_value(make_envelope(EnvelopeId::picard_norm_iter, 1.0), 10) ==
          doctest::Approx(0.04).epsilon(1e-15));
    CHECK(envelope_value(make_envelope(EnvelopeId::km_half_fpr, 1.0), 9) ==
          doctest::Approx(0.4).epsilon(1e-15));
    double h3 = 1.0 + 0.5 + 1.0 / 3.0;
    double expected = std::pow((std::sqrt(h3 + 4.0) + 1.0) / 4.0, 2.0);
    CHECK(envelope_value(make_envelope(EnvelopeId::ohm_fpr_dist, 1.0), 3) ==
          doctest::Approx(expected).epsilon(1e-15));
    CHECK(envelope_value(make_envelope(EnvelopeId::ohm_norm_iter, 2.0), 4) ==
          doctest::Approx(2.0).epsilon(1e-15));
    // general km form against the specialized one
    Schedule half = Schedule::km([](int) { return 0.5; });
    CHECK(envelope_value(make_envelope(EnvelopeId::km_fpr, 1.0, half), 9) ==
          doctest::Approx(0.4).epsilon(1e-14));
    Schedule zero = Schedule::km([](int) { return 0.0; });
    CHECK(envelope_value(make_envelope(EnvelopeId::km_norm_iter, 1.0, zero), 10) ==
          doctest::Approx(0.04).epsilon(1e-14));
}

TEST_CASE("lyapunov matches the independent evaluation and the k=1 bound") {
    Operator op = make_translation(Vec{0.5, 0.5});
    Vec x0{3.0, -1.0};
    Trajectory t = run(op, Schedule::ohm(), x0, 30);
    Vec xa{0.25, 0.25}; // any witness works for a translation
    for (int k : {1, 2, 7, 30}) {
        double lib = lyapunov(op, t, xa, k);
        double ref = lyapunov_reference(op, x0, t.records[static_cast<std::size_t>(k)].x, xa, k);
        CHECK(lib == doctest::Approx(ref).epsilon(1e-12));
    }
    CHECK(lyapunov(op, t, xa, 1) <= 3.0 * norm_sq(x0 - xa) + 1e-9);
}

TEST_CASE("lyapunov decreases along anchored runs on random operators") {
    Rng rng(10);
    for (std::uint64_t seed : {401u, 402u, 403u}) {
        Operator op = make_random_affine(6, seed, 1.0, 1);
        Vec x0 = 2.0 * random_gaussian_vec(6, rng);
        Trajectory t = run(op, Schedule::ohm(), x0, 200);
        const Vec& xa = *op.ground_truth()->x_star;
        double prev = lyapunov(op, t, xa, 1);
        CHECK(prev <= 3.0 * norm_sq(x0 - xa) + 1e-9);
        for (int k = 2; k <= 200; ++k) {
            double cur = lyapunov(op, t, xa, k);
            CHECK(cur <= prev + 1e-8);
            prev = cur;
        }
    }
}

TEST_CASE("lyapunov rejects non-anchored trajectories") {
    Operator op = make_translation(Vec{1.0});
    Trajectory t = run(op, Schedule::picard(), Vec{0.0}, 5);
    CHECK_THROWS_AS(lyapunov(op, t, Vec{0.0}, 1), std::invalid_argument);
}

TEST_CASE("with_lyapunov fills the csv column") {
    Operator op = make_translation(Vec{1.0, 0.0});
    Trajectory t = run(op, Schedule::ohm(), Vec{5.0, 1.0}, 10);
    Trajectory filled = with_lyapunov(op, t, *op.ground_truth()->x_star);
    CHECK_FALSE(filled.records[0].lyapunov);
    for (std::size_t k = 1; k < filled.records.size(); ++k) REQUIRE(filled.records[k].lyapunov);
}

TEST_CASE("projection inequality") {
    SUBCASE("translation: equality to machine precision") {
        Operator op = make_translation(Vec{0.0, 3.0});
        Trajectory t = run(op, Schedule::picard(), Vec{1.0, 1.0}, 10);
        ProjectionReport rep = check_projection_inequality(t, op.ground_truth()->v);
        CHECK(rep.pass);
        CHECK(std::abs(rep.worst_margin) <= 1e-10);
    }
    SUBCASE("rotation counterexample: residual inner product is exactly ||v||^2") {
        Operator op = make_counterexample();
        Trajectory t = run(op, Schedule::picard(), Vec{1.0, 0.0, 0.0}, 100);
        ProjectionReport rep = check_projection_inequality(t, op.ground_truth()->v);
        CHECK(rep.pass);
        CHECK(rep.worst_margin >= -1e-12);
    }
    SUBCASE("worst-case anchored run, K=50") {
        Operator op = make_worst_case(6, 1.0, worst_case_default_alpha(6, 1.0));
        Trajectory t = run(op, Schedule::ohm(), Vec(7), 50);
        ProjectionReport rep = check_projection_inequality(t, op.ground_truth()->v);
        CHECK(rep.pass);
    }
}

TEST_CASE("measure equivalence along trajectories") {
    Rng rng(12);
    Operator op = make_random_affine(7, 88, 1.0, 2);
    Trajectory t = run(op, Schedule::ohm(), 2.0 * random_gaussian_vec(7, rng), 100);
    const Vec& v = op.ground_truth()->v;
    for (const TrajectoryRecord& r : t.records) {
        // ||v^k - v||^2 <= ||v^k||^2 - ||v||^2 given the projection inequality
        CHECK(*r.fpr_dist_v_sq <= r.fpr_norm_sq - norm_sq(v) + 1e-8);
        // (||v^k|| - ||v||)^2 <= ||v^k - v||^2
        CHECK(*r.fpr_normgap_sq <= *r.fpr_dist_v_sq + 1e-12);
    }
}

TEST_CASE("audit_rate") {
    SUBCASE("tightness: picard on the worst case meets the envelope at the horizon") {
        const std::size_t k = 10;
        Operator op = make_worst_case(k, 1.0, worst_case_default_alpha(k, 1.0));
        double r0 = norm_sq(*op.ground_truth()->x_star);
        Trajectory t = run(op, Schedule::picard(), Vec(k + 1), static_cast<int>(k));
        AuditReport rep = audit_rate(t, make_envelope(EnvelopeId::picard_norm_iter, r0),
                                     AuditQuantity::norm_iter_dist_v_sq);
        CHECK(rep.pass);
        CHECK(rep.slack.back() == doctest::Approx(0.0).epsilon(1e-8));
    }
    SUBCASE("ohm on a translation against the 16/k^2 residual gap bound") {
        Operator op = make_translation(Vec{1.0, 1.0});
        Trajectory t = run(op, Schedule::ohm(), Vec{9.0, -2.0}, 60);
        AuditReport rep = audit_rate(t, make_envelope(EnvelopeId::ohm_fpr_normgap,
                                                      norm_sq(t.x0 - *op.ground_truth()->x_star)),
                                     AuditQuantity::fpr_normgap_sq);
        CHECK(rep.pass);
    }
    SUBCASE("km 1/2 on the rotation counterexample") {
        Operator op = make_counterexample();
        Schedule s = Schedule::km([](int) { return 0.5; });
        Trajectory t = run(op, s, Vec{1.0, 0.0, 0.0}, 200);
        double r0 = norm_sq(Vec{1.0, 0.0, 0.0} - *op.ground_truth()->x_star);
        AuditReport cesaro = audit_rate(t, make_envelope(EnvelopeId::km_fpr, r0, s),
                                        AuditQuantity::cesaro_dist_v_sq);
        CHECK(cesaro.pass);
        AuditReport gap = audit_rate(t, make_envelope(EnvelopeId::km_fpr, r0, s),
                                     AuditQuantity::fpr_normgap_sq);
        CHECK(gap.pass);
    }
    SUBCASE("missing ground truth raises") {
        Matrix a = Matrix::identity(2);
        Operator op = make_affine(a, Vec{1.0, 0.0}, false);
        Trajectory t = run(op, Schedule::picard(), Vec(2), 5);
        CHECK_THROWS_AS(audit_rate(t, make_envelope(EnvelopeId::picard_norm_iter, 1.0),
                                   AuditQuantity::norm_iter_dist_v_sq),
                        std::invalid_argument);
    }
}

TEST_CASE("audit csv has per-k rows and a summary line") {
    Operator op = make_translation(Vec{1.0});
    Trajectory t = run(op, Schedule::picard(), Vec{4.0}, 6);
    AuditReport rep = audit_rate(t, make_envelope(EnvelopeId::picard_norm_iter,
                                                  norm_sq(t.x0 - *op.ground_truth()->x_star)),
                                 AuditQuantity::norm_iter_dist_v_sq);
    std::string csv = audit_csv_string(rep);
    CHECK(csv.find("k,slack") == 0);
    CHECK(csv.find("min_slack") != std::string::npos);
}
