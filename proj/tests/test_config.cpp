#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fpi/config.hpp"
#include "fpi/linalg.hpp"

using namespace fpi;

TEST_CASE("parse sections, scalars, vectors, matrices") {
    Config cfg = Config::parse_string(
        "# comment\n"
        "[instance]\n"
        "m = 11\n"
        "epsilon = 0.5\n"
        "seed = 7\n"
        "\n"
        "[algo]\n"
        "variant = ohm\n"
        "v = 1, 2.5, -3\n"
        "A = 1,0;0,1\n");
    CHECK(cfg.get_int("instance", "m") == 11);
    CHECK(cfg.get_double("instance", "epsilon") == 0.5);
    CHECK(cfg.get("algo", "variant") == "ohm");
    Vec v = cfg.get_vec("algo", "v");
    CHECK(v.size() == 3);
    CHECK(v[2] == -3.0);
    Matrix a = cfg.get_matrix("algo", "A");
    CHECK(a.rows() == 2);
    CHECK(a(1, 1) == 1.0);
    CHECK_FALSE(cfg.has("instance", "missing"));
    CHECK_THROWS(cfg.get("instance", "missing"));
}

TEST_CASE("unknown keys rejected by the typo guard") {
    Config cfg = Config::parse_string("[a]\nx = 1\ny = 2\n");
    CHECK_NOTHROW(cfg.require_known_keys("a", {"x", "y"}));
    CHECK_THROWS(cfg.require_known_keys("a", {"x"}));
}

TEST_CASE("write and reparse") {
    Config cfg;
    cfg.set("s", "name", "value");
    cfg.set_double("s", "pi", 3.14159);
    cfg.set_vec("s", "v", Vec{1.0, 2.0});
    Config back = Config::parse_string(cfg.to_string());
    CHECK(back.get("s", "name") == "value");
    CHECK(back.get_double("s", "pi") == 3.14159);
    CHECK(norm(back.get_vec("s", "v") - Vec{1.0, 2.0}) == 0.0);
}

TEST_CASE("operator round-trip through config text") {
    Rng rng(1);
    std::vector<Operator> ops;
    ops.push_back(make_translation(Vec{0.0, 0.0, 1.0}));
    ops.push_back(make_counterexample());
    ops.push_back(make_worst_case(4, 1.0, 2.0));
    ops.push_back(make_random_affine(5, 99, 0.9, 1));
    ops.push_back(rotate_operator(make_worst_case(3, 1.0, 1.5), random_orthogonal(4, rng),
                                  random_gaussian_vec(4, rng)));
    for (const Operator& op : ops) {
        Config cfg = operator_to_config(op);
        Operator back = operator_from_config(Config::parse_string(cfg.to_string()));
        CHECK(back.kind() == op.kind());
        CHECK(back.dimension() == op.dimension());
        for (int trial = 0; trial < 10; ++trial) {
            Vec x = random_gaussian_vec(op.dimension(), rng);
            CHECK(norm(back.evaluate(x) - op.evaluate(x)) <= 1e-12 * std::max(1.0, norm(x)));
        }
        if (op.ground_truth()) {
            REQUIRE(back.ground_truth());
            CHECK(norm(back.ground_truth()->v - op.ground_truth()->v) <= 1e-12);
        }
    }
}

TEST_CASE("composites are not serializable") {
    Operator op = make_composite("custom", 2, [](const Vec& x) { return x; });
    CHECK_THROWS(operator_to_config(op));
}

TEST_CASE("compact command-line operator specs") {
    Operator rot = operator_from_spec("rotation-shift");
    CHECK(rot.kind() == "rotation_shift");

    Operator tr = operator_from_spec("translation:v=0,0,1");
    CHECK(tr.dimension() == 3);
    CHECK(tr.evaluate(Vec{0.0, 0.0, 0.0})[2] == -1.0);

    Operator wc = operator_from_spec("worst-case:k=10");
    CHECK(wc.dimension() == 11);
    // default alpha is the tightness choice sqrt(k) v_norm
    CHECK(wc.residual(Vec(11))[0] == doctest::Approx(std::sqrt(10.0)));

    Operator wc2 = operator_from_spec("worst-case:k=3,v_norm=2,alpha=0.5");
    CHECK(norm(wc2.ground_truth()->v) == doctest::Approx(2.0));

    CHECK_THROWS(operator_from_spec("unknown-thing"));
    CHECK_THROWS(operator_from_spec("worst-case"));
}
