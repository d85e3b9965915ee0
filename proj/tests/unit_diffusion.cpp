#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "martcheck/diffusion.hpp"

using namespace martcheck;

namespace {

DiffusionSpec scott_like(double alpha, double m, double beta, double x0) {
    return DiffusionSpec::make(
        StateInterval{0.0, std::numeric_limits<double>::infinity()}, "alpha*(m-x)", "beta",
        "exp(x)", x0, ParamBindings{{"alpha", alpha}, {"m", m}, {"beta", beta}});
}

}  // namespace

TEST_CASE("correlation scheme validation and bracket slope") {
    CHECK_THROWS_AS(CorrelationScheme::cholesky(1.5), std::invalid_argument);
    CHECK_THROWS_AS(CorrelationScheme::cholesky(-1.0000001), std::invalid_argument);
    CHECK_THROWS_AS(CorrelationScheme::wu_yor(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(CorrelationScheme::wu_yor(1.1), std::invalid_argument);

    CHECK(CorrelationScheme::cholesky(-1.0).rho == -1.0);
    CHECK(CorrelationScheme::cholesky(1.0).rho == 1.0);
    CHECK(CorrelationScheme::wu_yor(0.0).rho == 0.0);
    CHECK(CorrelationScheme::wu_yor(1.0).rho == 1.0);

    // the bracket slope is rho only for Cholesky coupling; the Wu-Yor kernel
    // keeps slope 1 at every rho
    CHECK(CorrelationScheme::cholesky(-0.5).lambda() == -0.5);
    CHECK(CorrelationScheme::cholesky(0.0).lambda() == 0.0);
    CHECK(CorrelationScheme::wu_yor(0.0).lambda() == 1.0);
    CHECK(CorrelationScheme::wu_yor(0.5).lambda() == 1.0);
    CHECK(CorrelationScheme::wu_yor(1.0).lambda() == 1.0);
}

TEST_CASE("spec construction validates interval, x0 and parameter bindings") {
    CHECK_THROWS_AS(DiffusionSpec::make(StateInterval{1.0, 1.0}, "0", "1", "0", 1.0, {}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DiffusionSpec::make(StateInterval{0.0, 1.0}, "0", "1", "0", 1.0, {}),
                    std::invalid_argument);  // x0 on the boundary
    CHECK_THROWS_AS(DiffusionSpec::make(StateInterval{0.0, 1.0}, "0", "1", "0", 2.0, {}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DiffusionSpec::make(StateInterval{0.0, 1.0}, "alpha*(m-x)", "1", "0", 0.5,
                                        ParamBindings{{"alpha", 1.0}}),
                    std::invalid_argument);  // m unbound

    DiffusionSpec s = scott_like(1.0, 1.0, 1.0, 1.0);
    CHECK(s.eval_mu(2.0) == doctest::Approx(-1.0));
    CHECK(s.eval_sigma(0.25) == doctest::Approx(1.0));
    CHECK(s.eval_b(2.0) == doctest::Approx(std::exp(2.0)));
    CHECK(s.interval.upper_is_infinite());
    CHECK_FALSE(s.interval.lower_is_infinite());
}

TEST_CASE("coefficient fields expose callable and formula consistently") {
    DiffusionSpec s = scott_like(1.7, 0.4, 0.9, 0.4);
    auto mu = drift_field(s);
    auto sg = sigma_field(s);
    auto b = b_field(s);
    for (double x : {0.1, 0.4, 1.0, 3.0}) {
        CHECK(mu(x) == doctest::Approx(1.7 * (0.4 - x)));
        CHECK(sg(x) == doctest::Approx(0.9));
        CHECK(b(x) == doctest::Approx(std::exp(x)));
    }
    // formulas re-parse and agree with the callables
    auto mu_ast = parse_expr(mu.formula);
    for (double x : {0.1, 2.0}) CHECK(eval_expr(*mu_ast, x, s.params) == doctest::Approx(mu(x)));
}

TEST_CASE("changed-measure drift adds lambda * b * sigma") {
    DiffusionSpec s = scott_like(2.0, 0.3, 0.5, 0.3);

    auto chol = q_drift(s, CorrelationScheme::cholesky(0.6));
    auto chol_neg = q_drift(s, CorrelationScheme::cholesky(-0.75));
    auto chol_zero = q_drift(s, CorrelationScheme::cholesky(0.0));
    auto wy0 = q_drift(s, CorrelationScheme::wu_yor(0.0));
    auto wy1 = q_drift(s, CorrelationScheme::wu_yor(1.0));
    auto chol1 = q_drift(s, CorrelationScheme::cholesky(1.0));
    auto plain = drift_field(s);

    for (double x : {0.05, 0.3, 1.0, 2.5}) {
        const double base = 2.0 * (0.3 - x);
        CHECK(chol(x) == doctest::Approx(base + 0.6 * std::exp(x) * 0.5));
        CHECK(chol_neg(x) == doctest::Approx(base - 0.75 * std::exp(x) * 0.5));
        CHECK(chol_zero(x) == doctest::Approx(plain(x)));
        // Wu-Yor drift correction is rho-independent and equals Cholesky at rho=1
        CHECK(wy0(x) == doctest::Approx(base + std::exp(x) * 0.5));
        CHECK(wy1(x) == doctest::Approx(wy0(x)));
        CHECK(chol1(x) == doctest::Approx(wy0(x)));
    }

    // the emitted formula evaluates to the same values as the callable
    auto ast = parse_expr(chol_neg.formula);
    for (double x : {0.05, 1.0, 2.5})
        CHECK(eval_expr(*ast, x, s.params) == doctest::Approx(chol_neg(x)).epsilon(1e-12));
}

TEST_CASE("assumption probe: clean model yields no warnings") {
    DiffusionSpec s = scott_like(1.0, 1.0, 1.0, 1.0);
    CHECK(check_assumption_h(s, 16).empty());

    // mu = 1/x is singular only at the boundary, which the probe never touches
    DiffusionSpec inv = DiffusionSpec::make(
        StateInterval{0.0, std::numeric_limits<double>::infinity()}, "1/x", "1", "0", 1.0, {});
    CHECK(check_assumption_h(inv, 16).empty());
}

TEST_CASE("assumption probe: sign-changing sigma is reported") {
    DiffusionSpec s = DiffusionSpec::make(
        StateInterval{0.0, std::numeric_limits<double>::infinity()}, "0", "x-1", "0", 0.5, {});
    auto warnings = check_assumption_h(s, 16);
    REQUIRE_FALSE(warnings.empty());
    bool saw_sign_change = false;
    for (const auto& w : warnings)
        if (w.message.find("sign") != std::string::npos) saw_sign_change = true;
    CHECK(saw_sign_change);
}

TEST_CASE("assumption probe: sigma vanishing at a probe point is reported") {
    // probe grid contains x0 itself, where sigma = x - 2 vanishes
    DiffusionSpec s = DiffusionSpec::make(
        StateInterval{0.0, std::numeric_limits<double>::infinity()}, "0", "x-2", "0", 2.0, {});
    auto warnings = check_assumption_h(s, 16);
    REQUIRE_FALSE(warnings.empty());
    bool saw_vanish = false;
    for (const auto& w : warnings)
        if (w.message.find("vanishes at probe") != std::string::npos) saw_vanish = true;
    CHECK(saw_vanish);
}

TEST_CASE("model json round trip preserves everything, including infinities") {
    ModelFile m{scott_like(1.25, 0.75, 0.5, 0.9), CorrelationScheme::cholesky(-0.5)};
    std::string text = model_to_json_text(m);
    ModelFile back = model_from_json_text(text);

    CHECK(back.spec.interval.lower == 0.0);
    CHECK(back.spec.interval.upper_is_infinite());
    CHECK(back.spec.x0 == 0.9);
    CHECK(back.spec.params == m.spec.params);
    CHECK(back.scheme.kind == CorrelationScheme::Kind::Cholesky);
    CHECK(back.scheme.rho == -0.5);
    CHECK(expr_equal(*back.spec.mu, *m.spec.mu));
    CHECK(expr_equal(*back.spec.sigma, *m.spec.sigma));
    CHECK(expr_equal(*back.spec.b, *m.spec.b));

    // serialization is stable once normalized
    CHECK(model_to_json_text(back) == text);
}

TEST_CASE("model json round trip with doubly infinite interval and wu_yor") {
    DiffusionSpec s = DiffusionSpec::make(
        StateInterval{-std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()},
        "-x", "1+x^2", "x", 0.0, {});
    ModelFile m{s, CorrelationScheme::wu_yor(0.5)};
    ModelFile back = model_from_json_text(model_to_json_text(m));
    CHECK(back.spec.interval.lower_is_infinite());
    CHECK(back.spec.interval.upper_is_infinite());
    CHECK(back.scheme.kind == CorrelationScheme::Kind::WuYor);
    CHECK(back.scheme.rho == 0.5);
}

TEST_CASE("model json rejects malformed input") {
    CHECK_THROWS(model_from_json_text("{"));
    CHECK_THROWS_AS(
        model_from_json_text(R"({"interval":{"lower":0,"upper":"oops"},"mu":"0","sigma":"1",
                                 "b":"0","x0":0.5,"params":{},
                                 "scheme":{"kind":"cholesky","rho":0}})"),
        std::invalid_argument);
    CHECK_THROWS_AS(
        model_from_json_text(R"({"interval":{"lower":0,"upper":"inf"},"mu":"0","sigma":"1",
                                 "b":"0","x0":0.5,"params":{},
                                 "scheme":{"kind":"gaussian","rho":0}})"),
        std::invalid_argument);
    // rho outside the scheme's admissible range
    CHECK_THROWS_AS(
        model_from_json_text(R"({"interval":{"lower":0,"upper":"inf"},"mu":"0","sigma":"1",
                                 "b":"0","x0":0.5,"params":{},
                                 "scheme":{"kind":"wu_yor","rho":-0.25}})"),
        std::invalid_argument);
}
