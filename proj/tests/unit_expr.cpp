#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "martcheck/expr.hpp"
#include "reference_eval.hpp"

using namespace martcheck;

namespace {

const ParamBindings kParams = {{"alpha", 1.7}, {"beta", 0.4}, {"m", 2.25}, {"rho", -0.5}};

double ev(const std::string& text, double x = 0.0) {
    return eval_expr(*parse_expr(text), x, kParams);
}

// Random AST generator for round-trip / agreement properties.
struct Gen {
    std::mt19937 rng;
    explicit Gen(unsigned seed) : rng(seed) {}

    double literal() {
        std::uniform_int_distribution<int> pick(0, 3);
        switch (pick(rng)) {
            case 0: return std::uniform_int_distribution<int>(0, 9)(rng);
            case 1: return std::uniform_real_distribution<double>(0.0, 10.0)(rng);
            case 2: return 0.5;
            default: return std::uniform_real_distribution<double>(0.0, 1.0)(rng) * 1e3;
        }
    }

    ExprPtr leaf() {
        std::uniform_int_distribution<int> pick(0, 5);
        switch (pick(rng)) {
            case 0: case 1:
                return std::make_shared<Expr>(Expr{Expr::Literal{literal()}});
            case 2: case 3:
                return std::make_shared<Expr>(Expr{Expr::Var{}});
            case 4:
                return std::make_shared<Expr>(Expr{Expr::Param{"alpha"}});
            default:
                return std::make_shared<Expr>(Expr{Expr::Param{"beta"}});
        }
    }

    ExprPtr node(int depth) {
        if (depth <= 0) return leaf();
        std::uniform_int_distribution<int> pick(0, 9);
        int k = pick(rng);
        if (k <= 1) return leaf();
        if (k == 2) return std::make_shared<Expr>(Expr{Expr::Neg{node(depth - 1)}});
        if (k == 3) {
            std::uniform_int_distribution<int> f(0, 3);
            FuncKind fn = static_cast<FuncKind>(f(rng));
            return std::make_shared<Expr>(Expr{Expr::Call{fn, node(depth - 1)}});
        }
        std::uniform_int_distribution<int> o(0, 4);
        BinOp op = static_cast<BinOp>(o(rng));
        if (op == BinOp::Pow) {
            // keep exponents small literals so evaluation stays finite
            auto e = std::make_shared<Expr>(
                Expr{Expr::Literal{static_cast<double>(std::uniform_int_distribution<int>(0, 3)(rng))}});
            return std::make_shared<Expr>(Expr{Expr::Binary{op, node(depth - 1), e}});
        }
        return std::make_shared<Expr>(Expr{Expr::Binary{op, node(depth - 1), node(depth - 1)}});
    }
};

}  // namespace

TEST_CASE("power is right associative and tighter than unary minus") {
    CHECK(ev("2^3^2") == doctest::Approx(512.0).epsilon(1e-15));
    CHECK(ev("-2^2") == doctest::Approx(-4.0));
    CHECK(ev("2^-3") == doctest::Approx(0.125));
    CHECK(ev("(2^3)^2") == doctest::Approx(64.0));
}

TEST_CASE("arithmetic, precedence, whitespace") {
    CHECK(ev("x^2-2*x+1", 3.0) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(ev(" 1 +  2*3 ") == doctest::Approx(7.0));
    CHECK(ev("2*-3") == doctest::Approx(-6.0));
    CHECK(ev("1-2-3") == doctest::Approx(-4.0));        // left assoc
    CHECK(ev("12/4/3") == doctest::Approx(1.0));        // left assoc
    CHECK(ev("1e3*0.5") == doctest::Approx(500.0));
    CHECK(ev(".5*4") == doctest::Approx(2.0));
    CHECK(ev("alpha*(m-x)", 2.0) == doctest::Approx(1.7 * 0.25));
    CHECK(ev("exp(log(sqrt(abs(-16))))") == doctest::Approx(4.0));
}

TEST_CASE("syntax errors carry positions") {
    CHECK_THROWS_AS(parse_expr("exp(x"), SyntaxError);
    try {
        parse_expr("exp(x");
    } catch (const SyntaxError& e) {
        CHECK(e.position == 5);
    }
    try {
        parse_expr("foo(x)");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.position == 0);  // unknown function reported at its name
    }
    try {
        parse_expr("2 x");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.position == 2);  // trailing token
    }
    try {
        parse_expr("1+");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.position == 2);
    }
    CHECK_THROWS_AS(parse_expr("(x+1"), SyntaxError);
    CHECK_THROWS_AS(parse_expr("x$1"), SyntaxError);
    CHECK_THROWS_AS(parse_expr(""), SyntaxError);
}

TEST_CASE("domain errors are signaled, not silent NaN") {
    CHECK_THROWS_AS(ev("log(-1)"), DomainError);
    CHECK_THROWS_AS(ev("log(0)"), DomainError);
    CHECK_THROWS_AS(ev("sqrt(-2)"), DomainError);
    CHECK_THROWS_AS(ev("(-2)^0.5"), DomainError);
    CHECK_THROWS_AS(ev("1/(x-x)"), DomainError);
    CHECK(ev("(-2)^3") == doctest::Approx(-8.0));  // integer exponent is fine
}

TEST_CASE("unbound parameters are reported by name") {
    try {
        eval_expr(*parse_expr("gamma*x"), 1.0, kParams);
        FAIL("expected UnboundParameter");
    } catch (const UnboundParameter& e) {
        CHECK(e.name == "gamma");
    }
}

TEST_CASE("print / parse round trip is structurally exact") {
    // Hand-picked shapes that stress parenthesization decisions.
    for (const char* text : {"a-(b-c)", "(a-b)-c", "a+(b+c)", "-(x+1)", "--x", "a--b",
                             "(-x)^2", "-x^2", "2^(1+x)", "x*(1/beta)", "(a/b)/c",
                             "exp(x)^2", "abs(-x)*sqrt(x+1)"}) {
        ExprPtr e = parse_expr(text);
        ExprPtr again = parse_expr(print_expr(*e));
        CAPTURE(text);
        CAPTURE(print_expr(*e));
        CHECK(expr_equal(*e, *again));
    }

    Gen gen(20260822u);
    for (int i = 0; i < 100; ++i) {
        ExprPtr e = gen.node(5);
        std::string printed = print_expr(*e);
        CAPTURE(printed);
        ExprPtr again = parse_expr(printed);
        CHECK(expr_equal(*e, *again));
    }
}

TEST_CASE("evaluation agrees with an independent shunting-yard evaluator") {
    Gen gen(98127u);
    std::map<std::string, double> params(kParams.begin(), kParams.end());
    int compared = 0;
    for (int i = 0; i < 300; ++i) {
        ExprPtr e = gen.node(4);
        std::string text = print_expr(*e);
        for (double x : {-1.5, 0.25, 3.0}) {
            double mine = 0, ref = 0;
            bool mine_threw = false, ref_threw = false;
            try {
                mine = eval_expr(*e, x, kParams);
            } catch (const std::exception&) {
                mine_threw = true;
            }
            try {
                ref = refeval::reference_eval(text, x, params);
            } catch (const std::exception&) {
                ref_threw = true;
            }
            CAPTURE(text);
            CAPTURE(x);
            REQUIRE(mine_threw == ref_threw);
            if (!mine_threw && std::isfinite(mine) && std::isfinite(ref)) {
                double scale = std::max({1.0, std::fabs(mine), std::fabs(ref)});
                CHECK(std::fabs(mine - ref) <= 1e-12 * scale);
                ++compared;
            }
        }
    }
    CHECK(compared > 400);  // the corpus must be substantive, not all-throwing
}

TEST_CASE("literal zero detection is symbolic") {
    CHECK(is_literal_zero(*parse_expr("0")));
    CHECK(is_literal_zero(*parse_expr("0.0")));
    CHECK_FALSE(is_literal_zero(*parse_expr("x-x")));
    CHECK_FALSE(is_literal_zero(*parse_expr("1")));
}
