#include "martcheck/scott.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace martcheck {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(const ScottParams& p) {
    if (!(p.alpha > 0.0) || !(p.m > 0.0) || !(p.beta > 0.0)) {
        throw std::invalid_argument("scott parameters require alpha > 0, m > 0 and beta > 0");
    }
}

std::string number_text(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

DiffusionSpec scott_spec(const ScottParams& p) {
    validate(p);
    return DiffusionSpec::make(StateInterval{0.0, kInf}, "alpha*(m-x)", "beta", "exp(x)", p.x0,
                               {{"alpha", p.alpha}, {"m", p.m}, {"beta", p.beta}});
}

ModelFile scott_model(const ScottParams& p, const CorrelationScheme& scheme) {
    return {scott_spec(p), scheme};
}

double scott_log_density_p(const ScottParams& p, double c, double y) {
    const double dy = y - p.m;
    const double dc = c - p.m;
    return p.alpha / (p.beta * p.beta) * (dy * dy - dc * dc);
}

double scott_log_density_q(const ScottParams& p, const CorrelationScheme& scheme, double c,
                           double y) {
    const double lambda = scheme.lambda();
    return scott_log_density_p(p, c, y) -
           2.0 * lambda / p.beta * (std::exp(y) - std::exp(c));
}

AnalyticProfile analytic_profile(const ScottParams& p, const CorrelationScheme& scheme) {
    validate(p);
    const AnalyticMeasureProfile divergent_upper{
        Finiteness::Finite,   Finiteness::Infinite,  // s
        Finiteness::Finite,   Finiteness::Infinite,  // v
        Finiteness::Finite,   Finiteness::Infinite,  // v_b
    };
    // lambda > 0 pulls the density down so fast at +inf that everything but
    // the loading-weighted test function converges there.
    const AnalyticMeasureProfile damped_upper{
        Finiteness::Finite, Finiteness::Finite,    // s
        Finiteness::Finite, Finiteness::Finite,    // v
        Finiteness::Finite, Finiteness::Infinite,  // v_b
    };
    AnalyticProfile out;
    out.p = divergent_upper;
    out.q = scheme.lambda() > 0.0 ? damped_upper : divergent_upper;
    return out;
}

std::vector<std::string> profile_mismatches(const AnalyticProfile& analytic,
                                            const BoundaryProfile& numeric) {
    std::vector<std::string> out;
    const auto check = [&out](const char* slot, Finiteness expected, const IntegralVerdict& got) {
        if (got.is_inconclusive()) {
            out.push_back(std::string(slot) + ": inconclusive (" + got.reason + ")");
            return;
        }
        const bool want_finite = expected == Finiteness::Finite;
        if (want_finite != got.is_finite()) {
            out.push_back(std::string(slot) + ": expected " +
                          (want_finite ? "finite" : "infinite") + ", got " +
                          (got.is_finite() ? "finite" : "infinite"));
        }
    };
    const auto check_measure = [&](const char* tag, const AnalyticMeasureProfile& expect,
                                   const MeasureProfile& got) {
        const std::string t(tag);
        check((t + ".s_lower").c_str(), expect.s_lower, got.s_lower);
        check((t + ".s_upper").c_str(), expect.s_upper, got.s_upper);
        check((t + ".v_lower").c_str(), expect.v_lower, got.v_lower);
        check((t + ".v_upper").c_str(), expect.v_upper, got.v_upper);
        check((t + ".vb_lower").c_str(), expect.vb_lower, got.vb_lower);
        check((t + ".vb_upper").c_str(), expect.vb_upper, got.vb_upper);
    };
    check_measure("p", analytic.p, numeric.p);
    check_measure("q", analytic.q, numeric.q);
    return out;
}

std::vector<TailAnnotation> tail_annotations(const ScottParams& p,
                                             const CorrelationScheme& scheme) {
    validate(p);
    std::vector<TailAnnotation> out;
    const CoefficientField lower_eq{[](double y) { return y; }, "x"};
    out.push_back({Boundary::Lower, MeasureTag::P, lower_eq});
    out.push_back({Boundary::Lower, MeasureTag::Q, lower_eq});
    const double lambda = scheme.lambda();
    if (lambda > 0.0) {
        const double k = p.beta / (2.0 * lambda);
        out.push_back({Boundary::Upper, MeasureTag::Q,
                       {[k](double y) { return k * std::exp(-y); },
                        number_text(k) + "*exp(-x)"}});
    }
    return out;
}

TheoremVerdict theorem_verdict(const CorrelationScheme& scheme) {
    const bool martingale =
        scheme.kind == CorrelationScheme::Kind::Cholesky && scheme.rho <= 0.0;
    TheoremVerdict out;
    out.martingale_on_compacts =
        martingale ? Verdict{Verdict::Answer::Yes, "C"} : Verdict{Verdict::Answer::No, ""};
    out.uniformly_integrable =
        martingale ? Verdict{Verdict::Answer::Yes, "C'"} : Verdict{Verdict::Answer::No, ""};
    out.positive_finite_T = {Verdict::Answer::Yes, "3"};
    out.positive_at_infinity_conditions = {Verdict::Answer::Yes, "3"};
    out.prob_positive_at_infinity_less_than_one = true;
    return out;
}

}  // namespace martcheck
