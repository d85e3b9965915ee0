#include "martcheck/classifier.hpp"

#include <cmath>
#include <initializer_list>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>
#include <variant>

#include "json.hpp"
#include "martcheck/expr.hpp"

namespace martcheck {

namespace {

// ---- three-valued condition logic ------------------------------------------

enum class Tri { True, False, Unknown };

Tri tri_and(Tri a, Tri b) {
    if (a == Tri::False || b == Tri::False) return Tri::False;
    if (a == Tri::True && b == Tri::True) return Tri::True;
    return Tri::Unknown;
}

Tri lit_finite(const IntegralVerdict& v) {
    switch (v.kind) {
        case IntegralVerdict::Kind::Finite: return Tri::True;
        case IntegralVerdict::Kind::Infinite: return Tri::False;
        default: return Tri::Unknown;
    }
}

Tri lit_infinite(const IntegralVerdict& v) {
    switch (v.kind) {
        case IntegralVerdict::Kind::Finite: return Tri::False;
        case IntegralVerdict::Kind::Infinite: return Tri::True;
        default: return Tri::Unknown;
    }
}

// Signed divergence literal (s(l) = -inf needs the sign, not just divergence).
Tri lit_infinite_sign(const IntegralVerdict& v, int sign) {
    switch (v.kind) {
        case IntegralVerdict::Kind::Finite: return Tri::False;
        case IntegralVerdict::Kind::Infinite: return v.sign == sign ? Tri::True : Tri::False;
        default: return Tri::Unknown;
    }
}

struct Condition {
    const char* label;
    Tri truth;
};

// Disjunction in decision order: any true condition answers Yes with the
// first true label; No needs all conditions false.
Verdict decide(std::initializer_list<Condition> conditions) {
    for (const auto& cond : conditions) {
        if (cond.truth == Tri::True) return {Verdict::Answer::Yes, cond.label};
    }
    for (const auto& cond : conditions) {
        if (cond.truth == Tri::Unknown) return {Verdict::Answer::Unknown, ""};
    }
    return {Verdict::Answer::No, ""};
}

// ---- loading inspection ------------------------------------------------------

// Certifies inf b^2 > 0 near one boundary from the expression shape alone.
// Handles the two shapes worth certifying: a nonzero literal, and exp(x)
// (bounded below by exp(lower) unless the lower boundary is -inf, where it
// vanishes).  Everything else: no certificate, no consistency enforcement.
bool loading_positive_near(const DiffusionSpec& spec, Boundary boundary) {
    const Expr::Node& node = spec.b->node;
    if (const auto* lit = std::get_if<Expr::Literal>(&node)) return lit->value != 0.0;
    if (const auto* call = std::get_if<Expr::Call>(&node)) {
        if (call->fn == FuncKind::Exp && std::holds_alternative<Expr::Var>(call->arg->node)) {
            return !(boundary == Boundary::Lower && spec.interval.lower_is_infinite());
        }
    }
    return false;
}

// Symbolic-first zero test with a heuristic numeric fallback (|b| < 1e-14 on
// a geometric probe grid around c); the fallback records a note.
bool loading_is_zero(const DiffusionSpec& spec, double c, std::vector<Warning>& notes) {
    if (is_literal_zero(*spec.b)) return true;
    constexpr int kPerSide = 500;
    constexpr double kZeroTol = 1e-14;
    const auto probe = [&](double x) {
        double v = 0.0;
        try {
            v = spec.eval_b(x);
        } catch (const std::exception&) {
            return false;  // cannot certify zero where b is not even evaluable
        }
        return std::isfinite(v) && std::abs(v) < kZeroTol;
    };
    if (!probe(c)) return false;
    for (int j = 0; j < kPerSide; ++j) {
        const double reach = std::exp2(0.05 * j);
        const double low = spec.interval.lower_is_infinite()
                               ? c - reach
                               : spec.interval.lower + (c - spec.interval.lower) / reach;
        const double high = spec.interval.upper_is_infinite()
                                ? c + reach
                                : spec.interval.upper - (spec.interval.upper - c) / reach;
        if (spec.interval.contains(low) && !probe(low)) return false;
        if (spec.interval.contains(high) && !probe(high)) return false;
    }
    notes.push_back({c,
                     "loading is numerically zero on the probe grid but is not the literal 0; "
                     "treating it as identically zero"});
    return true;
}

// ---- profile assembly --------------------------------------------------------

const CoefficientField* pick_annotation(const std::vector<TailAnnotation>& annotations,
                                        Boundary boundary, MeasureTag measure) {
    for (const auto& a : annotations) {
        if (a.boundary == boundary && a.measure == measure) return &a.equivalent;
    }
    return nullptr;
}

double eval_or_fail(const CoefficientField& field, double y) {
    try {
        return field.fn(y);
    } catch (const QuadratureFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw QuadratureFailure("coefficient '" + field.formula + "' failed at y=" +
                                std::to_string(y) + ": " + e.what());
    }
}

// log(weight(y) / sigma(y)^2); negative weights and vanishing sigma are
// integration failures, weight == 0 contributes nothing.
LogDensityFn log_weight_over_sigma2(CoefficientField weight, CoefficientField sigma) {
    return [weight = std::move(weight), sigma = std::move(sigma)](double y) {
        const double w = eval_or_fail(weight, y);
        if (w < 0.0) {
            throw QuadratureFailure("weight '" + weight.formula + "' is negative at y=" +
                                    std::to_string(y));
        }
        const double s = eval_or_fail(sigma, y);
        if (s == 0.0) {
            throw QuadratureFailure("sigma '" + sigma.formula + "' vanishes at y=" +
                                    std::to_string(y));
        }
        if (w == 0.0) return -std::numeric_limits<double>::infinity();
        return std::log(w) - 2.0 * std::log(std::abs(s));
    };
}

MeasureProfile measure_profile(const CoefficientField& drift, const CoefficientField& sigma,
                               const CoefficientField& weight_b2, const StateInterval& interval,
                               double c, MeasureTag tag,
                               const std::vector<TailAnnotation>& annotations,
                               const QuadConfig& cfg) {
    // One shared density cache across all six limits of this measure: the
    // limit meshes revisit the same anchor points, so sharing saves most of
    // the inner drift integrals.
    auto density = std::make_shared<LogScaleDensity>(drift, sigma, c);
    LogDensityFn log_density = [density](double y) { return (*density)(y); };
    LogDensityFn lw_one = log_weight_over_sigma2({[](double) { return 1.0; }, "1"}, sigma);
    LogDensityFn lw_b2 = log_weight_over_sigma2(weight_b2, sigma);

    const CoefficientField* lower_eq = pick_annotation(annotations, Boundary::Lower, tag);
    const CoefficientField* upper_eq = pick_annotation(annotations, Boundary::Upper, tag);

    MeasureProfile out;
    out.s_lower = scale_limit_core(log_density, interval, c, Boundary::Lower, lower_eq, cfg);
    out.s_upper = scale_limit_core(log_density, interval, c, Boundary::Upper, upper_eq, cfg);
    out.v_lower = test_v_limit_core(log_density, lw_one, interval, c, Boundary::Lower, lower_eq, cfg);
    out.v_upper = test_v_limit_core(log_density, lw_one, interval, c, Boundary::Upper, upper_eq, cfg);
    out.vb_lower =
        test_v_limit_core(log_density, lw_b2, interval, c, Boundary::Lower, lower_eq, cfg);
    out.vb_upper =
        test_v_limit_core(log_density, lw_b2, interval, c, Boundary::Upper, upper_eq, cfg);
    return out;
}

void require_consistent(const MeasureProfile& prof, const DiffusionSpec& spec,
                        const char* measure_name) {
    const auto check = [&](Boundary boundary, const IntegralVerdict& v,
                           const IntegralVerdict& vb, const char* side) {
        if (!loading_positive_near(spec, boundary)) return;
        if (v.is_infinite() && vb.is_finite()) {
            throw std::logic_error(std::string("inconsistent boundary profile under the ") +
                                   measure_name + " measure at the " + side +
                                   " boundary: the unweighted test function diverges while the "
                                   "loading-weighted one converges although the loading is "
                                   "bounded away from zero there");
        }
    };
    check(Boundary::Lower, prof.v_lower, prof.vb_lower, "lower");
    check(Boundary::Upper, prof.v_upper, prof.vb_upper, "upper");
}

// ---- JSON helpers ------------------------------------------------------------

using ojson = nlohmann::ordered_json;

ojson verdict_to_json(const Verdict& v) {
    const char* text = v.yes() ? "yes" : v.no() ? "no" : "unknown";
    return ojson{{"verdict", text}, {"witness", v.witness}};
}

Verdict verdict_from_json(const ojson& j) {
    if (!j.is_object() || !j.contains("verdict") || !j["verdict"].is_string() ||
        !j.contains("witness") || !j["witness"].is_string()) {
        throw std::invalid_argument("report file: malformed verdict object");
    }
    const std::string text = j["verdict"].get<std::string>();
    Verdict v;
    if (text == "yes") {
        v.answer = Verdict::Answer::Yes;
    } else if (text == "no") {
        v.answer = Verdict::Answer::No;
    } else if (text == "unknown") {
        v.answer = Verdict::Answer::Unknown;
    } else {
        throw std::invalid_argument("report file: verdict must be \"yes\", \"no\" or \"unknown\"");
    }
    v.witness = j["witness"].get<std::string>();
    return v;
}

ojson integral_to_json(const IntegralVerdict& v) {
    switch (v.kind) {
        case IntegralVerdict::Kind::Finite:
            return ojson{{"kind", "finite"}, {"value", v.value}, {"err", v.err}};
        case IntegralVerdict::Kind::Infinite:
            return ojson{{"kind", "infinite"}, {"sign", v.sign}};
        default:
            return ojson{{"kind", "inconclusive"}, {"reason", v.reason}};
    }
}

IntegralVerdict integral_from_json(const ojson& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
        throw std::invalid_argument("report file: malformed integral verdict");
    }
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "finite") {
        if (!j.contains("value") || !j["value"].is_number() || !j.contains("err") ||
            !j["err"].is_number()) {
            throw std::invalid_argument("report file: finite verdict needs value and err");
        }
        return IntegralVerdict::finite(j["value"].get<double>(), j["err"].get<double>());
    }
    if (kind == "infinite") {
        if (!j.contains("sign") || !j["sign"].is_number_integer()) {
            throw std::invalid_argument("report file: infinite verdict needs sign");
        }
        return IntegralVerdict::infinite(j["sign"].get<int>());
    }
    if (kind == "inconclusive") {
        if (!j.contains("reason") || !j["reason"].is_string()) {
            throw std::invalid_argument("report file: inconclusive verdict needs reason");
        }
        return IntegralVerdict::inconclusive(j["reason"].get<std::string>());
    }
    throw std::invalid_argument("report file: unknown integral verdict kind '" + kind + "'");
}

ojson measure_to_json(const MeasureProfile& m) {
    return ojson{{"s_lower", integral_to_json(m.s_lower)},
                 {"s_upper", integral_to_json(m.s_upper)},
                 {"v_lower", integral_to_json(m.v_lower)},
                 {"v_upper", integral_to_json(m.v_upper)},
                 {"vb_lower", integral_to_json(m.vb_lower)},
                 {"vb_upper", integral_to_json(m.vb_upper)}};
}

MeasureProfile measure_from_json(const ojson& j) {
    if (!j.is_object()) throw std::invalid_argument("report file: malformed measure profile");
    const auto slot = [&](const char* name) {
        if (!j.contains(name)) {
            throw std::invalid_argument(std::string("report file: profile is missing slot '") +
                                        name + "'");
        }
        return integral_from_json(j[name]);
    };
    MeasureProfile m;
    m.s_lower = slot("s_lower");
    m.s_upper = slot("s_upper");
    m.v_lower = slot("v_lower");
    m.v_upper = slot("v_upper");
    m.vb_lower = slot("vb_lower");
    m.vb_upper = slot("vb_upper");
    return m;
}

ojson warnings_to_json(const std::vector<Warning>& warnings) {
    ojson arr = ojson::array();
    for (const auto& w : warnings) arr.push_back(ojson{{"x", w.x}, {"message", w.message}});
    return arr;
}

std::vector<Warning> warnings_from_json(const ojson& j) {
    if (!j.is_array()) throw std::invalid_argument("report file: warnings must be an array");
    std::vector<Warning> out;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("x") || !item["x"].is_number() ||
            !item.contains("message") || !item["message"].is_string()) {
            throw std::invalid_argument("report file: malformed warning entry");
        }
        out.push_back({item["x"].get<double>(), item["message"].get<std::string>()});
    }
    return out;
}

}  // namespace

// ---- public operations -------------------------------------------------------

BoundaryProfile boundary_profile(const DiffusionSpec& spec, const CorrelationScheme& scheme,
                                 double c, const QuadConfig& cfg,
                                 const std::vector<TailAnnotation>& annotations) {
    if (!spec.interval.contains(c)) {
        throw std::invalid_argument("base point must lie strictly inside the state interval");
    }

    BoundaryProfile prof;
    prof.b_is_zero = loading_is_zero(spec, c, prof.notes);

    const CoefficientField sigma = sigma_field(spec);
    const CoefficientField b = b_field(spec);
    const CoefficientField weight_b2{[b](double y) {
                                         const double v = b(y);
                                         return v * v;
                                     },
                                     "(" + b.formula + ")^2"};

    prof.p = measure_profile(drift_field(spec), sigma, weight_b2, spec.interval, c, MeasureTag::P,
                             annotations, cfg);
    prof.q = measure_profile(q_drift(spec, scheme), sigma, weight_b2, spec.interval, c,
                             MeasureTag::Q, annotations, cfg);

    require_consistent(prof.p, spec, "state");
    require_consistent(prof.q, spec, "changed");
    return prof;
}

Verdict classify_martingale(const BoundaryProfile& prof) {
    const MeasureProfile& q = prof.q;
    return decide({
        {"A", tri_and(lit_infinite(q.v_lower), lit_infinite(q.v_upper))},
        {"B", tri_and(lit_finite(q.vb_upper), lit_infinite(q.v_lower))},
        {"C", tri_and(lit_finite(q.vb_lower), lit_infinite(q.v_upper))},
        {"D", tri_and(lit_finite(q.vb_upper), lit_finite(q.vb_lower))},
    });
}

Verdict classify_ui(const BoundaryProfile& prof) {
    const MeasureProfile& q = prof.q;
    return decide({
        {"A'", prof.b_is_zero ? Tri::True : Tri::False},
        {"B'", tri_and(lit_finite(q.vb_upper), lit_infinite_sign(q.s_lower, -1))},
        {"C'", tri_and(lit_finite(q.vb_lower), lit_infinite_sign(q.s_upper, +1))},
        {"D'", tri_and(lit_finite(q.vb_upper), lit_finite(q.vb_lower))},
    });
}

Verdict classify_positive_T(const BoundaryProfile& prof) {
    const MeasureProfile& p = prof.p;
    return decide({
        {"1", tri_and(lit_infinite(p.v_lower), lit_infinite(p.v_upper))},
        {"2", tri_and(lit_finite(p.vb_upper), lit_infinite(p.v_lower))},
        {"3", tri_and(lit_finite(p.vb_lower), lit_infinite(p.v_upper))},
        {"4", tri_and(lit_finite(p.vb_upper), lit_finite(p.vb_lower))},
    });
}

Verdict classify_positive_inf(const BoundaryProfile& prof) {
    const MeasureProfile& p = prof.p;
    return decide({
        {"1", prof.b_is_zero ? Tri::True : Tri::False},
        {"2", tri_and(lit_finite(p.vb_upper), lit_infinite_sign(p.s_lower, -1))},
        {"3", tri_and(lit_finite(p.vb_lower), lit_infinite_sign(p.s_upper, +1))},
        {"4", tri_and(lit_finite(p.vb_upper), lit_finite(p.vb_lower))},
    });
}

MartingaleReport full_report(const DiffusionSpec& spec, const CorrelationScheme& scheme, double c,
                             const QuadConfig& cfg,
                             const std::vector<TailAnnotation>& annotations) {
    MartingaleReport report;
    report.warnings = check_assumption_h(spec, 64);
    report.profile = boundary_profile(spec, scheme, c, cfg, annotations);
    for (auto& note : report.profile.notes) report.warnings.push_back(std::move(note));
    report.profile.notes.clear();
    report.martingale_on_compacts = classify_martingale(report.profile);
    report.uniformly_integrable = classify_ui(report.profile);
    report.positive_finite_T = classify_positive_T(report.profile);
    report.positive_at_infinity = classify_positive_inf(report.profile);
    return report;
}

std::string report_to_json_text(const MartingaleReport& report) {
    ojson j{{"martingale_on_compacts", verdict_to_json(report.martingale_on_compacts)},
            {"uniformly_integrable", verdict_to_json(report.uniformly_integrable)},
            {"positive_finite_T", verdict_to_json(report.positive_finite_T)},
            {"positive_at_infinity", verdict_to_json(report.positive_at_infinity)},
            {"profile",
             ojson{{"b_is_zero", report.profile.b_is_zero},
                   {"p", measure_to_json(report.profile.p)},
                   {"q", measure_to_json(report.profile.q)}}},
            {"warnings", warnings_to_json(report.warnings)}};
    return j.dump(2) + "\n";
}

MartingaleReport report_from_json_text(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("report file: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("report file: top level must be an object");
    for (const char* key :
         {"martingale_on_compacts", "uniformly_integrable", "positive_finite_T",
          "positive_at_infinity", "profile", "warnings"}) {
        if (!j.contains(key)) {
            throw std::invalid_argument(std::string("report file: missing field '") + key + "'");
        }
    }
    const ojson& prof = j["profile"];
    if (!prof.is_object() || !prof.contains("b_is_zero") || !prof["b_is_zero"].is_boolean() ||
        !prof.contains("p") || !prof.contains("q")) {
        throw std::invalid_argument("report file: malformed profile");
    }

    MartingaleReport report;
    report.martingale_on_compacts = verdict_from_json(j["martingale_on_compacts"]);
    report.uniformly_integrable = verdict_from_json(j["uniformly_integrable"]);
    report.positive_finite_T = verdict_from_json(j["positive_finite_T"]);
    report.positive_at_infinity = verdict_from_json(j["positive_at_infinity"]);
    report.profile.b_is_zero = prof["b_is_zero"].get<bool>();
    report.profile.p = measure_from_json(prof["p"]);
    report.profile.q = measure_from_json(prof["q"]);
    report.warnings = warnings_from_json(j["warnings"]);
    return report;
}

}  // namespace martcheck
