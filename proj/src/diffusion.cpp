#include "martcheck/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace martcheck {

bool StateInterval::lower_is_infinite() const { return std::isinf(lower) && lower < 0; }
bool StateInterval::upper_is_infinite() const { return std::isinf(upper) && upper > 0; }

CorrelationScheme CorrelationScheme::cholesky(double rho) {
    if (!(rho >= -1.0 && rho <= 1.0))
        throw std::invalid_argument("cholesky correlation requires rho in [-1, 1]");
    return {Kind::Cholesky, rho};
}

CorrelationScheme CorrelationScheme::wu_yor(double rho) {
    if (!(rho >= 0.0 && rho <= 1.0))
        throw std::invalid_argument("wu_yor correlation requires rho in [0, 1]");
    return {Kind::WuYor, rho};
}

DiffusionSpec DiffusionSpec::make(StateInterval interval, const std::string& mu_text,
                                  const std::string& sigma_text, const std::string& b_text,
                                  double x0, ParamBindings params) {
    if (!(interval.lower < interval.upper))
        throw std::invalid_argument("state interval requires lower < upper");
    if (!interval.contains(x0))
        throw std::invalid_argument("x0 must lie strictly inside the state interval");

    DiffusionSpec spec;
    spec.interval = interval;
    spec.mu = parse_expr(mu_text);
    spec.sigma = parse_expr(sigma_text);
    spec.b = parse_expr(b_text);
    spec.x0 = x0;
    spec.params = std::move(params);

    std::map<std::string, bool> used;
    collect_params(*spec.mu, used);
    collect_params(*spec.sigma, used);
    collect_params(*spec.b, used);
    for (const auto& [name, _] : used) {
        if (!spec.params.count(name))
            throw std::invalid_argument("coefficient references unbound parameter '" + name + "'");
    }
    return spec;
}

namespace {

CoefficientField field_from_expr(ExprPtr e, ParamBindings params) {
    std::string formula = print_expr(*e);
    return {[e = std::move(e), params = std::move(params)](double x) {
                return eval_expr(*e, x, params);
            },
            std::move(formula)};
}

ExprPtr node(Expr::Node n) { return std::make_shared<Expr>(Expr{std::move(n)}); }

// lambda * b * sigma as a tree, keeping literals non-negative.
ExprPtr scaled_product(double lambda, ExprPtr a, ExprPtr b) {
    ExprPtr lit = node(Expr::Literal{std::fabs(lambda)});
    ExprPtr coeff = lambda < 0 ? node(Expr::Neg{lit}) : lit;
    return node(Expr::Binary{BinOp::Mul, node(Expr::Binary{BinOp::Mul, coeff, std::move(a)}),
                             std::move(b)});
}

}  // namespace

CoefficientField drift_field(const DiffusionSpec& spec) {
    return field_from_expr(spec.mu, spec.params);
}
CoefficientField sigma_field(const DiffusionSpec& spec) {
    return field_from_expr(spec.sigma, spec.params);
}
CoefficientField b_field(const DiffusionSpec& spec) {
    return field_from_expr(spec.b, spec.params);
}

CoefficientField q_drift(const DiffusionSpec& spec, const CorrelationScheme& scheme) {
    double lambda = scheme.lambda();
    ExprPtr tree = node(Expr::Binary{BinOp::Add, spec.mu, scaled_product(lambda, spec.b, spec.sigma)});
    return field_from_expr(std::move(tree), spec.params);
}

namespace {

// Interior probe points: half the budget reaches toward each boundary.
// Finite gaps shrink geometrically; infinite sides step out in powers of two,
// capped so benign coefficients like e^{2x} stay finite in doubles.
std::vector<double> probe_grid(const StateInterval& J, double center, int n_probe) {
    std::set<double> pts;
    pts.insert(center);
    int per_side = std::max(2, n_probe / 2);
    for (int j = 1; j <= per_side; ++j) {
        double p;
        if (J.lower_is_infinite())
            p = center - std::ldexp(1.0, std::min(j - 1, 5));
        else
            p = J.lower + (center - J.lower) * std::ldexp(1.0, -j);
        if (J.contains(p)) pts.insert(p);
    }
    for (int j = 1; j <= per_side; ++j) {
        double p;
        if (J.upper_is_infinite())
            p = center + std::ldexp(1.0, std::min(j - 1, 5));
        else
            p = J.upper - (J.upper - center) * std::ldexp(1.0, -j);
        if (J.contains(p)) pts.insert(p);
    }
    return {pts.begin(), pts.end()};
}

}  // namespace

std::vector<Warning> check_assumption_h(const DiffusionSpec& spec, int n_probe) {
    std::vector<Warning> warnings;
    std::vector<double> grid = probe_grid(spec.interval, spec.x0, n_probe);

    double prev_sigma = std::numeric_limits<double>::quiet_NaN();
    double prev_x = 0;
    for (double p : grid) {
        double s, mu, b;
        try {
            s = spec.eval_sigma(p);
            mu = spec.eval_mu(p);
            b = spec.eval_b(p);
        } catch (const std::exception& e) {
            warnings.push_back({p, std::string("coefficient evaluation failed: ") + e.what()});
            prev_sigma = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        if (s == 0.0) {
            warnings.push_back({p, "sigma vanishes at probe point"});
        } else {
            double inv = 1.0 / (s * s);
            if (!std::isfinite(inv))
                warnings.push_back({p, "1/sigma^2 is not finite at probe point"});
            if (!std::isfinite(mu * inv))
                warnings.push_back({p, "mu/sigma^2 is not finite at probe point"});
            if (!std::isfinite(b * b * inv))
                warnings.push_back({p, "b^2/sigma^2 is not finite at probe point"});
        }
        if (std::isfinite(prev_sigma) && std::isfinite(s) && prev_sigma * s < 0.0) {
            warnings.push_back(
                {0.5 * (prev_x + p),
                 "sigma changes sign between probes; it vanishes somewhere in between"});
        }
        prev_sigma = s;
        prev_x = p;
    }
    return warnings;
}

// ---- model file (JSON) ------------------------------------------------------

namespace {

double endpoint_from_json(const nlohmann::json& j, bool is_lower) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (is_lower && s == "-inf") return -std::numeric_limits<double>::infinity();
        if (!is_lower && s == "inf") return std::numeric_limits<double>::infinity();
    }
    throw std::invalid_argument(std::string("model file: bad interval ") +
                                (is_lower ? "lower" : "upper") + " endpoint");
}

nlohmann::json endpoint_to_json(double v, bool is_lower) {
    if (std::isinf(v)) return is_lower ? "-inf" : "inf";
    return v;
}

}  // namespace

ModelFile model_from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);

    StateInterval interval{endpoint_from_json(j.at("interval").at("lower"), true),
                           endpoint_from_json(j.at("interval").at("upper"), false)};

    ParamBindings params;
    if (j.contains("params")) {
        for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it)
            params[it.key()] = it.value().get<double>();
    }

    DiffusionSpec spec = DiffusionSpec::make(
        interval, j.at("mu").get<std::string>(), j.at("sigma").get<std::string>(),
        j.at("b").get<std::string>(), j.at("x0").get<double>(), std::move(params));

    const auto& sch = j.at("scheme");
    std::string kind = sch.at("kind").get<std::string>();
    double rho = sch.at("rho").get<double>();
    CorrelationScheme scheme = kind == "cholesky"  ? CorrelationScheme::cholesky(rho)
                               : kind == "wu_yor" ? CorrelationScheme::wu_yor(rho)
                                                  : throw std::invalid_argument(
                                                        "model file: scheme.kind must be "
                                                        "\"cholesky\" or \"wu_yor\"");
    return {std::move(spec), scheme};
}

std::string model_to_json_text(const ModelFile& model) {
    nlohmann::ordered_json j;
    j["interval"] = {{"lower", endpoint_to_json(model.spec.interval.lower, true)},
                     {"upper", endpoint_to_json(model.spec.interval.upper, false)}};
    j["mu"] = print_expr(*model.spec.mu);
    j["sigma"] = print_expr(*model.spec.sigma);
    j["b"] = print_expr(*model.spec.b);
    j["x0"] = model.spec.x0;
    j["params"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : model.spec.params) j["params"][k] = v;
    j["scheme"] = {{"kind", model.scheme.kind == CorrelationScheme::Kind::Cholesky ? "cholesky"
                                                                                   : "wu_yor"},
                   {"rho", model.scheme.rho}};
    return j.dump(2);
}

}  // namespace martcheck
