#pragma once
// One-dimensional diffusion state models dY = mu(Y) dt + sigma(Y) dW on an
// open interval J, with a volatility loading b(Y) for the associated
// exponential, and the correlation scheme tying the asset's driver to W.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "martcheck/expr.hpp"

namespace martcheck {

// Open interval (lower, upper); endpoints may be +-infinity.
struct StateInterval {
    double lower;
    double upper;

    bool contains(double x) const { return x > lower && x < upper; }
    bool lower_is_infinite() const;
    bool upper_is_infinite() const;
};

// How the asset's driving noise T is coupled to the state noise W.
//   Cholesky: T = rho*W - sqrt(1-rho^2)*B,   rho in [-1, 1].
//   WuYor:    T_t = W_t - int_0^t ((1-rho)*W_s/s + sqrt(rho-rho^2)*B_s/s) ds,
//             rho in [0, 1].
// Under the measure change the drift picks up lambda*b*sigma, where lambda
// is the bracket slope d<W,T>/dt: rho for Cholesky but identically 1 for
// WuYor -- the kernel construction contributes drift, not bracket.  Do not
// "fix" the WuYor lambda to rho; the pathwise correlation of increments is
// rho while the bracket slope stays 1.
struct CorrelationScheme {
    enum class Kind { Cholesky, WuYor };
    Kind kind;
    double rho;

    static CorrelationScheme cholesky(double rho);  // throws if rho outside [-1,1]
    static CorrelationScheme wu_yor(double rho);    // throws if rho outside [0,1]

    double lambda() const { return kind == Kind::Cholesky ? rho : 1.0; }
};

// Evaluable coefficient x -> value with its printable formula.
struct CoefficientField {
    std::function<double(double)> fn;
    std::string formula;

    double operator()(double x) const { return fn(x); }
};

struct DiffusionSpec {
    StateInterval interval;
    ExprPtr mu;     // state drift
    ExprPtr sigma;  // state diffusion coefficient
    ExprPtr b;      // volatility loading of the exponential
    double x0;
    ParamBindings params;

    // Parses the three coefficient texts and validates: lower < upper,
    // x0 strictly interior, every referenced parameter bound.
    static DiffusionSpec make(StateInterval interval, const std::string& mu_text,
                              const std::string& sigma_text, const std::string& b_text,
                              double x0, ParamBindings params);

    double eval_mu(double x) const { return eval_expr(*mu, x, params); }
    double eval_sigma(double x) const { return eval_expr(*sigma, x, params); }
    double eval_b(double x) const { return eval_expr(*b, x, params); }
};

CoefficientField drift_field(const DiffusionSpec& spec);
CoefficientField sigma_field(const DiffusionSpec& spec);
CoefficientField b_field(const DiffusionSpec& spec);

// Drift after the measure change: mu + lambda(scheme) * b * sigma.
CoefficientField q_drift(const DiffusionSpec& spec, const CorrelationScheme& scheme);

struct Warning {
    double x;
    std::string message;
};

// Numeric spot-check of the local-integrability assumptions: probes a grid of
// interior points reaching geometrically toward each boundary and reports
// vanishing / sign-changing sigma, non-finite 1/sigma^2, mu/sigma^2 or
// b^2/sigma^2, and evaluation failures.  A clean list is evidence, not proof.
std::vector<Warning> check_assumption_h(const DiffusionSpec& spec, int n_probe);

// Model file (JSON) load/save.  Schema:
//   {"interval": {"lower": num|"-inf", "upper": num|"inf"},
//    "mu": str, "sigma": str, "b": str, "x0": num,
//    "params": {name: num}, "scheme": {"kind": "cholesky"|"wu_yor", "rho": num}}
struct ModelFile {
    DiffusionSpec spec;
    CorrelationScheme scheme;
};
ModelFile model_from_json_text(const std::string& text);
std::string model_to_json_text(const ModelFile& model);

}  // namespace martcheck
