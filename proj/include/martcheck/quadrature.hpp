#pragma once
// Scale-function and test-function integrals for one-dimensional diffusions,
// with explicit three-way outcomes.  Everything that can overflow a double is
// carried in log space and combined by log-sum-exp: the scale density
// s'(y) = exp(-int_c^y 2 mu/sigma^2) routinely exceeds e^700 long before a
// boundary verdict is reachable.
//
// Improper limits follow a mesh-and-extrapolate protocol: evaluate the
// monotone family at points approaching the boundary geometrically
// (boundary_mesh_factor), declare Finite when successive increments fall
// below tolerance (with one order of Richardson extrapolation for the tail),
// declare Infinite when increments are non-decreasing and the running value
// has passed divergence_threshold, and otherwise return Inconclusive.  Slow
// (e.g. logarithmic) divergence is deliberately reported as Inconclusive
// rather than guessed.

#include <functional>
#include <optional>
#include <string>

#include "martcheck/diffusion.hpp"

namespace martcheck {

// Internal quadrature failure (non-finite integrand at a node, precision
// exhaustion); public operations translate it into an Inconclusive verdict.
class QuadratureFailure : public std::runtime_error {
public:
    explicit QuadratureFailure(const std::string& reason) : std::runtime_error(reason) {}
};

struct IntegralVerdict {
    enum class Kind { Finite, Infinite, Inconclusive };
    Kind kind = Kind::Inconclusive;
    double value = 0.0;  // Finite only
    double err = 0.0;    // Finite only
    int sign = 0;        // Infinite only: +1 or -1
    std::string reason;  // Inconclusive only

    static IntegralVerdict finite(double value, double err) {
        return {Kind::Finite, value, err, 0, {}};
    }
    static IntegralVerdict infinite(int sign) { return {Kind::Infinite, 0, 0, sign, {}}; }
    static IntegralVerdict inconclusive(std::string reason) {
        return {Kind::Inconclusive, 0, 0, 0, std::move(reason)};
    }

    bool is_finite() const { return kind == Kind::Finite; }
    bool is_infinite() const { return kind == Kind::Infinite; }
    bool is_inconclusive() const { return kind == Kind::Inconclusive; }
};

enum class Boundary { Lower, Upper };

// Which scale density an annotation describes: the state measure's (P) or the
// changed measure's (Q).  The two densities have different tails, so routing
// matters when a profile computes both.
enum class MeasureTag { P, Q };

// Asymptotic shortcut for a *convergent* tail of the scale density at one
// boundary: int_{y->boundary} s'(z) dz ~ equivalent(y) * s'(y) as y tends to
// the boundary.  Limits use it as the numerically stable path once the raw
// density leaves the trustworthy floating-point range, and cross-check it
// against raw integration where both are computable; disagreement yields
// Inconclusive("asymptotic mismatch").
struct TailAnnotation {
    Boundary boundary;
    MeasureTag measure;
    CoefficientField equivalent;
};

struct QuadConfig {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    double boundary_mesh_factor = 2.0;
    int max_refinements = 60;
    double divergence_threshold = 1e12;
};

// log s'(y) relative to base point c, i.e. -int_c^y 2 drift/sigma^2, with a
// sorted anchor cache so repeated evaluations pay one short adaptive panel.
// Instances are cheap to create and not safe for concurrent use; the public
// operations below create their own, so the operations themselves are
// re-entrant.
class LogScaleDensity {
public:
    LogScaleDensity(CoefficientField drift, CoefficientField sigma, double c);
    double operator()(double y) const;  // throws QuadratureFailure
    double base_point() const { return c_; }

private:
    CoefficientField drift_, sigma_;
    double c_;
    mutable std::map<double, double> anchors_;
};

// One-shot log s'(y); throws QuadratureFailure if the inner integrand is
// non-finite at a quadrature node.
double log_scale_density(const CoefficientField& drift, const CoefficientField& sigma, double c,
                         double y);

// s(x) = int_c^x s'(y) dy (negative for x < c).
IntegralVerdict scale_at(const CoefficientField& drift, const CoefficientField& sigma, double c,
                         double x, const QuadConfig& cfg);

// v(x) = 2 int_c^x (s(x)-s(y)) * weight(y) / (s'(y) sigma^2(y)) dy, >= 0.
// weight is b^2 for the loading-weighted variant, identically 1 otherwise.
IntegralVerdict test_v_at(const CoefficientField& drift, const CoefficientField& sigma,
                          const CoefficientField& weight, double c, double x,
                          const QuadConfig& cfg);

// Boundary limits of s and v via the mesh protocol described above.
// `annotation` may be null; if present it must describe this boundary's
// density tail (for scale_limit a valid annotation implies a finite limit).
IntegralVerdict scale_limit(const CoefficientField& drift, const CoefficientField& sigma,
                            const StateInterval& interval, double c, Boundary boundary,
                            const TailAnnotation* annotation, const QuadConfig& cfg);
IntegralVerdict test_v_limit(const CoefficientField& drift, const CoefficientField& sigma,
                             const CoefficientField& weight, const StateInterval& interval,
                             double c, Boundary boundary, const TailAnnotation* annotation,
                             const QuadConfig& cfg);

// ---- core variants ---------------------------------------------------------
// The same operations on an arbitrary log-density (and log of weight/sigma^2).
// They let callers share a density cache across many limits and let tests
// shift a density by a large constant to confirm verdicts ignore the
// normalizing factor.  Functors may throw QuadratureFailure.
using LogDensityFn = std::function<double(double)>;

IntegralVerdict scale_at_core(const LogDensityFn& log_density, double c, double x,
                              const QuadConfig& cfg);
IntegralVerdict test_v_at_core(const LogDensityFn& log_density,
                               const LogDensityFn& log_weight_over_sigma2, double c, double x,
                               const QuadConfig& cfg);
IntegralVerdict scale_limit_core(const LogDensityFn& log_density, const StateInterval& interval,
                                 double c, Boundary boundary,
                                 const CoefficientField* tail_equivalent, const QuadConfig& cfg);
IntegralVerdict test_v_limit_core(const LogDensityFn& log_density,
                                  const LogDensityFn& log_weight_over_sigma2,
                                  const StateInterval& interval, double c, Boundary boundary,
                                  const CoefficientField* tail_equivalent, const QuadConfig& cfg);

namespace qdetail {

// log(exp(a) + exp(b)) and log(1 - exp(-t)) with -inf handling.
double lse(double a, double b);
double log1mexp(double t);

struct LogIntegral {
    double log_value;
    double log_err;
};

// Adaptive Gauss(7)/Kronrod(15) for int_a^b exp(log_f(y)) dy carried entirely
// in log space; requires a <= b.  Throws QuadratureFailure on non-finite
// nodes; on panel-budget exhaustion returns the best estimate with its error.
LogIntegral log_integrate(const LogDensityFn& log_f, double a, double b, double rel_tol,
                          int max_panels);

// Plain signed adaptive Gauss/Kronrod (used for the drift integral inside the
// scale density, which is signed and of moderate size).
double integrate_signed(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, double rel_tol, int max_panels);

}  // namespace qdetail

}  // namespace martcheck
