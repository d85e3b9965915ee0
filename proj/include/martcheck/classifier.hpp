#pragma once
// Boundary classification for the stochastic exponential of b(Y) dW: whether
// it is a true martingale, whether it is uniformly integrable, and whether it
// stays strictly positive at a finite horizon / at infinity.  Each question
// reduces to finiteness of scale- and test-function limits at the two state
// boundaries, evaluated under the state measure (p) and under the changed
// measure (q) whose drift gains lambda*b*sigma.
//
// Verdicts use three-valued logic: a condition is definitely true, definitely
// false, or unknown because an underlying integral came back Inconclusive.
// "Yes" names the first definitely-true condition; "No" requires every
// condition definitely false; anything else is "Unknown".  Numerical failure
// is never converted into a mathematical claim.

#include <string>
#include <vector>

#include "martcheck/diffusion.hpp"
#include "martcheck/quadrature.hpp"

namespace martcheck {

struct Verdict {
    enum class Answer { Yes, No, Unknown };
    Answer answer = Answer::Unknown;
    std::string witness;  // condition label when Yes, "" otherwise

    bool yes() const { return answer == Answer::Yes; }
    bool no() const { return answer == Answer::No; }
    bool unknown() const { return answer == Answer::Unknown; }
};

// Scale and test-function limits at both boundaries under one measure.
struct MeasureProfile {
    IntegralVerdict s_lower, s_upper;    // scale limits
    IntegralVerdict v_lower, v_upper;    // test function, weight 1
    IntegralVerdict vb_lower, vb_upper;  // test function, weight b^2
};

struct BoundaryProfile {
    MeasureProfile p;  // state measure
    MeasureProfile q;  // changed measure
    bool b_is_zero = false;
    std::vector<Warning> notes;  // e.g. loading numerically zero but not literally
};

// Computes all twelve limit slots.  Annotations are routed by (boundary,
// measure); at most one each is used.  Throws std::logic_error if the profile
// is provably inconsistent: when the loading is certifiably bounded away from
// zero near a boundary (positive literal, or exp(x) away from a lower boundary
// at -inf), a finite weighted limit cannot coexist with an infinite unweighted
// one.  The certificate check is deliberately narrow to avoid false
// rejections for general loadings.
BoundaryProfile boundary_profile(const DiffusionSpec& spec, const CorrelationScheme& scheme,
                                 double c, const QuadConfig& cfg,
                                 const std::vector<TailAnnotation>& annotations);

// Condition tables, labels in decision order (first true wins):
//   martingale:            A  v~(l)=inf and v~(r)=inf
//                          B  v~_b(r)<inf and v~(l)=inf
//                          C  v~_b(l)<inf and v~(r)=inf
//                          D  v~_b(l)<inf and v~_b(r)<inf
//   uniformly integrable:  A' b == 0
//                          B' v~_b(r)<inf and s~(l)=-inf
//                          C' v~_b(l)<inf and s~(r)=+inf
//                          D' v~_b(l)<inf and v~_b(r)<inf
//   positive at horizon:   1..4, the state-measure mirror of A..D
//   positive at infinity:  1..4, the state-measure mirror of A'..D'
Verdict classify_martingale(const BoundaryProfile& prof);
Verdict classify_ui(const BoundaryProfile& prof);
Verdict classify_positive_T(const BoundaryProfile& prof);
Verdict classify_positive_inf(const BoundaryProfile& prof);

struct MartingaleReport {
    Verdict martingale_on_compacts;  // E[Z_T] = 1 for every finite horizon
    Verdict uniformly_integrable;    // E[Z_inf] = 1
    Verdict positive_finite_T;       // Z_T > 0 a.s. for every finite horizon
    Verdict positive_at_infinity;    // condition table for Z_inf > 0 a.s.
    BoundaryProfile profile;
    std::vector<Warning> warnings;
};

// boundary_profile + the four classifiers + non-degeneracy probe warnings.
MartingaleReport full_report(const DiffusionSpec& spec, const CorrelationScheme& scheme, double c,
                             const QuadConfig& cfg,
                             const std::vector<TailAnnotation>& annotations);

// JSON mirrors MartingaleReport field-for-field.  Verdicts serialize as
// {"verdict":"yes"|"no"|"unknown","witness":label-or-""}; integral verdicts as
// {"kind":"finite","value":v,"err":e} / {"kind":"infinite","sign":s} /
// {"kind":"inconclusive","reason":r}.  report_from_json_text inverts it
// byte-identically (profile notes travel inside the warnings list).
std::string report_to_json_text(const MartingaleReport& report);
MartingaleReport report_from_json_text(const std::string& text);

}  // namespace martcheck
