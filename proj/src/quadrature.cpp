#include "martcheck/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace martcheck {
namespace qdetail {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLn2 = 0.6931471805599453;
}  // namespace

double lse(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log1mexp(double t) {
    // log(1 - exp(-t)) for t > 0
    if (t <= 0.0) return kNegInf;
    return t > kLn2 ? std::log1p(-std::exp(-t)) : std::log(-std::expm1(-t));
}

// log(exp(a) - exp(b)) for a >= b; -inf when they agree to working precision.
double logsubexp(double a, double b) {
    if (b == kNegInf) return a;
    if (a <= b) return kNegInf;
    return a + log1mexp(a - b);
}

namespace {

// 15-point Kronrod nodes (|x|, descending) with the embedded 7-point Gauss
// rule on nodes 1,3,5,7.
constexpr int kGK = 8;
constexpr double kXgk[kGK] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
constexpr double kWgk[kGK] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr double kWg[4] = {0.129484966168870, 0.279705391489277, 0.381830050505119,
                           0.417959183673469};

const double* log_wgk() {
    static const auto table = [] {
        std::array<double, kGK> t{};
        for (int j = 0; j < kGK; ++j) t[j] = std::log(kWgk[j]);
        return t;
    }();
    return table.data();
}

const double* log_wg() {
    static const auto table = [] {
        std::array<double, 4> t{};
        for (int j = 0; j < 4; ++j) t[j] = std::log(kWg[j]);
        return t;
    }();
    return table.data();
}

double lse_list(const double* terms, int n) {
    double m = kNegInf;
    for (int i = 0; i < n; ++i) m = std::max(m, terms[i]);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(terms[i] - m);
    return m + std::log(s);
}

[[noreturn]] void node_failure(double x, const char* what) {
    throw QuadratureFailure("integrand " + std::string(what) + " at quadrature node x=" +
                            std::to_string(x));
}

struct LogPanel {
    double a, b;
    double lk;    // log of the Kronrod estimate
    double lerr;  // log |K - G|, doubled for safety
    bool splittable;
};

LogPanel eval_log_panel(const LogDensityFn& log_f, double a, double b) {
    const double mid = 0.5 * (a + b), h = 0.5 * (b - a);
    double lp[kGK], lm[kGK];
    for (int j = 0; j < kGK; ++j) {
        const double x = mid + h * kXgk[j];
        lp[j] = log_f(x);
        if (std::isnan(lp[j]) || lp[j] == std::numeric_limits<double>::infinity())
            node_failure(x, "non-finite");
        if (j < kGK - 1) {
            const double xm = mid - h * kXgk[j];
            lm[j] = log_f(xm);
            if (std::isnan(lm[j]) || lm[j] == std::numeric_limits<double>::infinity())
                node_failure(xm, "non-finite");
        }
    }
    double kterms[2 * kGK - 1];
    int nk = 0;
    for (int j = 0; j < kGK; ++j) {
        kterms[nk++] = log_wgk()[j] + lp[j];
        if (j < kGK - 1) kterms[nk++] = log_wgk()[j] + lm[j];
    }
    double gterms[7];
    int ng = 0;
    for (int t = 0; t < 4; ++t) {
        const int j = 2 * t + 1;  // Gauss nodes sit at Kronrod indices 1,3,5,7
        gterms[ng++] = log_wg()[t] + lp[j];
        if (j < kGK - 1) gterms[ng++] = log_wg()[t] + lm[j];
    }
    const double lh = std::log(h);
    const double lk = lh + lse_list(kterms, nk);
    const double lg = lh + lse_list(gterms, ng);
    const double lerr = logsubexp(std::max(lk, lg), std::min(lk, lg)) + kLn2;
    const double min_width = 1e-14 * (1.0 + std::abs(a) + std::abs(b));
    return {a, b, lk, lerr, (b - a) > min_width};
}

struct LinPanel {
    double a, b;
    double val;
    double err;
    bool splittable;
};

LinPanel eval_lin_panel(const std::function<double(double)>& f, double a, double b) {
    const double mid = 0.5 * (a + b), h = 0.5 * (b - a);
    double k15 = 0.0, g7 = 0.0;
    double fp[kGK], fm[kGK];
    for (int j = 0; j < kGK; ++j) {
        const double x = mid + h * kXgk[j];
        fp[j] = f(x);
        if (!std::isfinite(fp[j])) node_failure(x, "non-finite");
        k15 += kWgk[j] * fp[j];
        if (j < kGK - 1) {
            const double xm = mid - h * kXgk[j];
            fm[j] = f(xm);
            if (!std::isfinite(fm[j])) node_failure(xm, "non-finite");
            k15 += kWgk[j] * fm[j];
        }
    }
    for (int t = 0; t < 4; ++t) {
        const int j = 2 * t + 1;
        g7 += kWg[t] * fp[j];
        if (j < kGK - 1) g7 += kWg[t] * fm[j];
    }
    const double min_width = 1e-14 * (1.0 + std::abs(a) + std::abs(b));
    return {a, b, h * k15, 2.0 * std::abs(h * (k15 - g7)), (b - a) > min_width};
}

}  // namespace

LogIntegral log_integrate(const LogDensityFn& log_f, double a, double b, double rel_tol,
                          int max_panels) {
    if (!(a <= b)) throw QuadratureFailure("log_integrate: inverted interval");
    if (a == b) return {kNegInf, kNegInf};
    std::vector<LogPanel> panels;
    const int seeds = 4;
    panels.reserve(64);
    for (int i = 0; i < seeds; ++i) {
        const double pa = a + (b - a) * i / seeds;
        const double pb = (i == seeds - 1) ? b : a + (b - a) * (i + 1) / seeds;
        if (pb > pa) panels.push_back(eval_log_panel(log_f, pa, pb));
    }
    const double log_rel = std::log(rel_tol);
    while (true) {
        double lv = kNegInf, le = kNegInf;
        for (const auto& p : panels) {
            lv = lse(lv, p.lk);
            le = lse(le, p.lerr);
        }
        if (lv == kNegInf || le <= log_rel + lv) return {lv, le};
        if (static_cast<int>(panels.size()) >= max_panels) return {lv, le};
        int worst = -1;
        double worst_err = kNegInf;
        for (int i = 0; i < static_cast<int>(panels.size()); ++i) {
            if (panels[i].splittable && panels[i].lerr > worst_err) {
                worst_err = panels[i].lerr;
                worst = i;
            }
        }
        if (worst < 0) return {lv, le};
        const LogPanel p = panels[worst];
        const double mid = 0.5 * (p.a + p.b);
        panels[worst] = eval_log_panel(log_f, p.a, mid);
        panels.push_back(eval_log_panel(log_f, mid, p.b));
    }
}

double integrate_signed(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, double rel_tol, int max_panels) {
    if (a == b) return 0.0;
    if (a > b) return -integrate_signed(f, b, a, abs_tol, rel_tol, max_panels);
    std::vector<LinPanel> panels;
    panels.push_back(eval_lin_panel(f, a, b));
    while (true) {
        double v = 0.0, e = 0.0;
        for (const auto& p : panels) {
            v += p.val;
            e += p.err;
        }
        if (e <= std::max(abs_tol, rel_tol * std::abs(v))) return v;
        if (static_cast<int>(panels.size()) >= max_panels) return v;
        int worst = -1;
        double worst_err = -1.0;
        for (int i = 0; i < static_cast<int>(panels.size()); ++i) {
            if (panels[i].splittable && panels[i].err > worst_err) {
                worst_err = panels[i].err;
                worst = i;
            }
        }
        if (worst < 0) return v;
        const LinPanel p = panels[worst];
        const double mid = 0.5 * (p.a + p.b);
        panels[worst] = eval_lin_panel(f, p.a, mid);
        panels.push_back(eval_lin_panel(f, mid, p.b));
    }
}

}  // namespace qdetail

namespace {

using qdetail::log_integrate;
using qdetail::lse;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogDblMax = std::log(std::numeric_limits<double>::max());
constexpr double kLn2 = 0.6931471805599453;
constexpr double kLogTrustBound = 1e12;
constexpr double kLogSaturation = 700.0;

constexpr int kSegPanels = 500;    // 1-d mesh segments
constexpr int kInnerPanels = 400;  // inner density mass inside a nested node
constexpr int kOuterPanels = 600;  // outer integral of a nested segment

double inner_rel(const QuadConfig& cfg) { return std::max(cfg.rel_tol * 0.1, 1e-12); }

// Fold a field evaluation into quadrature failure reporting.
double eval_field(const CoefficientField& field, double y) {
    try {
        return field.fn(y);
    } catch (const QuadratureFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw QuadratureFailure("coefficient '" + field.formula + "' failed at y=" +
                                std::to_string(y) + ": " + e.what());
    }
}

double log_positive(const CoefficientField& field, double y) {
    const double v = eval_field(field, y);
    if (!(v > 0.0) || !std::isfinite(v))
        throw QuadratureFailure("annotation equivalent '" + field.formula +
                                "' must be positive and finite, got " + std::to_string(v) +
                                " at y=" + std::to_string(y));
    return std::log(v);
}

// ---- limit protocol --------------------------------------------------------

struct ProtocolOutcome {
    enum class Kind { Finite, Infinite, Exhausted, MeshStuck, Decreased } kind;
    double log_value = kNegInf;
    double log_delta = kNegInf;
    double tail = 0.0;  // Richardson tail estimate, linear
    int steps = 0;
};

// Evaluates an integral family (in log space) along a mesh approaching one
// boundary and decides Finite / Infinite / neither.  Raw families (monotone =
// true) are nondecreasing by construction, so a real decrease flags numerical
// inconsistency and earns the one-step Richardson tail; annotated families
// converge from either side, so increments are taken in magnitude and no tail
// is extrapolated.
ProtocolOutcome run_limit_protocol(const std::function<std::optional<double>(int)>& mesh,
                                   const std::function<double(double)>& family, bool monotone,
                                   const QuadConfig& cfg) {
    const double log_abs = std::log(cfg.abs_tol);
    const double log_rel = std::log(cfg.rel_tol);
    const double log_threshold = std::log(cfg.divergence_threshold);

    double prev_logv = 0.0;
    std::optional<double> prev_logdelta;
    bool have_prev = false;
    int small_count = 0;

    for (int k = 0; k < cfg.max_refinements; ++k) {
        const auto x = mesh(k);
        if (!x) return {ProtocolOutcome::Kind::MeshStuck, kNegInf, kNegInf, 0.0, k};
        const double logv = family(*x);
        if (have_prev) {
            double logdelta;
            const bool grew = logv >= prev_logv;
            if (!grew) {
                if (prev_logv - logv < 1e-9) {
                    logdelta = kNegInf;  // convergence jitter
                } else if (monotone) {
                    return {ProtocolOutcome::Kind::Decreased, logv, kNegInf, 0.0, k};
                } else {
                    logdelta = qdetail::logsubexp(prev_logv, logv);
                }
            } else {
                logdelta = qdetail::logsubexp(logv, prev_logv);
            }
            const double tol_log = lse(log_abs, log_rel + logv);
            small_count = (logdelta <= tol_log) ? small_count + 1 : 0;
            if (small_count >= 2) {
                double tail = 0.0;
                if (monotone && prev_logdelta && *prev_logdelta > kNegInf &&
                    logdelta > kNegInf) {
                    double q = std::exp(std::min(logdelta - *prev_logdelta, 0.0));
                    q = std::min(q, 0.95);
                    tail = std::exp(logdelta) * q / (1.0 - q);
                }
                return {ProtocolOutcome::Kind::Finite, logv, logdelta, tail, k};
            }
            if (logv > log_threshold && grew && prev_logdelta &&
                logdelta >= *prev_logdelta - 1e-6) {
                return {ProtocolOutcome::Kind::Infinite, logv, logdelta, 0.0, k};
            }
            prev_logdelta = logdelta;
        }
        prev_logv = logv;
        have_prev = true;
    }
    return {ProtocolOutcome::Kind::Exhausted, prev_logv, kNegInf, 0.0, cfg.max_refinements};
}

std::function<std::optional<double>(int)> make_mesh(const StateInterval& interval, double c,
                                                    Boundary boundary, const QuadConfig& cfg) {
    const double f = cfg.boundary_mesh_factor;
    auto prev = std::make_shared<double>(c);
    return [interval, c, boundary, f, prev](int k) -> std::optional<double> {
        double x;
        if (boundary == Boundary::Upper) {
            x = interval.upper_is_infinite() ? c + std::pow(f, k)
                                             : interval.upper - (interval.upper - c) / std::pow(f, k + 1);
        } else {
            x = interval.lower_is_infinite() ? c - std::pow(f, k)
                                             : interval.lower + (c - interval.lower) / std::pow(f, k + 1);
        }
        if (!interval.contains(x) || x == *prev || !std::isfinite(x)) return std::nullopt;
        *prev = x;
        return x;
    };
}

// Tracks agreement between the annotated tail claim and measured density mass:
// tail(x_k) should be close to mass(x_k..x_{k+1}) + tail(x_{k+1}).
struct AnnotationTracker {
    std::optional<double> prev_log_tail;
    std::optional<bool> last_check;

    void step(double log_seg_mass, double log_tail_now) {
        if (prev_log_tail) {
            const double lhs = *prev_log_tail;
            const double rhs = lse(log_seg_mass, log_tail_now);
            if (!(lhs == kNegInf && rhs == kNegInf)) {
                if (lhs == kNegInf || rhs == kNegInf)
                    last_check = false;
                else
                    last_check = std::abs(lhs - rhs) <= 1.0;
            }
        }
        prev_log_tail = log_tail_now;
    }
    bool failed() const { return last_check && !*last_check; }
};

IntegralVerdict finite_from_outcome(const ProtocolOutcome& out, int sign, double extra_err,
                                    const QuadConfig& cfg) {
    if (out.log_value > kLogDblMax)
        return IntegralVerdict::inconclusive("finite limit exceeds double range");
    const double v = std::exp(out.log_value) + out.tail;
    const double err = out.tail + std::exp(std::min(out.log_delta, kLogDblMax)) + cfg.abs_tol +
                       cfg.rel_tol * v + extra_err;
    return IntegralVerdict::finite(sign * v, err);
}

IntegralVerdict inconclusive_from_outcome(const ProtocolOutcome& out) {
    switch (out.kind) {
        case ProtocolOutcome::Kind::Exhausted:
            return IntegralVerdict::inconclusive(
                "no decision within the refinement budget: increments neither fell below "
                "tolerance nor carried the value past the divergence threshold");
        case ProtocolOutcome::Kind::MeshStuck:
            return IntegralVerdict::inconclusive("mesh exhausted double precision near the boundary");
        case ProtocolOutcome::Kind::Decreased:
            return IntegralVerdict::inconclusive("family decreased along the mesh; not monotone");
        default:
            return IntegralVerdict::inconclusive("internal: unexpected protocol outcome");
    }
}

}  // namespace

// ---- LogScaleDensity -------------------------------------------------------

LogScaleDensity::LogScaleDensity(CoefficientField drift, CoefficientField sigma, double c)
    : drift_(std::move(drift)), sigma_(std::move(sigma)), c_(c) {
    anchors_[c] = 0.0;
}

double LogScaleDensity::operator()(double y) const {
    auto hit = anchors_.find(y);
    if (hit != anchors_.end()) return hit->second;

    // nearest cached anchor
    auto it = anchors_.lower_bound(y);
    double ax, aL;
    if (it == anchors_.end()) {
        --it;
        ax = it->first;
        aL = it->second;
    } else if (it == anchors_.begin()) {
        ax = it->first;
        aL = it->second;
    } else {
        auto lo = std::prev(it);
        if (y - lo->first <= it->first - y) {
            ax = lo->first;
            aL = lo->second;
        } else {
            ax = it->first;
            aL = it->second;
        }
    }

    auto integrand = [this](double u) {
        const double s = eval_field(sigma_, u);
        if (s == 0.0 || !std::isfinite(s))
            throw QuadratureFailure("sigma vanishes or is non-finite at y=" + std::to_string(u));
        const double m = eval_field(drift_, u);
        const double v = 2.0 * m / (s * s);
        if (!std::isfinite(v))
            throw QuadratureFailure("drift/sigma^2 non-finite at y=" + std::to_string(u));
        return v;
    };
    const double seg = qdetail::integrate_signed(integrand, std::min(ax, y), std::max(ax, y),
                                                 1e-14, 1e-12, 600);
    const double L = (y > ax) ? aL - seg : aL + seg;
    if (!std::isfinite(L))
        throw QuadratureFailure("log scale density non-finite at y=" + std::to_string(y));
    if (std::abs(L) > kLogTrustBound)
        throw QuadratureFailure(
            "|log scale density| exceeds 1e12 at y=" + std::to_string(y) +
            "; exponent cancellation makes double precision untrustworthy here");
    if (anchors_.size() < 200000) anchors_.emplace(y, L);
    return L;
}

double log_scale_density(const CoefficientField& drift, const CoefficientField& sigma, double c,
                         double y) {
    return LogScaleDensity(drift, sigma, c)(y);
}

// ---- pointwise operations --------------------------------------------------

IntegralVerdict scale_at_core(const LogDensityFn& log_density, double c, double x,
                              const QuadConfig& cfg) {
    if (x == c) return IntegralVerdict::finite(0.0, 0.0);
    try {
        const double lo = std::min(c, x), hi = std::max(c, x);
        const auto r = log_integrate(log_density, lo, hi, cfg.rel_tol, 1500);
        if (r.log_value > kLogDblMax)
            return IntegralVerdict::inconclusive("finite value exceeds double range");
        const int sign = (x > c) ? 1 : -1;
        return IntegralVerdict::finite(sign * std::exp(r.log_value),
                                       std::exp(std::min(r.log_err, kLogDblMax)));
    } catch (const QuadratureFailure& e) {
        return IntegralVerdict::inconclusive(e.what());
    }
}

IntegralVerdict test_v_at_core(const LogDensityFn& log_density,
                               const LogDensityFn& log_weight_over_sigma2, double c, double x,
                               const QuadConfig& cfg) {
    if (x == c) return IntegralVerdict::finite(0.0, 0.0);
    try {
        const double irel = inner_rel(cfg);
        auto outer = [&](double y) {
            const double li = (x > c)
                                  ? log_integrate(log_density, y, x, irel, kInnerPanels).log_value
                                  : log_integrate(log_density, x, y, irel, kInnerPanels).log_value;
            return li + log_weight_over_sigma2(y) - log_density(y);
        };
        const auto r = log_integrate(outer, std::min(c, x), std::max(c, x), cfg.rel_tol,
                                     kOuterPanels);
        const double lv = kLn2 + r.log_value;
        if (lv > kLogDblMax)
            return IntegralVerdict::inconclusive("finite value exceeds double range");
        const double v = std::exp(lv);
        return IntegralVerdict::finite(v, std::exp(std::min(kLn2 + r.log_err, kLogDblMax)) +
                                              cfg.rel_tol * v);
    } catch (const QuadratureFailure& e) {
        return IntegralVerdict::inconclusive(e.what());
    }
}

// ---- boundary limits -------------------------------------------------------

IntegralVerdict scale_limit_core(const LogDensityFn& log_density, const StateInterval& interval,
                                 double c, Boundary boundary,
                                 const CoefficientField* tail_equivalent, const QuadConfig& cfg) {
    const int sign = (boundary == Boundary::Upper) ? 1 : -1;
    const double seg_rel = inner_rel(cfg);

    double log_acc = kNegInf, log_err_acc = kNegInf, log_ann_mass = kNegInf;
    double prev_x = c;
    std::optional<double> frozen;
    AnnotationTracker tracker;

    auto family = [&](double x) -> double {
        if (frozen) return *frozen;
        const auto seg = (boundary == Boundary::Upper)
                             ? log_integrate(log_density, prev_x, x, seg_rel, kSegPanels)
                             : log_integrate(log_density, x, prev_x, seg_rel, kSegPanels);
        log_acc = lse(log_acc, seg.log_value);
        log_err_acc = lse(log_err_acc, seg.log_err);
        prev_x = x;
        if (!tail_equivalent) return log_acc;
        const double ld = log_density(x);
        const double lt = log_positive(*tail_equivalent, x) + ld;
        tracker.step(seg.log_value, lt);
        log_ann_mass = lt;
        const double fam = lse(log_acc, lt);
        if (std::abs(ld) > kLogSaturation) frozen = fam;
        return fam;
    };

    try {
        const auto out = run_limit_protocol(make_mesh(interval, c, boundary, cfg), family, tail_equivalent == nullptr, cfg);
        switch (out.kind) {
            case ProtocolOutcome::Kind::Finite: {
                if (tail_equivalent && tracker.failed())
                    return IntegralVerdict::inconclusive(
                        "asymptotic mismatch: annotated tail disagrees with measured density mass");
                const double slack =
                    tail_equivalent ? 0.02 * std::exp(std::min(log_ann_mass, kLogDblMax)) : 0.0;
                const double quad_err = std::exp(std::min(log_err_acc, kLogDblMax));
                return finite_from_outcome(out, sign, slack + quad_err, cfg);
            }
            case ProtocolOutcome::Kind::Infinite:
                if (tail_equivalent)
                    return IntegralVerdict::inconclusive(
                        "asymptotic mismatch: annotation claims a convergent tail but the family "
                        "diverges");
                return IntegralVerdict::infinite(sign);
            default:
                return inconclusive_from_outcome(out);
        }
    } catch (const QuadratureFailure& e) {
        return IntegralVerdict::inconclusive(e.what());
    }
}

IntegralVerdict test_v_limit_core(const LogDensityFn& log_density,
                                  const LogDensityFn& log_weight_over_sigma2,
                                  const StateInterval& interval, double c, Boundary boundary,
                                  const CoefficientField* tail_equivalent, const QuadConfig& cfg) {
    const bool upper = (boundary == Boundary::Upper);
    const bool inf_boundary =
        upper ? interval.upper_is_infinite() : interval.lower_is_infinite();
    const double boundary_value = upper ? interval.upper : interval.lower;
    const double seg_rel = inner_rel(cfg);

    // log g = log(weight/sigma^2) - log density; the nested outer integrand is
    // (mass between y and the frontier) * g(y).
    auto log_g = [&](double y) { return log_weight_over_sigma2(y) - log_density(y); };
    // collapsed tail integrand: equivalent(y) * density(y) * g(y), density cancels
    auto log_coll = [&](double y) {
        return log_positive(*tail_equivalent, y) + log_weight_over_sigma2(y);
    };

    auto nested_segment = [&](double a, double b) {
        // outer over [a,b] with inner mass from y to the segment edge nearest
        // the boundary (b when ascending, a when descending)
        auto outer = [&](double y) {
            const double li = upper
                                  ? log_integrate(log_density, y, b, seg_rel, kInnerPanels).log_value
                                  : log_integrate(log_density, a, y, seg_rel, kInnerPanels).log_value;
            return li + log_g(y);
        };
        return log_integrate(outer, a, b, std::max(cfg.rel_tol / 3.0, 1e-12), kOuterPanels);
    };

    double logV = kNegInf, logG = kNegInf, log_err_acc = kNegInf, log_ann_mass = kNegInf;
    double prev_x = c;
    bool first = true;
    bool saturated = false;
    double frozen_lt = kNegInf;   // tail claim at the saturation point
    double coll_acc = kNegInf;    // collapsed region accumulated past saturation
    double prev_coll_x = 0.0;
    AnnotationTracker tracker;

    auto family = [&](double x) -> double {
        if (saturated) {
            // Density is no longer touched; extend only the collapsed region.
            if (inf_boundary) {
                const auto seg = upper
                                     ? log_integrate(log_coll, prev_coll_x, x, seg_rel, kSegPanels)
                                     : log_integrate(log_coll, x, prev_coll_x, seg_rel, kSegPanels);
                coll_acc = lse(coll_acc, seg.log_value);
                log_err_acc = lse(log_err_acc, seg.log_err);
                prev_coll_x = x;
            } else {
                const auto whole = upper
                                       ? log_integrate(log_coll, x, boundary_value, seg_rel, kSegPanels)
                                       : log_integrate(log_coll, boundary_value, x, seg_rel, kSegPanels);
                coll_acc = whole.log_value;
            }
            log_ann_mass = lse(frozen_lt + logG, coll_acc);
            return kLn2 + lse(lse(logV, frozen_lt + logG), coll_acc);
        }

        double seg_mass = kNegInf;
        if (first) {
            const auto v0 = upper ? nested_segment(c, x) : nested_segment(x, c);
            const auto g0 = upper ? log_integrate(log_g, c, x, seg_rel, kSegPanels)
                                  : log_integrate(log_g, x, c, seg_rel, kSegPanels);
            logV = v0.log_value;
            logG = g0.log_value;
            log_err_acc = lse(v0.log_err, g0.log_err);
            first = false;
        } else {
            const auto d = upper ? log_integrate(log_density, prev_x, x, seg_rel, kSegPanels)
                                 : log_integrate(log_density, x, prev_x, seg_rel, kSegPanels);
            const auto n = upper ? nested_segment(prev_x, x) : nested_segment(x, prev_x);
            const auto g = upper ? log_integrate(log_g, prev_x, x, seg_rel, kSegPanels)
                                 : log_integrate(log_g, x, prev_x, seg_rel, kSegPanels);
            seg_mass = d.log_value;
            logV = lse(lse(logV, d.log_value + logG), n.log_value);
            logG = lse(logG, g.log_value);
            log_err_acc = lse(log_err_acc, lse(n.log_err, g.log_err));
        }
        prev_x = x;
        if (!tail_equivalent) return kLn2 + logV;

        const double ld = log_density(x);
        const double lt = log_positive(*tail_equivalent, x) + ld;
        if (seg_mass != kNegInf || tracker.prev_log_tail) tracker.step(seg_mass, lt);

        double fam;
        if (inf_boundary) {
            log_ann_mass = lt + logG;
            fam = kLn2 + lse(logV, lt + logG);
        } else {
            const auto coll = upper
                                  ? log_integrate(log_coll, x, boundary_value, seg_rel, kSegPanels)
                                  : log_integrate(log_coll, boundary_value, x, seg_rel, kSegPanels);
            log_ann_mass = lse(lt + logG, coll.log_value);
            fam = kLn2 + lse(lse(logV, lt + logG), coll.log_value);
        }
        if (std::abs(ld) > kLogSaturation) {
            saturated = true;
            frozen_lt = lt;
            prev_coll_x = x;
        }
        return fam;
    };

    try {
        const auto out = run_limit_protocol(make_mesh(interval, c, boundary, cfg), family, tail_equivalent == nullptr, cfg);
        switch (out.kind) {
            case ProtocolOutcome::Kind::Finite: {
                if (tail_equivalent && tracker.failed())
                    return IntegralVerdict::inconclusive(
                        "asymptotic mismatch: annotated tail disagrees with measured density mass");
                const double slack =
                    tail_equivalent ? 0.02 * std::exp(std::min(kLn2 + log_ann_mass, kLogDblMax))
                                    : 0.0;
                const double quad_err = std::exp(std::min(kLn2 + log_err_acc, kLogDblMax));
                return finite_from_outcome(out, 1, slack + quad_err, cfg);
            }
            case ProtocolOutcome::Kind::Infinite:
                // A density-tail annotation says nothing about the weighted
                // test function, so divergence here is a legitimate verdict.
                if (tail_equivalent && tracker.failed())
                    return IntegralVerdict::inconclusive(
                        "asymptotic mismatch: annotated tail disagrees with measured density mass");
                return IntegralVerdict::infinite(1);
            default:
                return inconclusive_from_outcome(out);
        }
    } catch (const QuadratureFailure& e) {
        return IntegralVerdict::inconclusive(e.what());
    }
}

// ---- named wrappers over diffusion coefficients ----------------------------

namespace {

struct FieldBundle {
    std::shared_ptr<LogScaleDensity> density;
    LogDensityFn log_density;
    LogDensityFn log_wos2;
};

FieldBundle make_bundle(const CoefficientField& drift, const CoefficientField& sigma,
                        const CoefficientField* weight, double c) {
    FieldBundle b;
    b.density = std::make_shared<LogScaleDensity>(drift, sigma, c);
    auto d = b.density;
    b.log_density = [d](double y) { return (*d)(y); };
    CoefficientField sig = sigma;
    if (weight) {
        CoefficientField w = *weight;
        b.log_wos2 = [w, sig](double y) {
            const double wv = eval_field(w, y);
            if (wv < 0.0 || !std::isfinite(wv))
                throw QuadratureFailure("weight '" + w.formula + "' negative or non-finite at y=" +
                                        std::to_string(y));
            const double sv = eval_field(sig, y);
            if (sv == 0.0 || !std::isfinite(sv))
                throw QuadratureFailure("sigma vanishes or is non-finite at y=" +
                                        std::to_string(y));
            const double lw = (wv == 0.0) ? -std::numeric_limits<double>::infinity()
                                          : std::log(wv);
            return lw - 2.0 * std::log(std::abs(sv));
        };
    }
    return b;
}

const CoefficientField* routed_equivalent(const TailAnnotation* annotation, Boundary boundary) {
    if (!annotation) return nullptr;
    if (annotation->boundary != boundary)
        throw std::invalid_argument("tail annotation routed to the wrong boundary");
    return &annotation->equivalent;
}

}  // namespace

IntegralVerdict scale_at(const CoefficientField& drift, const CoefficientField& sigma, double c,
                         double x, const QuadConfig& cfg) {
    try {
        const auto b = make_bundle(drift, sigma, nullptr, c);
        return scale_at_core(b.log_density, c, x, cfg);
    } catch (const QuadratureFailure& e) {
        return IntegralVerdict::inconclusive(e.what());
    }
}

IntegralVerdict test_v_at(const CoefficientField& drift, const CoefficientField& sigma,
                          const CoefficientField& weight, double c, double x,
                          const QuadConfig& cfg) {
    try {
        const auto b = make_bundle(drift, sigma, &weight, c);
        return test_v_at_core(b.log_density, b.log_wos2, c, x, cfg);
    } catch (const QuadratureFailure& e) {
        return IntegralVerdict::inconclusive(e.what());
    }
}

IntegralVerdict scale_limit(const CoefficientField& drift, const CoefficientField& sigma,
                            const StateInterval& interval, double c, Boundary boundary,
                            const TailAnnotation* annotation, const QuadConfig& cfg) {
    try {
        const auto b = make_bundle(drift, sigma, nullptr, c);
        return scale_limit_core(b.log_density, interval, c, boundary,
                                routed_equivalent(annotation, boundary), cfg);
    } catch (const QuadratureFailure& e) {
        return IntegralVerdict::inconclusive(e.what());
    }
}

IntegralVerdict test_v_limit(const CoefficientField& drift, const CoefficientField& sigma,
                             const CoefficientField& weight, const StateInterval& interval,
                             double c, Boundary boundary, const TailAnnotation* annotation,
                             const QuadConfig& cfg) {
    try {
        const auto b = make_bundle(drift, sigma, &weight, c);
        return test_v_limit_core(b.log_density, b.log_wos2, interval, c, boundary,
                                 routed_equivalent(annotation, boundary), cfg);
    } catch (const QuadratureFailure& e) {
        return IntegralVerdict::inconclusive(e.what());
    }
}

}  // namespace martcheck
