#include "martcheck/montecarlo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace martcheck {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Box-Muller on top of mt19937_64 so the draw sequence is pinned by this
// file alone, not by the standard library's distribution internals.
class NormalSource {
  public:
    explicit NormalSource(std::uint64_t seed) : eng_(seed) {}

    double operator()() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.141592653589793238462643383279502884 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

  private:
    // (0, 1]: never zero, so log(u1) is always finite.
    double uniform01() {
        return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
    }

    std::mt19937_64 eng_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

struct StepCoefficients {
    double dt;
    double sqrt_dt;
    double decay;    // e^{-alpha dt}
    double sqrt_vou; // std of the exact OU transition noise
    double k1;       // dW loading on the OU noise's unit normal
    double k2;       // dW loading on its independent residual normal
};

StepCoefficients step_coefficients(const ScottParams& p, double dt) {
    StepCoefficients c;
    c.dt = dt;
    c.sqrt_dt = std::sqrt(dt);
    c.decay = std::exp(-p.alpha * dt);
    const double v_ou = p.beta * p.beta * (1.0 - c.decay * c.decay) / (2.0 * p.alpha);
    c.sqrt_vou = std::sqrt(v_ou);
    const double c12 = p.beta * (1.0 - c.decay) / p.alpha; // Cov(dW, ou noise)
    c.k1 = c12 / c.sqrt_vou;
    c.k2 = std::sqrt(std::max(0.0, dt - c12 * c12 / v_ou));
    return c;
}

struct PathOutcome {
    double terminal = 1.0;
    bool absorbed = false;
};

PathOutcome run_path(const ScottParams& p, const SimConfig& cfg,
                     const StepCoefficients& c, std::uint64_t path_seed) {
    NormalSource normal(path_seed);
    const bool wu_yor = cfg.scheme.kind == CorrelationScheme::Kind::WuYor;
    const double rho = cfg.scheme.rho;
    const double chol_w = rho;
    const double chol_b = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const double wy_w = 1.0 - rho;
    const double wy_b = std::sqrt(std::max(0.0, rho - rho * rho));

    double y = p.x0;
    double log_s = 0.0;
    double w_t = 0.0;
    double b_t = 0.0;
    double prev_phi = 0.0;
    PathOutcome out;
    for (int i = 1; i <= cfg.n_steps; ++i) {
        const double z1 = normal();
        const double z2 = normal();
        const double z3 = normal();
        const double ou_noise = c.sqrt_vou * z1;
        const double d_w = c.k1 * z1 + c.k2 * z2;
        const double d_b = c.sqrt_dt * z3;

        double d_t;
        if (wu_yor) {
            w_t += d_w;
            b_t += d_b;
            const double t_i = static_cast<double>(i) * c.dt;
            const double phi = (wy_w * w_t + wy_b * b_t) / t_i;
            const double corrector = (i == 1) ? 0.0 : 0.5 * c.dt * (prev_phi + phi);
            prev_phi = phi;
            d_t = d_w - corrector;
        } else {
            d_t = chol_w * d_w - chol_b * d_b;
        }

        const double sigma = cfg.debug_zero_b ? 0.0 : std::exp(y);
        log_s += -0.5 * sigma * sigma * c.dt + sigma * d_t;
        if (!std::isfinite(log_s)) {
            // -inf is a genuine underflow (the path is worthless but valid);
            // +inf or NaN means the numbers left double range: clamp to the
            // +inf sentinel so the estimate gets flagged unreliable.
            out.terminal = log_s == -kInf ? 0.0 : kInf;
            return out;
        }
        y = p.m + (y - p.m) * c.decay + ou_noise;
        if (y <= 0.0) {
            out.absorbed = true;
            break;
        }
    }
    out.terminal = std::exp(log_s);
    return out;
}

PathEstimate reduce(const std::vector<PathOutcome>& outcomes) {
    PathEstimate est;
    est.n_paths = static_cast<long>(outcomes.size());
    long absorbed = 0;
    double max_s = -kInf;
    // Kahan-compensated sums keep the reduction independent of batching and
    // accurate over heavy-tailed samples.
    double sum = 0.0, comp = 0.0;
    for (const PathOutcome& o : outcomes) {
        if (o.absorbed) ++absorbed;
        max_s = std::max(max_s, o.terminal);
        if (!std::isfinite(o.terminal)) est.unreliable = true;
        const double t = o.terminal - comp;
        const double s = sum + t;
        comp = (s - sum) - t;
        sum = s;
    }
    const double n = static_cast<double>(outcomes.size());
    est.mean = sum / n;
    est.absorbed_fraction = static_cast<double>(absorbed) / n;
    est.max_S = max_s;
    if (est.unreliable) {
        // a clamped path dominates every moment; report that honestly
        est.mean = kInf;
        est.std_error = kInf;
        return est;
    }
    if (outcomes.size() > 1 && std::isfinite(est.mean)) {
        double ss = 0.0, sc = 0.0;
        for (const PathOutcome& o : outcomes) {
            const double d = o.terminal - est.mean;
            const double t = d * d - sc;
            const double s = ss + t;
            sc = (s - ss) - t;
            ss = s;
        }
        const double sample_var = ss / (n - 1.0);
        est.std_error = std::sqrt(sample_var / n);
    } else if (!std::isfinite(est.mean)) {
        est.std_error = kInf;
    }
    return est;
}

void append_number(std::string& out, double v) {
    if (std::isnan(v)) {
        out += "nan";
        return;
    }
    if (std::isinf(v)) {
        out += v > 0 ? "inf" : "-inf";
        return;
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

} // namespace

namespace {

std::vector<PathOutcome> run_all_paths(const ScottParams& p, const SimConfig& cfg) {
    if (!(cfg.T > 0.0)) throw std::invalid_argument("simulate: T must be positive");
    if (cfg.n_steps < 1) throw std::invalid_argument("simulate: n_steps must be >= 1");
    if (cfg.n_paths < 1) throw std::invalid_argument("simulate: n_paths must be >= 1");

    const StepCoefficients coeff = step_coefficients(p, cfg.T / cfg.n_steps);
    std::vector<PathOutcome> outcomes(static_cast<std::size_t>(cfg.n_paths));

    const auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const std::uint64_t path_seed =
                splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(i) + 1));
            outcomes[i] = run_path(p, cfg, coeff, path_seed);
        }
    };

    unsigned n_threads = cfg.n_threads > 0
                             ? static_cast<unsigned>(cfg.n_threads)
                             : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(cfg.n_paths));
    if (n_threads <= 1) {
        worker(0, outcomes.size());
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        const std::size_t per = outcomes.size() / n_threads;
        const std::size_t extra = outcomes.size() % n_threads;
        std::size_t begin = 0;
        for (unsigned t = 0; t < n_threads; ++t) {
            const std::size_t end = begin + per + (t < extra ? 1 : 0);
            pool.emplace_back(worker, begin, end);
            begin = end;
        }
        for (std::thread& t : pool) t.join();
    }
    return outcomes;
}

} // namespace

PathEstimate simulate(const ScottParams& p, const SimConfig& cfg) {
    return reduce(run_all_paths(p, cfg));
}

std::vector<double> simulate_terminals(const ScottParams& p, const SimConfig& cfg) {
    const std::vector<PathOutcome> outcomes = run_all_paths(p, cfg);
    std::vector<double> terminals;
    terminals.reserve(outcomes.size());
    for (const PathOutcome& o : outcomes) terminals.push_back(o.terminal);
    return terminals;
}

PathEstimate simulate_cholesky(const ScottParams& p, double rho, SimConfig cfg) {
    cfg.scheme = CorrelationScheme::cholesky(rho);
    return simulate(p, cfg);
}

PathEstimate simulate_wu_yor(const ScottParams& p, double rho, SimConfig cfg) {
    cfg.scheme = CorrelationScheme::wu_yor(rho);
    return simulate(p, cfg);
}

std::uint64_t sweep_seed(std::uint64_t base, std::size_t index) {
    return splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(index) * 2 + 1));
}

std::vector<SweepRow> sweep_rho(const ScottParams& p, CorrelationScheme::Kind kind,
                                const std::vector<double>& rhos, const SimConfig& cfg) {
    std::vector<SweepRow> rows;
    rows.reserve(rhos.size());
    for (std::size_t i = 0; i < rhos.size(); ++i) {
        SimConfig row_cfg = cfg;
        row_cfg.seed = sweep_seed(cfg.seed, i);
        row_cfg.scheme = kind == CorrelationScheme::Kind::Cholesky
                             ? CorrelationScheme::cholesky(rhos[i])
                             : CorrelationScheme::wu_yor(rhos[i]);
        rows.push_back(SweepRow{rhos[i], simulate(p, row_cfg)});
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, int n_steps) {
    std::string out = "rho,mean,std_error,n_paths,n_steps,absorbed_fraction,max_S\n";
    for (const SweepRow& r : rows) {
        append_number(out, r.rho);
        out += ',';
        append_number(out, r.estimate.mean);
        out += ',';
        append_number(out, r.estimate.std_error);
        out += ',';
        out += std::to_string(r.estimate.n_paths);
        out += ',';
        out += std::to_string(n_steps);
        out += ',';
        append_number(out, r.estimate.absorbed_fraction);
        out += ',';
        append_number(out, r.estimate.max_S);
        out += '\n';
    }
    return out;
}

} // namespace martcheck
