#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "martcheck/montecarlo.hpp"

using namespace martcheck;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Parameters used by most cases: strong reversion, moderate vol-of-vol.
const ScottParams kP{2.0, 0.3, 0.5, 0.3};

SimConfig base_cfg(int steps, long paths, std::uint64_t seed) {
    SimConfig cfg;
    cfg.T = 1.0;
    cfg.n_steps = steps;
    cfg.n_paths = paths;
    cfg.seed = seed;
    cfg.n_threads = 1;
    return cfg;
}

bool same_estimate(const PathEstimate& a, const PathEstimate& b) {
    return a.mean == b.mean && a.std_error == b.std_error && a.n_paths == b.n_paths &&
           a.absorbed_fraction == b.absorbed_fraction && a.max_S == b.max_S &&
           a.unreliable == b.unreliable;
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) {
            ++i;
        } else {
            ++j;
        }
        const double fa = static_cast<double>(i) / static_cast<double>(a.size());
        const double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

} // namespace

TEST_CASE("invalid configurations are rejected") {
    SimConfig cfg = base_cfg(10, 10, 1);
    cfg.T = 0.0;
    CHECK_THROWS_AS(simulate(kP, cfg), std::invalid_argument);
    cfg = base_cfg(0, 10, 1);
    CHECK_THROWS_AS(simulate(kP, cfg), std::invalid_argument);
    cfg = base_cfg(10, 0, 1);
    CHECK_THROWS_AS(simulate(kP, cfg), std::invalid_argument);

    CHECK_THROWS_AS(simulate_cholesky(kP, 1.5, base_cfg(10, 10, 1)), std::invalid_argument);
    CHECK_THROWS_AS(simulate_cholesky(kP, -1.5, base_cfg(10, 10, 1)), std::invalid_argument);
    CHECK_THROWS_AS(simulate_wu_yor(kP, -0.1, base_cfg(10, 10, 1)), std::invalid_argument);
    CHECK_THROWS_AS(simulate_wu_yor(kP, 1.1, base_cfg(10, 10, 1)), std::invalid_argument);
}

TEST_CASE("identical configuration reproduces the estimate bit for bit") {
    const SimConfig cfg = base_cfg(50, 4000, 20240817);
    const PathEstimate a = simulate_cholesky(kP, -0.5, cfg);
    const PathEstimate b = simulate_cholesky(kP, -0.5, cfg);
    CHECK(same_estimate(a, b));

    SimConfig other = cfg;
    other.seed = 20240818;
    const PathEstimate c = simulate_cholesky(kP, -0.5, other);
    CHECK(a.mean != c.mean);
}

TEST_CASE("worker count never affects the result") {
    SimConfig cfg = base_cfg(40, 3001, 7); // odd count: uneven block split
    cfg.n_threads = 1;
    const PathEstimate one = simulate_wu_yor(kP, 0.3, cfg);
    cfg.n_threads = 3;
    const PathEstimate three = simulate_wu_yor(kP, 0.3, cfg);
    cfg.n_threads = 0; // hardware default
    const PathEstimate autod = simulate_wu_yor(kP, 0.3, cfg);
    CHECK(same_estimate(one, three));
    CHECK(same_estimate(one, autod));
}

TEST_CASE("zero loading freezes the price at one") {
    SimConfig cfg = base_cfg(100, 5000, 99);
    cfg.debug_zero_b = true;
    ScottParams p = kP;
    p.x0 = 0.1; // close to the boundary: absorption still happens to Y
    const PathEstimate est = simulate_cholesky(p, 0.7, cfg);
    CHECK(est.mean == 1.0);
    CHECK(est.std_error == 0.0);
    CHECK(est.max_S == 1.0);
    CHECK(est.unreliable == false);
    CHECK(est.absorbed_fraction > 0.0);
    CHECK(est.absorbed_fraction < 1.0);
}

TEST_CASE("perfect correlation collapses both schemes to the same paths") {
    const SimConfig cfg = base_cfg(100, 20000, 31337);
    const PathEstimate chol = simulate_cholesky(kP, 1.0, cfg);
    const PathEstimate wy = simulate_wu_yor(kP, 1.0, cfg);
    // The corrector's coefficients vanish at rho=1, so with the same seed the
    // two schemes consume identical draws and must agree exactly -- which is
    // stronger than the 3-joint-std_error bound they are required to meet.
    CHECK(same_estimate(chol, wy));
    CHECK(std::abs(chol.mean - wy.mean) <=
          3.0 * std::sqrt(chol.std_error * chol.std_error + wy.std_error * wy.std_error));

    SimConfig small = base_cfg(25, 50, 5);
    const std::vector<double> tc = [&] {
        SimConfig c2 = small;
        c2.scheme = CorrelationScheme::cholesky(1.0);
        return simulate_terminals(kP, c2);
    }();
    const std::vector<double> tw = [&] {
        SimConfig c2 = small;
        c2.scheme = CorrelationScheme::wu_yor(1.0);
        return simulate_terminals(kP, c2);
    }();
    REQUIRE(tc.size() == tw.size());
    for (std::size_t i = 0; i < tc.size(); ++i) CHECK(tc[i] == tw[i]);
}

TEST_CASE("perfectly correlated schemes agree in distribution across seeds") {
    // Different seeds, 1e5 paths each; two-sample KS below the 1% critical
    // value 1.628*sqrt(2/n) = 0.00728.
    SimConfig cfg = base_cfg(100, 100000, 555);
    cfg.n_threads = 0;
    cfg.scheme = CorrelationScheme::cholesky(1.0);
    const std::vector<double> a = simulate_terminals(kP, cfg);
    cfg.seed = 777;
    cfg.scheme = CorrelationScheme::wu_yor(1.0);
    const std::vector<double> b = simulate_terminals(kP, cfg);
    const double d = ks_statistic(a, b);
    INFO("KS statistic: " << d);
    CHECK(d < 0.00728);
}

TEST_CASE("absorption is rarer the farther the volatility starts from the boundary") {
    const SimConfig cfg = base_cfg(200, 10000, 2024);
    double prev = 2.0;
    for (const double x0 : {0.1, 0.3, 1.0}) {
        ScottParams p = kP;
        p.x0 = x0;
        const PathEstimate est = simulate_cholesky(p, -0.5, cfg);
        INFO("x0=" << x0 << " absorbed=" << est.absorbed_fraction);
        CHECK(est.absorbed_fraction <= prev);
        prev = est.absorbed_fraction;
    }
}

TEST_CASE("ten seeds agree on the true-martingale mean") {
    // rho <= 0 Cholesky keeps the exponential a true martingale, so the mean
    // of means over independent seeds must sit near 1.  The bound uses the
    // root-mean-square of the per-run std_errors, i.e. roughly a 3-sigma
    // allowance for the pooled average of 10 runs.
    double sum_means = 0.0;
    double sum_se2 = 0.0;
    for (std::uint64_t s = 1; s <= 10; ++s) {
        const PathEstimate est = simulate_cholesky(kP, -0.5, base_cfg(200, 20000, s * 1000 + 7));
        sum_means += est.mean;
        sum_se2 += est.std_error * est.std_error;
    }
    const double mean_of_means = sum_means / 10.0;
    const double pooled_se = std::sqrt(sum_se2 / 10.0);
    INFO("mean of means: " << mean_of_means << " pooled se: " << pooled_se);
    CHECK(std::abs(mean_of_means - 1.0) <= pooled_se);
}

TEST_CASE("the wu-yor corrector visibly drags the mean below one") {
    // The corrector is a genuine pathwise drift correlated with the loading,
    // so the wu_yor mean sits far below 1 at any feasible sample size.  The
    // Cholesky scheme at the same parameters keeps a unit discrete mean for
    // every rho (left-endpoint Ito update with exact Gaussian increments), so
    // the wu_yor estimate must also sit far below it; an independent coarse
    // pilot puts the gap near 0.5 here, dwarfing both standard errors.
    const SimConfig cfg = base_cfg(500, 20000, 314159);
    const PathEstimate wy0 = simulate_wu_yor(kP, 0.0, cfg);
    INFO("wu-yor rho=0: mean=" << wy0.mean << " se=" << wy0.std_error);
    CHECK(wy0.mean < 1.0 - 3.0 * wy0.std_error);
    CHECK(wy0.mean > 0.1); // sanity: not everything vanished

    const PathEstimate chol1 = simulate_cholesky(kP, 1.0, cfg);
    INFO("cholesky rho=1: mean=" << chol1.mean << " se=" << chol1.std_error);
    const double joint = std::sqrt(wy0.std_error * wy0.std_error +
                                   chol1.std_error * chol1.std_error);
    CHECK(wy0.mean < chol1.mean - 3.0 * joint);
}

TEST_CASE("true-martingale regime stays within noise of one") {
    const PathEstimate est = simulate_cholesky(kP, -0.5, base_cfg(500, 50000, 8675309));
    INFO("mean=" << est.mean << " se=" << est.std_error);
    CHECK(std::abs(est.mean - 1.0) <= 3.0 * est.std_error);
}

TEST_CASE("wu-yor estimate is stable under step halving") {
    // The corrector's trapezoid rule and its omitted first interval must not
    // move the estimate beyond joint noise when the grid is refined.
    SimConfig coarse = base_cfg(250, 30000, 424242);
    SimConfig fine = base_cfg(500, 30000, 424243);
    const PathEstimate a = simulate_wu_yor(kP, 0.5, coarse);
    const PathEstimate b = simulate_wu_yor(kP, 0.5, fine);
    const double joint = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
    INFO("coarse=" << a.mean << " fine=" << b.mean << " joint se=" << joint);
    CHECK(std::abs(a.mean - b.mean) <= 3.0 * joint);
}

TEST_CASE("sweep derives one independent seed per row") {
    const SimConfig cfg = base_cfg(50, 2000, 1234);
    const std::vector<double> rhos{-1.0, -0.5, 0.0};
    const std::vector<SweepRow> rows = sweep_rho(kP, CorrelationScheme::Kind::Cholesky, rhos, cfg);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].rho == rhos[i]);
        SimConfig row_cfg = cfg;
        row_cfg.seed = sweep_seed(cfg.seed, i);
        const PathEstimate direct = simulate_cholesky(kP, rhos[i], row_cfg);
        CHECK(same_estimate(rows[i].estimate, direct));
    }
    CHECK(sweep_seed(cfg.seed, 0) != sweep_seed(cfg.seed, 1));

    CHECK(sweep_rho(kP, CorrelationScheme::Kind::WuYor, {}, cfg).empty());
    CHECK_THROWS_AS(sweep_rho(kP, CorrelationScheme::Kind::WuYor, {0.5, -0.25}, cfg),
                    std::invalid_argument);
}

TEST_CASE("sweep csv lists one line per rho with the pinned header") {
    const SimConfig cfg = base_cfg(20, 500, 5150);
    const std::vector<SweepRow> rows =
        sweep_rho(kP, CorrelationScheme::Kind::Cholesky, {-1.0, 0.25}, cfg);
    const std::string csv = sweep_csv(rows, cfg.n_steps);
    CHECK(csv.rfind("rho,mean,std_error,n_paths,n_steps,absorbed_fraction,max_S\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("\n-1,") != std::string::npos);
    CHECK(csv.find(",500,20,") != std::string::npos);
}

TEST_CASE("overflowing paths flag the estimate as unreliable") {
    // Absurd vol-of-vol so that sigma = e^Y leaves double range within a few
    // steps; the run must finish, clamp those paths to the +inf sentinel and
    // say so, rather than crash or report a quietly poisoned mean.
    const ScottParams wild{1e-4, 1.0, 600.0, 1.0};
    SimConfig cfg = base_cfg(4, 4000, 11);
    cfg.T = 1.0;
    const PathEstimate est = simulate_cholesky(wild, 0.0, cfg);
    CHECK(est.unreliable);
    CHECK(est.max_S == kInf);
    CHECK(std::isinf(est.mean));

    // and the tame configuration next to it stays reliable
    const PathEstimate tame = simulate_cholesky(kP, 0.0, base_cfg(50, 2000, 11));
    CHECK_FALSE(tame.unreliable);
    CHECK(std::isfinite(tame.max_S));
}
