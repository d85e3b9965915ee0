// Command-line front end: classification reports, verdict tables against the
// closed-form oracle, Monte Carlo estimates and sweeps, and expression
// checking.  Exit codes: 0 success, 1 usage error, 2 an inconclusive verdict
// in a deciding position, 3 a table row disagreeing with the oracle.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "martcheck/classifier.hpp"
#include "martcheck/diffusion.hpp"
#include "martcheck/expr.hpp"
#include "martcheck/montecarlo.hpp"
#include "martcheck/quadrature.hpp"
#include "martcheck/scott.hpp"

namespace {

using namespace martcheck;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInconclusive = 2;
constexpr int kExitMismatch = 3;

struct CommonFlags {
    std::string preset;
    std::string model_path;
    std::string scheme; // "cholesky" | "wu-yor"
    double rho = 0.0;
    bool rho_set = false;
    std::string rhos_text;
    std::optional<double> alpha, m, beta, x0, c;
    std::string out_path;
    std::string format;
    bool strict = false;
};

void add_model_flags(CLI::App* cmd, CommonFlags& f, bool with_rho, bool with_rhos) {
    cmd->add_option("--preset", f.preset, "model preset: scott-cholesky | scott-wuyor");
    cmd->add_option("--model", f.model_path, "model file (JSON)");
    cmd->add_option("--scheme", f.scheme, "correlation scheme: cholesky | wu-yor");
    if (with_rho)
        cmd->add_option("--rho", f.rho, "correlation parameter")->each([&f](const std::string&) {
            f.rho_set = true;
        });
    if (with_rhos) cmd->add_option("--rhos", f.rhos_text, "comma-separated correlation list");
    cmd->add_option("--alpha", f.alpha, "reversion speed (preset models)");
    cmd->add_option("--m", f.m, "reversion level (preset models)");
    cmd->add_option("--beta", f.beta, "vol-of-vol (preset models)");
    cmd->add_option("--x0", f.x0, "initial state (preset models)");
    cmd->add_option("--c", f.c, "base point for the scale/test integrals");
    cmd->add_option("--out", f.out_path, "write the report to this file instead of stdout");
    cmd->add_option("--format", f.format, "output format where applicable: json | csv");
    cmd->add_flag("--strict", f.strict, "fail hard instead of printing on inconclusive verdicts");
}

[[noreturn]] void usage_error(const std::string& message) {
    std::cerr << "martcheck: " << message << "\n";
    std::exit(kExitUsage);
}

std::vector<double> parse_rho_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used])))
                ++used;
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            usage_error("--rhos entry '" + item + "' is not a number");
        }
    }
    if (out.empty()) usage_error("--rhos must list at least one value");
    return out;
}

void emit(const CommonFlags& f, const std::string& text) {
    if (f.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(f.out_path);
    if (!out) usage_error("cannot open --out file '" + f.out_path + "'");
    out << text;
}

// Resolved model inputs: either a Scott preset (closed-form oracle available)
// or a free-form model file.
struct ResolvedModel {
    DiffusionSpec spec;
    CorrelationScheme scheme;
    std::vector<TailAnnotation> annotations;
    std::optional<ScottParams> scott; // set when the model is a Scott preset
};

CorrelationScheme make_scheme(const std::string& name, double rho) {
    if (name == "cholesky") return CorrelationScheme::cholesky(rho);
    if (name == "wu-yor" || name == "wu_yor") return CorrelationScheme::wu_yor(rho);
    usage_error("unknown --scheme '" + name + "' (expected cholesky or wu-yor)");
}

ResolvedModel resolve_model(const CommonFlags& f, bool rho_required) {
    if (!f.preset.empty() && !f.model_path.empty())
        usage_error("--preset and --model are mutually exclusive");

    if (!f.model_path.empty()) {
        std::ifstream in(f.model_path);
        if (!in) usage_error("cannot open model file '" + f.model_path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        ModelFile model = model_from_json_text(buf.str());
        // flag > model file
        auto override_param = [&model](const char* name, const std::optional<double>& v) {
            if (v) model.spec.params[name] = *v;
        };
        override_param("alpha", f.alpha);
        override_param("m", f.m);
        override_param("beta", f.beta);
        if (f.x0) model.spec.x0 = *f.x0;
        if (!model.spec.interval.contains(model.spec.x0))
            usage_error("--x0 must lie strictly inside the model interval");
        CorrelationScheme scheme = model.scheme;
        if (!f.scheme.empty() || f.rho_set) {
            const std::string name =
                !f.scheme.empty()
                    ? f.scheme
                    : (model.scheme.kind == CorrelationScheme::Kind::Cholesky ? "cholesky"
                                                                              : "wu-yor");
            scheme = make_scheme(name, f.rho_set ? f.rho : model.scheme.rho);
        }
        return ResolvedModel{std::move(model.spec), scheme, {}, std::nullopt};
    }

    std::string preset = f.preset;
    if (preset.empty()) usage_error("one of --preset or --model is required");
    std::string scheme_name;
    if (preset == "scott-cholesky") {
        scheme_name = "cholesky";
    } else if (preset == "scott-wuyor") {
        scheme_name = "wu-yor";
    } else {
        usage_error("unknown --preset '" + preset + "' (expected scott-cholesky or scott-wuyor)");
    }
    if (!f.scheme.empty()) scheme_name = f.scheme;
    if (rho_required && !f.rho_set) usage_error("--rho is required with this command");

    ScottParams p;
    p.alpha = f.alpha.value_or(p.alpha);
    p.m = f.m.value_or(p.m);
    p.beta = f.beta.value_or(p.beta);
    p.x0 = f.x0.value_or(p.x0);
    const CorrelationScheme scheme = make_scheme(scheme_name, f.rho_set ? f.rho : 0.0);
    return ResolvedModel{scott_spec(p), scheme, tail_annotations(p, scheme), p};
}

int threads_from_env() {
    const char* env = std::getenv("MARTCHECK_THREADS");
    if (env == nullptr) return 0;
    try {
        const int v = std::stoi(env);
        return v > 0 ? v : 1;
    } catch (const std::exception&) {
        return 0;
    }
}

// ---- classify ---------------------------------------------------------------

int run_classify(const CommonFlags& f) {
    if (!f.format.empty() && f.format != "json")
        usage_error("classify emits json only");
    const ResolvedModel model = resolve_model(f, /*rho_required=*/true);
    const double c = f.c.value_or(model.spec.x0);
    const MartingaleReport report =
        full_report(model.spec, model.scheme, c, QuadConfig{}, model.annotations);

    const bool inconclusive = report.martingale_on_compacts.answer == Verdict::Answer::Unknown ||
                              report.uniformly_integrable.answer == Verdict::Answer::Unknown ||
                              report.positive_finite_T.answer == Verdict::Answer::Unknown ||
                              report.positive_at_infinity.answer == Verdict::Answer::Unknown;
    if (inconclusive && f.strict) {
        std::cerr << "martcheck: inconclusive verdict in a deciding position (strict mode)\n";
        return kExitInconclusive;
    }
    emit(f, report_to_json_text(report));
    return inconclusive ? kExitInconclusive : kExitOk;
}

// ---- table ------------------------------------------------------------------

const char* limit_symbol(const IntegralVerdict& v, Boundary b, bool is_scale) {
    if (v.is_inconclusive()) return "??";
    if (b == Boundary::Lower && is_scale) return v.is_finite() ? ">-inf" : "-inf";
    return v.is_finite() ? "<+inf" : "+inf";
}

const char* finiteness_symbol(Finiteness fin, Boundary b, bool is_scale) {
    if (b == Boundary::Lower) {
        if (is_scale) return fin == Finiteness::Finite ? ">-inf" : "-inf";
        return fin == Finiteness::Finite ? "<+inf" : "+inf";
    }
    return fin == Finiteness::Finite ? "<+inf" : "+inf";
}

void append_row(std::string& out, const char* cells[6], double rho, const char* tag) {
    char line[160];
    std::snprintf(line, sizeof(line), "%6.2f  %-6s %7s %7s %7s %7s %7s %7s", rho, tag, cells[0],
                  cells[1], cells[2], cells[3], cells[4], cells[5]);
    out += line;
}

int run_table(const CommonFlags& f) {
    if (f.preset.empty()) usage_error("table requires --preset (the oracle is closed-form)");
    if (f.rhos_text.empty()) usage_error("table requires --rhos");
    const std::vector<double> rhos = parse_rho_list(f.rhos_text);

    ScottParams p;
    p.alpha = f.alpha.value_or(p.alpha);
    p.m = f.m.value_or(p.m);
    p.beta = f.beta.value_or(p.beta);
    p.x0 = f.x0.value_or(p.x0);
    const double c = f.c.value_or(p.x0);
    std::string scheme_name = f.preset == "scott-cholesky" ? "cholesky" : "wu-yor";
    if (f.preset != "scott-cholesky" && f.preset != "scott-wuyor")
        usage_error("unknown --preset '" + f.preset + "'");
    if (!f.scheme.empty()) scheme_name = f.scheme;

    std::string out;
    char head[256];
    std::snprintf(head, sizeof(head),
                  "scheme=%s alpha=%g m=%g beta=%g x0=%g c=%g\n"
                  "%6s  %-6s %7s %7s %7s %7s %7s %7s\n",
                  scheme_name.c_str(), p.alpha, p.m, p.beta, p.x0, c, "rho", "table", "s(lo)",
                  "s(hi)", "v(lo)", "v(hi)", "vb(lo)", "vb(hi)");
    out += head;

    bool any_mismatch = false;
    for (const double rho : rhos) {
        const CorrelationScheme scheme = make_scheme(scheme_name, rho);
        const BoundaryProfile numeric = boundary_profile(scott_spec(p), scheme, c, QuadConfig{},
                                                         tail_annotations(p, scheme));
        const AnalyticProfile oracle = analytic_profile(p, scheme);
        const std::vector<std::string> mismatches = profile_mismatches(oracle, numeric);

        const auto emit_measure = [&](const char* tag, const MeasureProfile& mp,
                                      const AnalyticMeasureProfile& ap) {
            const char* computed[6] = {
                limit_symbol(mp.s_lower, Boundary::Lower, true),
                limit_symbol(mp.s_upper, Boundary::Upper, true),
                limit_symbol(mp.v_lower, Boundary::Lower, false),
                limit_symbol(mp.v_upper, Boundary::Upper, false),
                limit_symbol(mp.vb_lower, Boundary::Lower, false),
                limit_symbol(mp.vb_upper, Boundary::Upper, false),
            };
            const char* expect[6] = {
                finiteness_symbol(ap.s_lower, Boundary::Lower, true),
                finiteness_symbol(ap.s_upper, Boundary::Upper, true),
                finiteness_symbol(ap.v_lower, Boundary::Lower, false),
                finiteness_symbol(ap.v_upper, Boundary::Upper, false),
                finiteness_symbol(ap.vb_lower, Boundary::Lower, false),
                finiteness_symbol(ap.vb_upper, Boundary::Upper, false),
            };
            append_row(out, computed, rho, tag);
            out += "   | oracle:";
            for (const char* e : expect) {
                out += ' ';
                out += e;
            }
            out += '\n';
        };
        emit_measure("Q", numeric.q, oracle.q);
        emit_measure("P", numeric.p, oracle.p);

        if (mismatches.empty()) {
            char line[64];
            std::snprintf(line, sizeof(line), "%6.2f  MATCH\n", rho);
            out += line;
        } else {
            any_mismatch = true;
            char line[64];
            std::snprintf(line, sizeof(line), "%6.2f  MISMATCH\n", rho);
            out += line;
            for (const std::string& m : mismatches) out += "        " + m + "\n";
        }
    }
    emit(f, out);
    return any_mismatch ? kExitMismatch : kExitOk;
}

// ---- simulate / sweep -------------------------------------------------------

SimConfig sim_config_from_flags(double T, int steps, long paths, std::uint64_t seed) {
    SimConfig cfg;
    cfg.T = T;
    cfg.n_steps = steps;
    cfg.n_paths = paths;
    cfg.seed = seed;
    cfg.n_threads = threads_from_env();
    return cfg;
}

std::string rows_to_json(const std::vector<SweepRow>& rows, int n_steps) {
    std::string out = "[\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const PathEstimate& e = rows[i].estimate;
        char line[320];
        std::snprintf(line, sizeof(line),
                      "  {\"rho\": %.17g, \"mean\": %.17g, \"std_error\": %.17g, "
                      "\"n_paths\": %ld, \"n_steps\": %d, \"absorbed_fraction\": %.17g, "
                      "\"max_S\": %.17g, \"unreliable\": %s}%s\n",
                      rows[i].rho, e.mean, e.std_error, e.n_paths, n_steps, e.absorbed_fraction,
                      e.max_S, e.unreliable ? "true" : "false",
                      i + 1 < rows.size() ? "," : "");
        out += line;
    }
    out += "]\n";
    return out;
}

ScottParams scott_from_flags(const CommonFlags& f) {
    ScottParams p;
    p.alpha = f.alpha.value_or(p.alpha);
    p.m = f.m.value_or(p.m);
    p.beta = f.beta.value_or(p.beta);
    p.x0 = f.x0.value_or(p.x0);
    return p;
}

CorrelationScheme::Kind scheme_kind_from_flags(const CommonFlags& f) {
    std::string name;
    if (f.preset == "scott-cholesky") name = "cholesky";
    else if (f.preset == "scott-wuyor") name = "wu-yor";
    else if (f.preset.empty()) usage_error("this command requires --preset");
    else usage_error("unknown --preset '" + f.preset + "'");
    if (!f.scheme.empty()) name = f.scheme;
    if (name == "cholesky") return CorrelationScheme::Kind::Cholesky;
    if (name == "wu-yor" || name == "wu_yor") return CorrelationScheme::Kind::WuYor;
    usage_error("unknown --scheme '" + name + "'");
}

int run_simulate(const CommonFlags& f, double T, int steps, long paths, std::uint64_t seed) {
    if (!f.rho_set) usage_error("simulate requires --rho");
    const ScottParams p = scott_from_flags(f);
    const CorrelationScheme::Kind kind = scheme_kind_from_flags(f);
    const SimConfig cfg = sim_config_from_flags(T, steps, paths, seed);
    PathEstimate est;
    try {
        est = kind == CorrelationScheme::Kind::Cholesky ? simulate_cholesky(p, f.rho, cfg)
                                                        : simulate_wu_yor(p, f.rho, cfg);
    } catch (const std::invalid_argument& e) {
        usage_error(e.what());
    }
    const std::vector<SweepRow> rows{SweepRow{f.rho, est}};
    if (f.format == "json") {
        emit(f, rows_to_json(rows, cfg.n_steps));
    } else if (f.format.empty() || f.format == "csv") {
        emit(f, sweep_csv(rows, cfg.n_steps));
    } else {
        usage_error("simulate emits csv or json");
    }
    return kExitOk;
}

int run_sweep(const CommonFlags& f, double T, int steps, long paths, std::uint64_t seed) {
    if (f.rhos_text.empty()) usage_error("sweep requires --rhos");
    const std::vector<double> rhos = parse_rho_list(f.rhos_text);
    const ScottParams p = scott_from_flags(f);
    const CorrelationScheme::Kind kind = scheme_kind_from_flags(f);
    const SimConfig cfg = sim_config_from_flags(T, steps, paths, seed);
    std::vector<SweepRow> rows;
    try {
        rows = sweep_rho(p, kind, rhos, cfg);
    } catch (const std::invalid_argument& e) {
        usage_error(e.what());
    }
    if (f.format == "json") {
        emit(f, rows_to_json(rows, cfg.n_steps));
    } else if (f.format.empty() || f.format == "csv") {
        emit(f, sweep_csv(rows, cfg.n_steps));
    } else {
        usage_error("sweep emits csv or json");
    }
    return kExitOk;
}

// ---- parse-check ------------------------------------------------------------

int run_parse_check(const std::string& text) {
    try {
        const ExprPtr e = parse_expr(text);
        std::cout << print_expr(*e) << "\n";
        return kExitOk;
    } catch (const SyntaxError& err) {
        std::cerr << err.what() << "\n";
        return kExitUsage;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"boundary classification and simulation for correlated "
                 "exponential-volatility models"};
    app.require_subcommand(1);

    CommonFlags cf, tf, sf, wf;
    double sim_T = 1.0, sweep_T = 1.0;
    int sim_steps = 100, sweep_steps = 100;
    long sim_paths = 10000, sweep_paths = 10000;
    std::uint64_t sim_seed = 1, sweep_seed_v = 1;
    std::string parse_text;

    CLI::App* classify = app.add_subcommand("classify", "full martingale report as JSON");
    add_model_flags(classify, cf, true, false);

    CLI::App* table = app.add_subcommand("table", "verdict table against the closed-form oracle");
    add_model_flags(table, tf, false, true);

    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of E[S_T]");
    add_model_flags(simulate, sf, true, false);
    simulate->add_option("--T", sim_T, "horizon");
    simulate->add_option("--steps", sim_steps, "time steps");
    simulate->add_option("--paths", sim_paths, "path count");
    simulate->add_option("--seed", sim_seed, "RNG seed");

    CLI::App* sweep = app.add_subcommand("sweep", "Monte Carlo sweep over --rhos");
    add_model_flags(sweep, wf, false, true);
    sweep->add_option("--T", sweep_T, "horizon");
    sweep->add_option("--steps", sweep_steps, "time steps");
    sweep->add_option("--paths", sweep_paths, "path count");
    sweep->add_option("--seed", sweep_seed_v, "RNG seed");

    CLI::App* parse_check = app.add_subcommand("parse-check", "parse and normalize an expression");
    parse_check->add_option("expression", parse_text, "expression text")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "martcheck: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (classify->parsed()) return run_classify(cf);
        if (table->parsed()) return run_table(tf);
        if (simulate->parsed()) return run_simulate(sf, sim_T, sim_steps, sim_paths, sim_seed);
        if (sweep->parsed()) return run_sweep(wf, sweep_T, sweep_steps, sweep_paths, sweep_seed_v);
        if (parse_check->parsed()) return run_parse_check(parse_text);
    } catch (const QuadratureFailure& e) {
        std::cerr << "martcheck: numerical failure: " << e.what() << "\n";
        return kExitInconclusive;
    } catch (const std::exception& e) {
        std::cerr << "martcheck: " << e.what() << "\n";
        return kExitUsage;
    }
    usage_error("no subcommand given");
}
