#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "rfl/config.hpp"
#include "rfl/experiments.hpp"
#include "rfl/filter.hpp"
#include "rfl/truncation.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args)
{
    cmd->add_option("--config", args.config, "flat section.key = value file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "base seed (overrides run.seed)");
    cmd->add_option("--out", args.out, "output directory (overrides output.dir)");
    cmd->add_option("--set", args.overrides, "extra section.key=value override, repeatable");
}

rfl::ExperimentConfig resolve(const CommonArgs& args)
{
    auto cfg = args.config.empty() ? rfl::ExperimentConfig{} : rfl::ExperimentConfig::load(args.config);
    for (const auto& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw rfl::ConfigError("--set expects key=value, got '" + kv + "'");
        auto key = kv.substr(0, eq), value = kv.substr(eq + 1);
        cfg.set(key, value);
    }
    if (args.seed) cfg.run.seed = *args.seed;
    if (!args.out.empty()) cfg.output.dir = args.out;
    cfg.validate();
    return cfg;
}

std::ofstream open_output(const rfl::ExperimentConfig& cfg, const std::string& name)
{
    fs::create_directories(cfg.output.dir);
    std::ofstream out(cfg.output.dir / name);
    if (!out) throw std::runtime_error("cannot write " + (cfg.output.dir / name).string());
    return out;
}

void echo_config(const rfl::ExperimentConfig& cfg) { open_output(cfg, "config.txt") << cfg.echo(); }

int cmd_simulate(const rfl::ExperimentConfig& cfg)
{
    const auto path = rfl::simulate_paths(rfl::model_config(cfg), cfg.model.tau * static_cast<double>(cfg.run.blocks),
                                          cfg.run.seed);
    auto out = open_output(cfg, "path.csv");
    rfl::write_path_csv(path, out);
    return 0;
}

int cmd_coeffs(const rfl::ExperimentConfig& cfg)
{
    const auto run = rfl::simulate_run(cfg, cfg.run.seed, cfg.run.blocks);
    const auto geo = rfl::truncation_geometry(run.coeffs, rfl::truncation_params(cfg, cfg.truncation.delta),
                                              cfg.run.prior_mean);
    auto out = open_output(cfg, "coeffs.csv");
    rfl::write_coefficients_csv(run.coeffs, geo, out);
    const auto rep = rfl::validate_hypotheses(geo.shape(), geo.params(), geo.center(0));
    auto hyp = open_output(cfg, "hypotheses.csv");
    hyp << "check,margin,pass\n";
    for (const auto& c : rep.checks) hyp << '"' << c.name << "\"," << c.margin << "," << c.pass << "\n";
    return 0;
}

int cmd_filter(const rfl::ExperimentConfig& cfg, bool truncated)
{
    const auto run = rfl::simulate_run(cfg, cfg.run.seed, cfg.run.blocks);
    const auto geo = rfl::truncation_geometry(run.coeffs, rfl::truncation_params(cfg, cfg.truncation.delta),
                                              cfg.run.prior_mean);
    const auto grid = rfl::covering_grid(geo, cfg.run.grid_points, cfg.run.padding_sd * std::sqrt(cfg.model.tau));
    const auto prior = rfl::gaussian_on_grid(grid, cfg.run.prior_mean, cfg.run.prior_sd);
    const auto log_q = rfl::log_transition_kernel(grid, rfl::grid_transition(cfg), rfl::KernelScale::density,
                                                  cfg.run.seed);
    std::vector<rfl::GridMeasure> post;
    if (truncated) {
        const auto rep = rfl::validate_hypotheses(geo.shape(), geo.params(), geo.center(0));
        if (!rep.all_pass() && !cfg.truncation.force) {
            std::cerr << "hypotheses fail: " << rep.failures() << "(use --force)\n";
            return 1;
        }
        post = rfl::run_truncated_filter(prior, geo, run.coeffs, log_q);
    } else {
        post = rfl::run_filter(prior, run.coeffs, log_q);
    }
    auto out = open_output(cfg, truncated ? "filter_truncated.csv" : "filter.csv");
    rfl::write_filter_csv(post, out);
    return 0;
}

int cmd_stability(const rfl::ExperimentConfig& cfg)
{
    const auto res = rfl::run_stability(cfg);
    auto out = open_output(cfg, "stability.csv");
    rfl::write_distance_csv(res.rows, out);
    auto lout = open_output(cfg, "stability_log.csv");
    rfl::write_log_distance_csv(res.rows, lout);
    auto tout = open_output(cfg, "stability_truncated.csv");
    rfl::write_distance_csv(res.truncated_rows, tout);
    auto sout = open_output(cfg, "stability_slopes.csv");
    sout << "seed,slope\n";
    const auto seeds = cfg.seed_list();
    for (std::size_t i = 0; i < seeds.size(); ++i) sout << seeds[i] << "," << res.slopes[i] << "\n";
    std::printf("median slope %.4g, median log TV first %.4g final %.4g, Hilbert non-increasing %s, Delta_n %.4g%s\n",
                res.median_slope, res.median_log_first_tv, res.median_log_final_tv, res.hilbert_nonincreasing ? "yes" : "no",
                res.delta_n, res.truncated_ran ? "" : " (truncated pair skipped: hypotheses fail)");
    return 0;
}

int cmd_sweep(const rfl::ExperimentConfig& cfg)
{
    const auto res = rfl::run_truncation_sweep(cfg);
    auto out = open_output(cfg, "sweep.csv");
    rfl::write_sweep_csv(res, out);
    auto eout = open_output(cfg, "escape.csv");
    rfl::write_escape_csv(res.escape, eout);
    std::printf("log(sup TV) vs Delta^2/h: slope %.4g, R^2 %.3f\n", res.fit.slope, res.fit.r2);
    return 0;
}

int cmd_verify(const rfl::ExperimentConfig& cfg, const std::string& suite)
{
    const auto rep = rfl::verify(suite, cfg);
    auto out = open_output(cfg, "verify_" + suite + ".csv");
    rep.write_csv(out);
    rep.write_csv(std::cout);
    return rep.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"rflab: robust filtering experiments"};
    app.require_subcommand(1);
    CommonArgs args;
    bool truncated = false;
    std::string suite;

    auto* simulate = app.add_subcommand("simulate", "simulate signal and observation paths");
    auto* coeffs = app.add_subcommand("coeffs", "per-block likelihood coefficients and compacts");
    auto* filter = app.add_subcommand("filter", "grid filter posteriors");
    filter->add_flag("--truncated", truncated, "run the truncated filter");
    auto* stability = app.add_subcommand("stability", "two-prior forgetting experiment");
    auto* sweep = app.add_subcommand("sweep", "truncation-level sweep");
    auto* verify = app.add_subcommand("verify", "run a verification suite");
    verify->add_option("--suite", suite, "suite name")->required()->check(CLI::IsMember(rfl::verify_suites()));
    bool force = false;
    for (auto* cmd : {simulate, coeffs, filter, stability, sweep, verify}) {
        add_common(cmd, args);
        cmd->add_flag("--force", force, "run even when the truncation hypotheses fail");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    rfl::ExperimentConfig cfg;
    try {
        cfg = resolve(args);
        if (force) cfg.truncation.force = true;
        echo_config(cfg);
    } catch (const rfl::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*simulate) return cmd_simulate(cfg);
        if (*coeffs) return cmd_coeffs(cfg);
        if (*filter) return cmd_filter(cfg, truncated);
        if (*stability) return cmd_stability(cfg);
        if (*sweep) return cmd_sweep(cfg);
        if (*verify) return cmd_verify(cfg, suite);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
