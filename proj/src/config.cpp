#include "rfl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rfl {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v)
{
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    std::stringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(to_double(key, trim(item)));
    return out;
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value)
{
    const auto& v = value;
    if (key == "model.h") model.h = to_double(key, v);
    else if (key == "model.tau") model.tau = to_double(key, v);
    else if (key == "model.drift") {
        try {
            model.drift = parse_drift_family(v);
        } catch (const std::exception& e) {
            throw ConfigError(key + ": " + e.what());
        }
    }
    else if (key == "model.M") model.M = to_double(key, v);
    else if (key == "model.x0") model.x0 = to_double(key, v);
    else if (key == "model.steps_per_block") model.steps_per_block = to_int<int>(key, v);
    else if (key == "truncation.delta") truncation.delta = to_double(key, v);
    else if (key == "truncation.delta_sweep") truncation.delta_sweep = to_list(key, v);
    else if (key == "truncation.iota") truncation.iota = to_double(key, v);
    else if (key == "truncation.L") truncation.L = to_double(key, v);
    else if (key == "truncation.C") truncation.C = to_double(key, v);
    else if (key == "truncation.C1prime") truncation.C1prime = to_double(key, v);
    else if (key == "truncation.nu") truncation.nu = to_double(key, v);
    else if (key == "truncation.nu_epsilon") truncation.nu_epsilon = to_double(key, v);
    else if (key == "truncation.force") truncation.force = to_bool(key, v);
    else if (key == "run.blocks") run.blocks = to_int<std::size_t>(key, v);
    else if (key == "run.seeds") run.seeds = to_int<std::size_t>(key, v);
    else if (key == "run.seed") run.seed = to_int<std::uint64_t>(key, v);
    else if (key == "run.grid_points") run.grid_points = to_int<std::size_t>(key, v);
    else if (key == "run.padding_sd") run.padding_sd = to_double(key, v);
    else if (key == "run.particles") run.particles = to_int<std::size_t>(key, v);
    else if (key == "run.mc_samples") run.mc_samples = to_int<std::size_t>(key, v);
    else if (key == "run.bridge_steps") run.bridge_steps = to_int<int>(key, v);
    else if (key == "run.kernel_samples") run.kernel_samples = to_int<std::size_t>(key, v);
    else if (key == "run.kernel_bridge_steps") run.kernel_bridge_steps = to_int<int>(key, v);
    else if (key == "run.burn_in") run.burn_in = to_int<std::size_t>(key, v);
    else if (key == "run.prior_mean") run.prior_mean = to_double(key, v);
    else if (key == "run.prior_sd") run.prior_sd = to_double(key, v);
    else if (key == "run.alt_prior_mean") run.alt_prior_mean = to_double(key, v);
    else if (key == "run.alt_prior_sd") run.alt_prior_sd = to_double(key, v);
    else if (key == "run.pair_grid") run.pair_grid = to_int<std::size_t>(key, v);
    else if (key == "output.dir") output.dir = v;
    else throw ConfigError("unknown configuration key '" + key + "'");
}

ExperimentConfig ExperimentConfig::parse(const std::string& text)
{
    ExperimentConfig cfg;
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'section.key = value'");
        const auto key = trim(line.substr(0, eq));
        if (key.find('.') == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' has no section");
        cfg.set(key, trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void ExperimentConfig::validate() const
{
    if (!(model.h > 0.0)) throw ConfigError("model.h must be positive");
    if (!(model.tau > 0.0)) throw ConfigError("model.tau must be positive");
    if (!(model.M >= 0.0)) throw ConfigError("model.M must be nonnegative");
    if (model.drift == DriftFamily::zero && model.M != 0.0) throw ConfigError("model.drift = zero requires model.M = 0");
    if (model.drift == DriftFamily::tabulated) throw ConfigError("model.drift = tabulated is not available from a config file");
    if (model.steps_per_block < 100) throw ConfigError("model.steps_per_block must be at least 100");
    if (!(truncation.delta > 0.0)) throw ConfigError("truncation.delta must be positive");
    for (std::size_t i = 1; i < truncation.delta_sweep.size(); ++i)
        if (!(truncation.delta_sweep[i] > truncation.delta_sweep[i - 1]))
            throw ConfigError("truncation.delta_sweep must be increasing");
    if (!(truncation.C > 0.0) || !(truncation.C1prime > 0.0)) throw ConfigError("truncation constants must be positive");
    if (!(truncation.nu_epsilon > 0.0 && truncation.nu_epsilon < 1.0))
        throw ConfigError("truncation.nu_epsilon must lie in (0, 1)");
    if (run.blocks < 1) throw ConfigError("run.blocks must be at least 1");
    if (run.seeds < 1) throw ConfigError("run.seeds must be at least 1");
    if (run.grid_points < 2) throw ConfigError("run.grid_points must be at least 2");
    if (!(run.prior_sd > 0.0) || !(run.alt_prior_sd > 0.0)) throw ConfigError("prior standard deviations must be positive");
}

std::string ExperimentConfig::echo() const
{
    std::ostringstream o;
    o << "model.h = " << num(model.h) << "\n"
      << "model.tau = " << num(model.tau) << "\n"
      << "model.drift = " << to_string(model.drift) << "\n"
      << "model.M = " << num(model.M) << "\n"
      << "model.x0 = " << num(model.x0) << "\n"
      << "model.steps_per_block = " << model.steps_per_block << "\n"
      << "truncation.delta = " << num(truncation.delta) << "\n"
      << "truncation.delta_sweep = ";
    for (std::size_t i = 0; i < truncation.delta_sweep.size(); ++i)
        o << (i ? ", " : "") << num(truncation.delta_sweep[i]);
    o << "\n"
      << "truncation.iota = " << num(truncation.iota) << "\n"
      << "truncation.L = " << num(truncation.L) << "\n"
      << "truncation.C = " << num(truncation.C) << "\n"
      << "truncation.C1prime = " << num(truncation.C1prime) << "\n"
      << "truncation.nu = " << num(truncation.nu) << "\n"
      << "truncation.nu_epsilon = " << num(truncation.nu_epsilon) << "\n"
      << "truncation.force = " << (truncation.force ? "true" : "false") << "\n"
      << "run.blocks = " << run.blocks << "\n"
      << "run.seeds = " << run.seeds << "\n"
      << "run.seed = " << run.seed << "\n"
      << "run.grid_points = " << run.grid_points << "\n"
      << "run.padding_sd = " << num(run.padding_sd) << "\n"
      << "run.particles = " << run.particles << "\n"
      << "run.mc_samples = " << run.mc_samples << "\n"
      << "run.bridge_steps = " << run.bridge_steps << "\n"
      << "run.kernel_samples = " << run.kernel_samples << "\n"
      << "run.kernel_bridge_steps = " << run.kernel_bridge_steps << "\n"
      << "run.burn_in = " << run.burn_in << "\n"
      << "run.prior_mean = " << num(run.prior_mean) << "\n"
      << "run.prior_sd = " << num(run.prior_sd) << "\n"
      << "run.alt_prior_mean = " << num(run.alt_prior_mean) << "\n"
      << "run.alt_prior_sd = " << num(run.alt_prior_sd) << "\n"
      << "run.pair_grid = " << run.pair_grid << "\n"
      << "output.dir = " << output.dir.string() << "\n";
    return o.str();
}

std::vector<std::uint64_t> ExperimentConfig::seed_list() const
{
    std::vector<std::uint64_t> out(run.seeds);
    for (std::size_t i = 0; i < run.seeds; ++i) out[i] = run.seed + i;
    return out;
}

}  // namespace rfl
