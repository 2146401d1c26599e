#include "rfl/path.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rfl {

namespace {

std::size_t steps_for(double tau, double dt)
{
    if (!(dt > 0.0) || !(tau > 0.0)) throw std::invalid_argument("dt and tau must be positive");
    const double ratio = tau / dt;
    const double r = std::round(ratio);
    if (std::abs(ratio - r) > 1e-9 * r || r < 100.0) {
        std::ostringstream msg;
        msg << "tau/dt = " << ratio << " must be an integer >= 100";
        throw std::invalid_argument(msg.str());
    }
    return static_cast<std::size_t>(r);
}

}  // namespace

ObservationPath::ObservationPath(double dt, double tau, std::vector<double> y, std::vector<double> x,
                                 std::vector<double> w)
    : dt_(dt), tau_(tau), steps_per_block_(steps_for(tau, dt)), y_(std::move(y)), x_(std::move(x)),
      w_(std::move(w))
{
    if (y_.size() < 2) throw std::invalid_argument("observation path needs at least one step");
    if (y_.front() != 0.0) throw std::invalid_argument("observation path must start at Y=0");
    if ((y_.size() - 1) % steps_per_block_ != 0)
        throw std::invalid_argument("observation path length is not a whole number of blocks");
    if (!x_.empty() && x_.size() != y_.size()) throw std::invalid_argument("x-values length mismatch");
    if (!w_.empty() && w_.size() != y_.size()) throw std::invalid_argument("w-values length mismatch");
    for (auto* v : {&y_, &x_, &w_})
        for (std::size_t i = 0; i < v->size(); ++i)
            if (!std::isfinite((*v)[i])) throw std::invalid_argument("non-finite entry at index " + std::to_string(i));
}

std::vector<double> ObservationPath::block_increments(std::size_t k) const
{
    if (k < 1 || k > blocks()) throw std::out_of_range("block " + std::to_string(k) + " outside 1.." + std::to_string(blocks()));
    const std::size_t n = steps_per_block_;
    const std::size_t base = (k - 1) * n;
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = y_[base + i + 1] - y_[base + i];
    return d;
}

ObservationPath simulate_paths(const ModelConfig& model, double horizon, std::uint64_t seed, NoiseSwitch noise)
{
    if (model.steps_per_block < 100) throw std::invalid_argument("steps_per_block must be >= 100");
    const double tau = model.tau;
    const double blocks_real = horizon / tau;
    const double nb = std::round(blocks_real);
    if (!(horizon > 0.0) || std::abs(blocks_real - nb) > 1e-9 * nb) {
        std::ostringstream msg;
        msg << "horizon " << horizon << " is not a positive multiple of the block length tau=" << tau;
        throw std::invalid_argument(msg.str());
    }
    model.drift.validate();
    const auto blocks = static_cast<std::size_t>(nb);
    const auto n = static_cast<std::size_t>(model.steps_per_block);
    const double dt = tau / static_cast<double>(n);
    const double sq = std::sqrt(dt);

    std::vector<double> x(blocks * n + 1), y(blocks * n + 1), w(blocks * n + 1);
    x[0] = model.x0;
    std::normal_distribution<double> normal;
    for (std::size_t k = 0; k < blocks; ++k) {
        Stream sv = make_stream(seed, k + 1, 0);
        Stream sw = make_stream(seed, k + 1, 1);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = k * n + i;
            const double dv = noise.signal ? sq * normal(sv) : 0.0;
            const double dw = noise.observation ? sq * normal(sw) : 0.0;
            x[j + 1] = x[j] + model.drift.f(x[j]) * dt + dv;
            y[j + 1] = y[j] + model.h * x[j] * dt + dw;
            w[j + 1] = w[j] + dw;
            if (!std::isfinite(x[j + 1]) || !std::isfinite(y[j + 1]))
                throw std::runtime_error("non-finite state at Euler step " + std::to_string(j + 1));
        }
    }
    return ObservationPath(dt, tau, std::move(y), std::move(x), std::move(w));
}

void fill_standard_bridge(Stream& rng, std::span<double> out)
{
    const std::size_t n = out.size() - 1;
    const double ds = 1.0 / static_cast<double>(n);
    const double sq = std::sqrt(ds);
    std::normal_distribution<double> normal;
    out[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) out[i] = out[i - 1] + sq * normal(rng);
    const double end = out[n];
    for (std::size_t i = 1; i < n; ++i) out[i] -= static_cast<double>(i) * ds * end;
    out[n] = 0.0;
}

BridgeSample sample_bridge(double x, double z, double tau, int n_steps, std::uint64_t seed, bool noise)
{
    if (n_steps < 2) throw std::invalid_argument("sample_bridge needs n_steps >= 2");
    if (!(tau > 0.0)) throw std::invalid_argument("sample_bridge needs tau > 0");
    BridgeSample b{x, z, tau, std::vector<double>(static_cast<std::size_t>(n_steps) + 1, 0.0)};
    if (noise) {
        Stream rng = make_stream(seed, 0, 0);
        fill_standard_bridge(rng, b.values);
    }
    const double scale = std::sqrt(tau);
    for (int i = 0; i <= n_steps; ++i) {
        const double s = static_cast<double>(i) / n_steps;
        b.values[i] = x * (1.0 - s) + z * s + scale * b.values[i];
    }
    b.values.front() = x;
    b.values.back() = z;
    return b;
}

double stieltjes_integral(const ObservationPath& path, std::size_t block, std::span<const double> phi)
{
    const auto d = path.block_increments(block);
    if (phi.size() != d.size() && phi.size() != d.size() + 1)
        throw std::invalid_argument("integrand must be sampled at the block grid");
    std::vector<double> terms(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!std::isfinite(phi[i])) throw std::invalid_argument("non-finite integrand");
        terms[i] = phi[i] * d[i];
    }
    return pairwise_sum(terms);
}

double stieltjes_integral(const ObservationPath& path, std::size_t block, const std::function<double(double)>& phi)
{
    const std::size_t n = path.steps_per_block();
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = phi(static_cast<double>(i) / static_cast<double>(n));
    return stieltjes_integral(path, block, std::span<const double>(v));
}

double sinh_kernel(double theta, double s)
{
    return (std::exp(theta * (s - 1.0)) - std::exp(-theta * (s + 1.0))) / (2.0 * theta);
}

ObservationPath extract_block(const ObservationPath& path, std::size_t k)
{
    if (k < 1 || k > path.blocks()) throw std::out_of_range("block " + std::to_string(k) + " outside 1.." + std::to_string(path.blocks()));
    const std::size_t n = path.steps_per_block();
    const std::size_t base = (k - 1) * n;
    auto slice = [&](std::span<const double> v, bool rebase) {
        std::vector<double> out;
        if (v.empty()) return out;
        out.assign(v.begin() + base, v.begin() + base + n + 1);
        if (rebase) {
            const double first = out.front();
            for (double& e : out) e -= first;
        }
        return out;
    };
    return ObservationPath(path.dt(), path.tau(), slice(path.y(), true), slice(path.x(), false),
                           slice(path.w(), true));
}

void write_path_csv(const ObservationPath& path, std::ostream& out)
{
    out << "t,y";
    if (path.has_x()) out << ",x";
    if (path.has_w()) out << ",w";
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < path.size(); ++i) {
        const long long us = std::llround(path.time(i) * 1e6);
        std::snprintf(buf, sizeof buf, "%lld.%06lld", us / 1000000, us % 1000000);
        out << buf;
        std::snprintf(buf, sizeof buf, ",%.17g", path.y()[i]);
        out << buf;
        if (path.has_x()) {
            std::snprintf(buf, sizeof buf, ",%.17g", path.x()[i]);
            out << buf;
        }
        if (path.has_w()) {
            std::snprintf(buf, sizeof buf, ",%.17g", path.w()[i]);
            out << buf;
        }
        out << '\n';
    }
}

ObservationPath read_path_csv(std::istream& in, double tau)
{
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty path csv");
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    if (cols.size() < 2 || cols[0] != "t" || cols[1] != "y") throw std::runtime_error("path csv header must start with t,y");
    std::vector<long long> t_us;
    std::vector<double> y, x, w;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ss, cell, ',')) {
            if (c == 0) {
                const auto dot = cell.find('.');
                const long long whole = std::stoll(cell.substr(0, dot));
                const long long frac = dot == std::string::npos ? 0 : std::stoll(cell.substr(dot + 1));
                t_us.push_back(whole * 1000000 + frac);
            } else {
                const double v = std::strtod(cell.c_str(), nullptr);
                if (cols[c] == "y") y.push_back(v);
                else if (cols[c] == "x") x.push_back(v);
                else if (cols[c] == "w") w.push_back(v);
            }
            ++c;
        }
    }
    if (y.size() < 2) throw std::runtime_error("path csv has fewer than two rows");
    const double approx_dt = static_cast<double>(t_us.back()) * 1e-6 / static_cast<double>(y.size() - 1);
    const double steps = std::round(tau / approx_dt);
    return ObservationPath(tau / steps, tau, std::move(y), std::move(x), std::move(w));
}

}  // namespace rfl
