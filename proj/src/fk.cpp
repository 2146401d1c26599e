#include "rfl/fk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rfl/numerics.hpp"

namespace rfl {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

Eigen::Index pair_index(std::size_t i1, std::size_t i2, std::size_t g)
{
    return static_cast<Eigen::Index>(i1 * g + i2);
}

std::vector<double> normalized(const Eigen::VectorXd& v)
{
    const double total = v.sum();
    if (!(total > 0.0) || !std::isfinite(total)) throw std::runtime_error("vector has no finite positive mass");
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v(i) / total;
    return out;
}

}  // namespace

void PairModel::validate() const
{
    const auto g = grid.size();
    if (g < 2) throw std::invalid_argument("pair grid needs at least two points");
    if (g > max_pair_grid)
        throw std::invalid_argument("pair grid of " + std::to_string(g) + " points exceeds the limit of "
                                    + std::to_string(max_pair_grid));
    if (q.rows() != static_cast<Eigen::Index>(g) || q.cols() != static_cast<Eigen::Index>(g))
        throw std::invalid_argument("signal kernel and grid sizes differ");
    if (geometry == nullptr) throw std::invalid_argument("pair model has no truncation geometry");
    if (coeffs.size() > geometry->blocks()) throw std::invalid_argument("more blocks than the geometry covers");
}

Eigen::MatrixXd PairModel::psi(std::size_t k) const
{
    if (k < 1 || k > coeffs.size()) throw std::out_of_range("block " + std::to_string(k) + " has no coefficients");
    const auto g = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd lp(g, g);
    for (Eigen::Index i = 0; i < g; ++i)
        for (Eigen::Index j = 0; j < g; ++j)
            lp(i, j) = psi_hat_eval(coeffs[k - 1], grid[static_cast<std::size_t>(i)], grid[static_cast<std::size_t>(j)],
                                    PsiMode::relative);
    return (lp.array() - lp.maxCoeff()).exp().matrix();
}

Eigen::MatrixXd linear_kernel(const Eigen::MatrixXd& log_kernel) { return log_kernel.array().exp().matrix(); }

Eigen::MatrixXd one_step_kernel(const PairModel& model, std::size_t k)
{
    model.validate();
    const auto& geo = *model.geometry;
    const auto g = model.size();
    const Eigen::MatrixXd psi = model.psi(k);
    const double flat = std::exp(geo.xi(k).log_xi1) * model.spacing();
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g));
    for (std::size_t i = 0; i < g; ++i) {
        const bool inside = geo.contains(k - 1, model.grid[i]);
        for (std::size_t j = 0; j < g; ++j) {
            if (!geo.contains(k, model.grid[j])) continue;
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
            r(ii, jj) = psi(ii, jj) * (inside ? model.q(ii, jj) : flat);
        }
    }
    return r;
}

Eigen::MatrixXd two_step_kernel(const PairModel& model, std::size_t k, PairForm form, bool unit_potential)
{
    model.validate();
    if (k < 2) throw std::invalid_argument("pair kernel needs k >= 2");
    const auto& geo = *model.geometry;
    const auto g = model.size();
    const auto n = static_cast<Eigen::Index>(g * g);
    const double dx = model.spacing();
    const double flat = std::exp(geo.xi(k - 1).log_xi1) * dx;
    Eigen::MatrixXd psi_k;
    if (!unit_potential) psi_k = model.psi(k);
    // target weight of (z1, z2), common to every source row
    Eigen::MatrixXd target = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g));
    for (std::size_t a = 0; a < g; ++a) {
        if (!geo.contains(k - 1, model.grid[a])) continue;
        for (std::size_t b = 0; b < g; ++b) {
            const auto aa = static_cast<Eigen::Index>(a), bb = static_cast<Eigen::Index>(b);
            if (unit_potential)
                target(aa, bb) = 1.0;
            else if (geo.contains(k, model.grid[b]))
                target(aa, bb) = psi_k(aa, bb);
        }
    }
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t x1 = 0; x1 < g; ++x1)
        for (std::size_t x2 = 0; x2 < g; ++x2) {
            const bool inside = geo.contains(k - 2, model.grid[x2]);
            const auto row = pair_index(x1, x2, g);
            for (std::size_t z1 = 0; z1 < g; ++z1)
                for (std::size_t z2 = 0; z2 < g; ++z2) {
                    const auto a = static_cast<Eigen::Index>(z1), b = static_cast<Eigen::Index>(z2);
                    const double w = target(a, b);
                    if (w == 0.0) continue;
                    double move;
                    if (inside)
                        move = model.q(static_cast<Eigen::Index>(x2), a) * model.q(a, b);
                    else if (form == PairForm::chained)
                        move = flat * model.q(a, b);
                    else
                        move = flat * dx;
                    r(row, pair_index(z1, z2, g)) = w * move;
                }
        }
    return r;
}

Eigen::VectorXd lambda_measure(const PairModel& model, std::size_t k, PairForm form)
{
    model.validate();
    const auto& geo = *model.geometry;
    const auto g = model.size();
    const double dx = model.spacing();
    const Eigen::MatrixXd psi_k = model.psi(k);
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g * g));
    for (std::size_t z1 = 0; z1 < g; ++z1) {
        if (!geo.contains(k - 1, model.grid[z1])) continue;
        for (std::size_t z2 = 0; z2 < g; ++z2) {
            if (!geo.contains(k, model.grid[z2])) continue;
            const auto a = static_cast<Eigen::Index>(z1), b = static_cast<Eigen::Index>(z2);
            const double second = form == PairForm::chained ? model.q(a, b) : dx;
            lam(pair_index(z1, z2, g)) = psi_k(a, b) * dx * second;
        }
    }
    return lam;
}

SandwichReport mixing_sandwich_check(const PairModel& model, std::size_t k, PairForm form, double slack)
{
    const Eigen::MatrixXd r = two_step_kernel(model, k, form);
    const Eigen::VectorXd lam = lambda_measure(model, k, form);
    const auto xi = model.geometry->xi(k - 1);
    const double xi1 = std::exp(xi.log_xi1), xi2 = std::exp(xi.log_xi2);
    SandwichReport rep;
    rep.worst_lower = neg_inf;
    rep.worst_upper = neg_inf;
    for (Eigen::Index i = 0; i < r.rows(); ++i)
        for (Eigen::Index j = 0; j < r.cols(); ++j) {
            const double l = lam(j);
            if (l == 0.0) {
                if (r(i, j) != 0.0) rep.worst_upper = std::numeric_limits<double>::infinity();
                continue;
            }
            rep.worst_lower = std::max(rep.worst_lower, (xi1 * l - r(i, j)) / (xi1 * l));
            rep.worst_upper = std::max(rep.worst_upper, (r(i, j) - xi2 * l) / (xi2 * l));
        }
    rep.pass = rep.worst_lower <= slack && rep.worst_upper <= slack;
    return rep;
}

std::vector<Eigen::VectorXd> backward_potentials(const std::vector<Eigen::MatrixXd>& kernels)
{
    if (kernels.empty()) throw std::invalid_argument("backward_potentials needs at least one kernel");
    const auto m = kernels.size();
    std::vector<Eigen::VectorXd> pot(m + 1);
    pot[m] = Eigen::VectorXd::Ones(kernels.back().cols());
    for (std::size_t j = m; j-- > 0;) pot[j] = kernels[j] * pot[j + 1];
    return pot;
}

std::vector<Eigen::MatrixXd> s_kernels(const std::vector<Eigen::MatrixXd>& kernels,
                                       const std::vector<Eigen::VectorXd>& potentials)
{
    if (potentials.size() != kernels.size() + 1) throw std::invalid_argument("need one more potential than kernels");
    std::vector<Eigen::MatrixXd> s;
    s.reserve(kernels.size());
    for (std::size_t j = 0; j < kernels.size(); ++j) {
        const auto& from = potentials[j];
        for (Eigen::Index i = 0; i < from.size(); ++i)
            if (!(from(i) > 0.0) || !std::isfinite(from(i)))
                throw std::runtime_error("potential " + std::to_string(j) + " vanishes at pair state "
                                         + std::to_string(i));
        s.push_back(from.cwiseInverse().asDiagonal() * kernels[j] * potentials[j + 1].asDiagonal());
    }
    return s;
}

double first_coordinate_spread(const Eigen::VectorXd& v, std::size_t g)
{
    double worst = 0.0;
    for (std::size_t x2 = 0; x2 < g; ++x2) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (std::size_t x1 = 0; x1 < g; ++x1) {
            const double val = v(pair_index(x1, x2, g));
            lo = std::min(lo, val);
            hi = std::max(hi, val);
        }
        if (hi > 0.0) worst = std::max(worst, (hi - lo) / hi);
    }
    return worst;
}

double dobrushin(const Eigen::MatrixXd& kernel, const std::vector<bool>& rows)
{
    if (!rows.empty() && rows.size() != static_cast<std::size_t>(kernel.rows()))
        throw std::invalid_argument("row mask size differs from the kernel");
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < kernel.rows(); ++i)
        if (rows.empty() || rows[static_cast<std::size_t>(i)]) active.push_back(i);
    double worst = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t b = a + 1; b < active.size(); ++b)
            worst = std::max(worst, 0.5 * (kernel.row(active[a]) - kernel.row(active[b])).cwiseAbs().sum());
    return worst;
}

UChainKernel u_chain_kernel(const Eigen::MatrixXd& s_prev, const Eigen::MatrixXd& s_next, std::size_t g)
{
    const auto n = static_cast<Eigen::Index>(g * g);
    if (s_prev.rows() != n || s_next.rows() != n) throw std::invalid_argument("S kernels do not match the grid");
    // mass of S_{2m|2j}((z1, b), (c, .)) summed over the last coordinate
    Eigen::MatrixXd onward = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(g));
    for (Eigen::Index row = 0; row < n; ++row)
        for (std::size_t c = 0; c < g; ++c)
            for (std::size_t d = 0; d < g; ++d) onward(row, static_cast<Eigen::Index>(c)) += s_next(row, pair_index(c, d, g));

    UChainKernel u{Eigen::MatrixXd::Zero(n, n), std::vector<bool>(static_cast<std::size_t>(n), false)};
    for (std::size_t a = 0; a < g; ++a) {
        // S_{2m|2j-2} does not depend on the first source coordinate
        const auto src = pair_index(0, a, g);
        for (std::size_t z1 = 0; z1 < g; ++z1) {
            double denom = 0.0;
            for (std::size_t b = 0; b < g; ++b) denom += s_prev(src, pair_index(z1, b, g));
            if (!(denom > 0.0)) continue;
            const auto row = pair_index(a, z1, g);
            u.reachable[static_cast<std::size_t>(row)] = true;
            for (std::size_t b = 0; b < g; ++b) {
                const double first = s_prev(src, pair_index(z1, b, g)) / denom;
                if (first == 0.0) continue;
                for (std::size_t c = 0; c < g; ++c)
                    u.kernel(row, pair_index(b, c, g)) = first * onward(pair_index(z1, b, g), static_cast<Eigen::Index>(c));
            }
        }
    }
    return u;
}

RepresentationResult representation_check(const PairModel& model, const GridMeasure& mu, std::size_t n, PairForm form)
{
    model.validate();
    const auto g = model.size();
    if (n < 1 || n > 4) throw std::invalid_argument("representation check supports 1 <= n <= 4");
    if (mu.size() != g) throw std::invalid_argument("initial measure and pair grid differ");
    if (model.coeffs.size() < n) throw std::invalid_argument("not enough blocks for the representation check");
    const auto mu_p = mu.probabilities();

    RepresentationResult res;
    Eigen::RowVectorXd v(static_cast<Eigen::Index>(g));
    for (std::size_t i = 0; i < g; ++i) v(static_cast<Eigen::Index>(i)) = mu_p[i];
    for (std::size_t k = 1; k <= n; ++k) {
        v = v * one_step_kernel(model, k);
        v /= v.sum();
    }
    res.recursion.assign(v.data(), v.data() + v.size());

    const bool odd = n % 2 == 1;
    const std::size_t m = (n + 1) / 2;
    std::vector<Eigen::MatrixXd> kernels;
    for (std::size_t j = 0; j < m; ++j)
        kernels.push_back(two_step_kernel(model, 2 * j + 2, form, odd && j + 1 == m));
    const auto pot = backward_potentials(kernels);
    const auto s = s_kernels(kernels, pot);

    const auto states = static_cast<Eigen::Index>(g * g);
    Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(states);
    for (std::size_t z = 0; z < g; ++z) w(pair_index(0, z, g)) = pot[0](pair_index(0, z, g)) * mu_p[z];
    w /= w.sum();
    for (std::size_t j = 0; j < m; ++j) {
        const Eigen::MatrixXd psi_odd = model.psi(2 * j + 1);
        // psi^Delta_{2j+1}(x2, x'1) couples the source second coordinate with the target first
        Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(states);
        for (Eigen::Index src = 0; src < states; ++src) {
            if (w(src) == 0.0) continue;
            const auto x2 = static_cast<Eigen::Index>(static_cast<std::size_t>(src) % g);
            for (std::size_t z1 = 0; z1 < g; ++z1) {
                if (!model.geometry->contains(2 * j + 1, model.grid[z1])) continue;
                const double pw = psi_odd(x2, static_cast<Eigen::Index>(z1));
                for (std::size_t z2 = 0; z2 < g; ++z2) {
                    const auto dst = pair_index(z1, z2, g);
                    next(dst) += w(src) * s[j](src, dst) * pw;
                }
            }
        }
        w = next / next.sum();
    }
    Eigen::VectorXd marginal = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g));
    for (std::size_t a = 0; a < g; ++a)
        for (std::size_t b = 0; b < g; ++b)
            marginal(static_cast<Eigen::Index>(odd ? a : b)) += w(pair_index(a, b, g));
    res.feynman_kac = normalized(marginal);

    for (std::size_t i = 0; i < g; ++i)
        res.max_diff = std::max(res.max_diff, std::abs(res.feynman_kac[i] - res.recursion[i]));
    return res;
}

SeparationBounds separation_bound_check(double t2, double x, double z, double D, double delta, double B2, double p21)
{
    if (!(D >= 0.0) || std::abs(x - z) > D) throw std::invalid_argument("separation check needs |x - z| <= D");
    const double lead = t2 - 2.0 * B2 * (p21 + 1.0) * z;
    if (std::abs(lead) > delta) throw std::invalid_argument("separation check needs |2 B2 (1 + p21) z - t2| <= Delta");
    const double base = -lead * lead / (4.0 * B2);
    const double mid = t2 - 2.0 * B2 * (p21 * x + z);
    SeparationBounds b;
    b.lower = std::exp(base - B2 * p21 * p21 * D * D - std::abs(p21) * D * delta);
    b.value = std::exp(-mid * mid / (4.0 * B2));
    b.upper = std::exp(base + std::abs(p21) * D * delta);
    return b;
}

LocalErrorBound local_error_check(std::span<const double> potential, std::span<const double> eta,
                                  std::span<const double> eta_prime)
{
    if (potential.size() != eta.size() || eta.size() != eta_prime.size())
        throw std::invalid_argument("local error check needs equal lengths");
    const auto n = eta.size();
    double z = 0.0, zp = 0.0, sup = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        z += potential[i] * eta[i];
        zp += potential[i] * eta_prime[i];
        sup = std::max(sup, potential[i]);
        diff += std::abs(eta[i] - eta_prime[i]);
    }
    if (!(z > 0.0) || !(zp > 0.0)) throw std::invalid_argument("potential has zero mass under one of the measures");
    double lhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) lhs += std::abs(potential[i] * eta[i] / z - potential[i] * eta_prime[i] / zp);
    LocalErrorBound b;
    b.lhs = 0.5 * lhs;
    b.rhs = 2.0 * std::min(1.0, sup / z * 0.5 * diff);
    return b;
}

double log_neg_log1m_exp(double la)
{
    if (!(la < 0.0)) throw std::domain_error("log_neg_log1m_exp needs la < 0");
    if (la < -20.0) return la + std::log1p(0.5 * std::exp(la));
    return std::log(-std::log1p(-std::exp(la)));
}

double log1m_exp_neg_exp(double lc)
{
    if (lc < -20.0) return lc + std::log1p(-0.5 * std::exp(lc));
    return std::log(-std::expm1(-std::exp(lc)));
}

double alpha_tilde(double L, double tau, double C)
{
    if (!(L > 0.0)) throw std::domain_error("alpha_tilde needs L > 0");
    const double u = L / (6.0 * C * std::sqrt(2.0 * tau));
    return 96.0 * C * std::sqrt(tau) / (L * std::sqrt(std::numbers::pi)) * std::exp(-0.5 * u * u);
}

double minimal_L(double tau, double C, double M, double m0)
{
    double lo = 1e-9, hi = 1.0;
    while (alpha_tilde(hi, tau, C) > 0.25) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (alpha_tilde(mid, tau, C) > 0.25 ? lo : hi) = mid;
    }
    return std::max(hi, 3.0 * std::abs(m0) + 3.0 * C * M * tau * tau);
}

double ContractionLedger::log_product_complement(std::size_t j, std::size_t n) const
{
    std::vector<double> terms;
    for (std::size_t i = j + 1; i <= n; ++i) terms.push_back(log_neg_log1m_exp(log_mix.at(2 * i)));
    if (terms.empty()) return neg_inf;
    return log1m_exp_neg_exp(log_sum_exp(terms));
}

double ContractionLedger::log_neg_log_bound(std::size_t j, std::size_t n) const
{
    if (n < j + 3) return neg_inf;
    return std::log(static_cast<double>(n - j - 2)) + log_neg_log1m_exp(log_mix_L - std::log(2.0));
}

ContractionLedger u_chain_contraction(const TruncationGeometry& geometry, double C)
{
    const auto n = geometry.blocks();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    ContractionLedger led;
    led.log_eps.assign(n + 1, nan);
    led.log_eps_prime.assign(n + 1, nan);
    led.log_mix.assign(n + 1, nan);
    for (std::size_t k = 1; k <= n; ++k) {
        const auto xi = geometry.xi(k);
        led.log_eps[k] = xi.log_eps;
        led.log_eps_prime[k] = xi.log_eps_prime;
    }
    for (std::size_t k = 2; k <= n; ++k) led.log_mix[k] = 2.0 * (led.log_eps_prime[k] + led.log_eps[k - 1]);

    const auto& s = geometry.shape();
    led.L = minimal_L(s.tau, C, geometry.params().M, geometry.center(0));
    led.alpha = alpha_tilde(led.L, s.tau, C);
    const auto at_L = geometry.xi_at(led.L);
    led.log_mix_L = 2.0 * (at_L.log_eps + at_L.log_eps_prime);
    // 1 - rho = 2c(1 - alpha) / (1 + c + sqrt(tau_L^2 + 4 alpha c)), c = 1 - tau_L
    const double c = std::exp(led.log_mix_L);
    const double tau_L = -std::expm1(led.log_mix_L);
    led.log_one_minus_rho = std::log(2.0) + led.log_mix_L + std::log1p(-led.alpha)
                            - std::log(1.0 + c + std::sqrt(tau_L * tau_L + 4.0 * led.alpha * c));
    return led;
}

}  // namespace rfl
