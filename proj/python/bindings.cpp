#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "rfl/experiments.hpp"
#include "rfl/fk.hpp"
#include "rfl/ou.hpp"

namespace py = pybind11;
using namespace rfl;

namespace {

py::array_t<double> to_array(std::span<const double> v) { return py::array_t<double>(v.size(), v.data()); }

py::dict table_dict(const CovarianceTable& t)
{
    py::dict d;
    d["theta"] = t.theta;
    d["var1"] = t.var1;
    d["var2"] = t.var2;
    d["var3"] = t.var3;
    d["cov12"] = t.cov12;
    d["cov13"] = t.cov13;
    d["cov23"] = t.cov23;
    return d;
}

py::dict rows_dict(const std::vector<DistanceRow>& rows)
{
    std::vector<double> k, tv, hil, ltv, lhil, esc;
    std::vector<std::uint64_t> seed;
    for (const auto& r : rows) {
        k.push_back(static_cast<double>(r.k));
        tv.push_back(r.tv);
        hil.push_back(r.hilbert);
        ltv.push_back(r.log_tv);
        lhil.push_back(r.log_hilbert);
        esc.push_back(r.escape_mass);
        seed.push_back(r.seed);
    }
    py::dict d;
    d["k"] = to_array(k);
    d["tv"] = to_array(tv);
    d["hilbert"] = to_array(hil);
    d["log_tv"] = to_array(ltv);
    d["log_hilbert"] = to_array(lhil);
    d["escape_mass"] = to_array(esc);
    d["seed"] = seed;
    return d;
}

}  // namespace

PYBIND11_MODULE(_rfl, m)
{
    m.doc() = "Robust filtering for a partially observed diffusion: likelihood coefficients, grid filters, checks";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("covariance_table", [](double theta) { return table_dict(covariance_table(theta)); }, py::arg("theta"));
    m.def("covariance_table_quadrature", [](double theta) { return table_dict(covariance_table_quadrature(theta)); },
          py::arg("theta"));
    m.def("gram_matrix", [](double theta) { return covariance_table(theta).gram_order_matrix(); }, py::arg("theta"),
          "Covariance of (G1, G3, G2).");
    m.def("gram_factor", [](double theta) { return gram_decompose(covariance_table(theta), {}).triangular_map(); },
          py::arg("theta"));

    py::class_<BlockCoefficients>(m, "BlockCoefficients")
        .def_readonly("theta", &BlockCoefficients::theta)
        .def_readonly("h", &BlockCoefficients::h)
        .def_readonly("tau", &BlockCoefficients::tau)
        .def_readonly("A2", &BlockCoefficients::A2)
        .def_readonly("B2", &BlockCoefficients::B2)
        .def_readonly("C1", &BlockCoefficients::C1)
        .def_readonly("A1", &BlockCoefficients::A1)
        .def_readonly("B1", &BlockCoefficients::B1)
        .def_readonly("C0", &BlockCoefficients::C0)
        .def("__repr__", [](const BlockCoefficients& c) {
            return "BlockCoefficients(theta=" + std::to_string(c.theta) + ", A2=" + std::to_string(c.A2) +
                   ", B2=" + std::to_string(c.B2) + ", C1=" + std::to_string(c.C1) + ")";
        });

    m.def("shape_coefficients", &shape_coefficients, py::arg("h"), py::arg("tau"));
    m.def(
        "block_coefficients",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> y, double tau, double h) {
            std::vector<double> v(y.data(), y.data() + y.size());
            if (v.size() < 2) throw std::invalid_argument("need at least two observation samples");
            const double dt = tau / static_cast<double>(v.size() - 1);
            return block_coefficients(ObservationPath(dt, tau, std::move(v)), h, tau);
        },
        py::arg("y"), py::arg("tau"), py::arg("h"), "Coefficients of one block from Y sampled on a uniform grid over [0, tau].");
    m.def("log_psi_hat", [](const BlockCoefficients& c, double x, double z) { return psi_hat_eval(c, x, z); },
          py::arg("coeffs"), py::arg("x"), py::arg("z"));
    m.def("log_psi_direct", &log_psi_direct, py::arg("coeffs"), py::arg("x"), py::arg("z"));

    py::class_<ExperimentConfig>(m, "Config")
        .def(py::init<>())
        .def_static("parse", &ExperimentConfig::parse, py::arg("text"))
        .def_static("load", [](const std::string& p) { return ExperimentConfig::load(p); }, py::arg("path"))
        .def("set", &ExperimentConfig::set, py::arg("key"), py::arg("value"))
        .def("validate", &ExperimentConfig::validate)
        .def("echo", &ExperimentConfig::echo)
        .def("seed_list", &ExperimentConfig::seed_list);

    m.def(
        "simulate",
        [](const ExperimentConfig& cfg, std::uint64_t seed, std::size_t blocks) {
            const auto run = simulate_run(cfg, seed, blocks);
            py::dict d;
            std::vector<double> t(run.path.size());
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = run.path.time(i);
            d["t"] = to_array(t);
            d["y"] = to_array(run.path.y());
            d["x"] = to_array(run.path.x());
            d["coeffs"] = run.coeffs;
            return d;
        },
        py::arg("config"), py::arg("seed"), py::arg("blocks"));

    py::class_<GridMeasure>(m, "GridMeasure")
        .def(py::init([](std::vector<double> grid, py::array_t<double, py::array::c_style | py::array::forcecast> w) {
                 return GridMeasure(std::move(grid), std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
             }),
             py::arg("grid"), py::arg("weights"))
        .def_static("from_log_weights", &GridMeasure::from_log_weights, py::arg("grid"), py::arg("log_weights"))
        .def_property_readonly("grid", [](const GridMeasure& g) { return to_array(g.grid()); })
        .def_property_readonly("log_weights", [](const GridMeasure& g) { return to_array(g.log_weights()); })
        .def("probabilities", [](const GridMeasure& g) { return to_array(g.probabilities()); })
        .def("total_mass", &GridMeasure::total_mass)
        .def("median", &GridMeasure::median)
        .def("__len__", &GridMeasure::size);

    m.def("uniform_grid", &uniform_grid, py::arg("lo"), py::arg("hi"), py::arg("n"));
    m.def(
        "gaussian_on_grid", [](const std::vector<double>& grid, double mean, double sd) { return gaussian_on_grid(grid, mean, sd); },
        py::arg("grid"), py::arg("mean"), py::arg("sd"));
    m.def(
        "distances",
        [](const GridMeasure& a, const GridMeasure& b) {
            const auto d = distances(a, b);
            return py::make_tuple(d.tv, d.hilbert);
        },
        py::arg("mu"), py::arg("nu"), "(total variation, Hilbert) distance.");
    m.def(
        "grid_filter",
        [](const GridMeasure& prior, const std::vector<BlockCoefficients>& coeffs, double tau) {
            const std::vector<double> grid(prior.grid().begin(), prior.grid().end());
            const auto log_q = log_transition_kernel(grid, TransitionSpec::for_drift(DriftSpec::zero(), tau),
                                                     KernelScale::density);
            return run_filter(prior, coeffs, log_q);
        },
        py::arg("prior"), py::arg("coeffs"), py::arg("tau"), "Exact grid filter for zero drift; returns pi_0..pi_n.");
    m.def("particle_filter", &particle_filter, py::arg("coeffs"), py::arg("tau"), py::arg("prior_mean"),
          py::arg("prior_sd"), py::arg("particles"), py::arg("seed"));

    m.def(
        "validate_hypotheses",
        [](double h, double tau, double delta, double M, double m0) {
            TruncationParams p;
            p.delta = delta;
            p.M = M;
            const auto r = validate_hypotheses(QuadraticShape::from(shape_coefficients(h, tau)), p, m0);
            py::list out;
            for (const auto& c : r.checks) out.append(py::make_tuple(c.name, c.pass, c.margin));
            return out;
        },
        py::arg("h"), py::arg("tau"), py::arg("delta"), py::arg("M") = 0.0, py::arg("m0") = 0.0,
        "List of (inequality, pass, margin).");

    m.def("verify_suites", &verify_suites);
    m.def(
        "verify",
        [](const std::string& suite, const ExperimentConfig& cfg) {
            const auto rep = verify(suite, cfg);
            py::list rows;
            for (const auto& r : rep.rows) rows.append(py::make_tuple(r.check, r.value, r.limit, r.pass));
            return py::make_tuple(rep.pass(), rows);
        },
        py::arg("suite"), py::arg("config") = ExperimentConfig{});

    m.def(
        "run_stability",
        [](const ExperimentConfig& cfg) {
            const auto r = run_stability(cfg);
            py::dict d;
            d["rows"] = rows_dict(r.rows);
            d["truncated_rows"] = rows_dict(r.truncated_rows);
            d["slopes"] = to_array(r.slopes);
            d["median_slope"] = r.median_slope;
            d["median_log_first_tv"] = r.median_log_first_tv;
            d["median_log_final_tv"] = r.median_log_final_tv;
            d["hilbert_nonincreasing"] = r.hilbert_nonincreasing;
            d["delta_n"] = r.delta_n;
            return d;
        },
        py::arg("config"));
    m.def(
        "run_truncation_sweep",
        [](const ExperimentConfig& cfg) {
            const auto s = run_truncation_sweep(cfg);
            std::vector<double> delta, tv, esc;
            for (const auto& r : s.rows) {
                delta.push_back(r.delta);
                tv.push_back(r.sup_mean_tv);
                esc.push_back(r.mean_escape);
            }
            py::dict d;
            d["delta"] = to_array(delta);
            d["sup_mean_tv"] = to_array(tv);
            d["mean_escape"] = to_array(esc);
            d["slope"] = s.fit.slope;
            d["r2"] = s.fit.r2;
            return d;
        },
        py::arg("config"));
}
