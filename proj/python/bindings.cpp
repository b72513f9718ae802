#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "obskit/scenario.hpp"
#include "obskit/verify.hpp"

namespace py = pybind11;
using namespace obskit;

namespace {

std::vector<double> to_std(const Vec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Vec to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<std::vector<double>> to_rows(const std::vector<Vec>& vs) {
    std::vector<std::vector<double>> out;
    out.reserve(vs.size());
    for (const Vec& v : vs) out.push_back(to_std(v));
    return out;
}

struct PyTrace {
    std::string observer;
    std::vector<double> t;
    std::vector<std::vector<double>> x, y, y_noisy, u, xhat, xerr, theta;
};

struct PyMetrics {
    std::string observer;
    std::vector<double> rms_ss, peak, conv_time;
    double theta_err_final = std::numeric_limits<double>::quiet_NaN();
};

ScenarioConfig config_from_kv(const std::string& plant,
                              const std::map<std::string, std::string>& options) {
    ScenarioConfig cfg = plant == "compare"
                             ? ScenarioConfig::compare_defaults()
                             : ScenarioConfig::defaults_for(plant);
    KvConfig kv;
    for (const auto& [k, v] : options) kv.set(k, v);
    cfg.apply(kv);
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Nonlinear state observer simulation toolkit";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<IntegrationError>(m, "IntegrationError");

    py::class_<CukParams>(m, "CukParams")
        .def(py::init<>())
        .def_readwrite("L1", &CukParams::L1)
        .def_readwrite("C2", &CukParams::C2)
        .def_readwrite("L3", &CukParams::L3)
        .def_readwrite("C4", &CukParams::C4)
        .def_readwrite("E", &CukParams::E)
        .def_readwrite("G", &CukParams::G);

    py::class_<CukGains>(m, "CukGains")
        .def(py::init<>())
        .def_readwrite("alpha", &CukGains::alpha)
        .def_readwrite("gamma", &CukGains::gamma)
        .def_readwrite("gamma1", &CukGains::gamma1)
        .def_readwrite("gamma2", &CukGains::gamma2)
        .def_readwrite("r1", &CukGains::r1)
        .def_readwrite("r2", &CukGains::r2);

    py::class_<PyTrace>(m, "Trace")
        .def_readonly("observer", &PyTrace::observer)
        .def_readonly("t", &PyTrace::t)
        .def_readonly("x", &PyTrace::x)
        .def_readonly("y", &PyTrace::y)
        .def_readonly("y_noisy", &PyTrace::y_noisy)
        .def_readonly("u", &PyTrace::u)
        .def_readonly("xhat", &PyTrace::xhat)
        .def_readonly("xerr", &PyTrace::xerr)
        .def_readonly("theta", &PyTrace::theta);

    py::class_<PyMetrics>(m, "Metrics")
        .def_readonly("observer", &PyMetrics::observer)
        .def_readonly("rms_ss", &PyMetrics::rms_ss)
        .def_readonly("peak", &PyMetrics::peak)
        .def_readonly("conv_time", &PyMetrics::conv_time)
        .def_readonly("theta_err_final", &PyMetrics::theta_err_final);

    py::class_<PdeCheckReport>(m, "PdeReport")
        .def_readonly("max_residual", &PdeCheckReport::max_residual)
        .def_readonly("samples", &PdeCheckReport::samples)
        .def_property_readonly("worst_x", [](const PdeCheckReport& r) {
            return to_std(r.worst_x);
        });

    py::class_<EquivalenceResult>(m, "EquivalenceResult")
        .def_readonly("max_deviation", &EquivalenceResult::max_deviation)
        .def_readonly("steps", &EquivalenceResult::steps);

    py::class_<PeCheckResult>(m, "PeResult")
        .def_readonly("satisfied", &PeCheckResult::satisfied)
        .def_readonly("min_window_eig", &PeCheckResult::min_window_eig)
        .def_readonly("windows", &PeCheckResult::windows);

    m.def("cuk_equilibrium", [](double u) {
        return to_std(cuk_equilibrium_for_duty(u, CukParams::paper()));
    }, py::arg("u"), "Operating point of the converter at a constant duty ratio");

    m.def("rk4_exp_decay", [](double x0, double lambda, double dt, int steps) {
        Vec x(1);
        x[0] = x0;
        for (int k = 0; k < steps; ++k)
            x = rk4_step([lambda](double, const Vec& s) { return Vec(lambda * s); },
                         x, k * dt, dt);
        return x[0];
    }, py::arg("x0"), py::arg("lam"), py::arg("dt"), py::arg("steps"),
       "Integrate xdot = lam x; handy for order checks");

    m.def("filter_f", [](double alpha, double z0, std::vector<double> u, double dt) {
        FilterState fs(alpha, z0);
        std::vector<double> out;
        out.reserve(u.size());
        for (double ui : u) {
            auto [next, val] = filter_F_step(fs, ui, dt);
            fs = next;
            out.push_back(val);
        }
        return out;
    }, py::arg("alpha"), py::arg("z0"), py::arg("u"), py::arg("dt"));

    m.def("filter_w", [](double alpha, double z0, std::vector<double> u, double dt) {
        FilterState fs(alpha, z0);
        std::vector<double> out;
        out.reserve(u.size());
        for (double ui : u) {
            auto [next, val] = filter_W_step(fs, ui, dt);
            fs = next;
            out.push_back(val);
        }
        return out;
    }, py::arg("alpha"), py::arg("z0"), py::arg("u"), py::arg("dt"));

    m.def("fd_jacobian", [](const std::function<std::vector<double>(
                                std::vector<double>)>& g,
                            std::vector<double> x) {
        const Mat J = fd_jacobian(
            [&](const Vec& v) { return to_vec(g(to_std(v))); }, to_vec(x));
        std::vector<std::vector<double>> rows;
        for (Eigen::Index i = 0; i < J.rows(); ++i) {
            rows.emplace_back(J.row(i).data(), J.row(i).data() + J.cols());
            rows.back().assign(J.cols(), 0.0);
            for (Eigen::Index j = 0; j < J.cols(); ++j) rows.back()[j] = J(i, j);
        }
        return rows;
    }, py::arg("g"), py::arg("x"));

    m.def("noise_samples", [](std::vector<double> amplitude, double period,
                              std::uint64_t seed, std::vector<double> times) {
        NoiseSpec ns(to_vec(amplitude), period, seed);
        std::vector<std::vector<double>> out;
        out.reserve(times.size());
        for (double t : times) out.push_back(to_std(ns.sample(t)));
        return out;
    }, py::arg("amplitude"), py::arg("period"), py::arg("seed"), py::arg("times"));

    m.def("run_scenario", [](const std::string& plant,
                             const std::map<std::string, std::string>& options) {
        const ScenarioConfig cfg = config_from_kv(plant, options);
        const ScenarioResult res = run_scenario(cfg);
        if (res.error) throw std::runtime_error(*res.error);
        std::vector<PyTrace> traces;
        for (const SimTrace& tr : res.traces) {
            PyTrace pt;
            pt.observer = tr.observer_id;
            pt.t = tr.t;
            pt.x = to_rows(tr.x);
            pt.y = to_rows(tr.y_clean);
            pt.y_noisy = to_rows(tr.y_noisy);
            pt.u = to_rows(tr.u);
            pt.xhat = to_rows(tr.xhat);
            pt.xerr = to_rows(tr.xerr);
            pt.theta = to_rows(tr.theta);
            traces.push_back(std::move(pt));
        }
        std::vector<PyMetrics> metrics;
        for (const ObserverMetrics& m2 : res.metrics.per_observer) {
            PyMetrics pm;
            pm.observer = m2.observer_id;
            pm.rms_ss = to_std(m2.rms_ss);
            pm.peak = to_std(m2.peak_err);
            pm.conv_time = to_std(m2.conv_time);
            if (m2.theta_err_final) pm.theta_err_final = *m2.theta_err_final;
            metrics.push_back(std::move(pm));
        }
        return py::make_tuple(traces, metrics);
    }, py::arg("plant"), py::arg("options") = std::map<std::string, std::string>{},
       "Run a scenario; plant is cuk|acad3|cascade|compare, options use the "
       "configuration-file keys");

    m.def("pde_check", [](const std::string& case_name, int samples) {
        const CukParams p = CukParams::paper();
        if (case_name == "cuk-kklo")
            return pde_residual(make_cuk_plant(p), cuk_kklo_design(p), samples);
        if (case_name == "cuk-pebo")
            return pde_residual(make_cuk_plant(p), cuk_pebo_design(p), samples);
        if (case_name == "cuk-kklpebo")
            return pde_residual(make_cuk_plant(p), cuk_kpo_design(p), samples);
        if (case_name == "acad3")
            return pde_residual(make_acad3_plant(), acad3_design(), samples);
        throw ConfigError("unknown pde case: " + case_name);
    }, py::arg("case_name"), py::arg("samples") = 1000);

    m.def("equiv_check", [](const std::string& case_name, double horizon,
                            double dt) {
        const CukParams p = CukParams::paper();
        const PlantModel plant = make_cuk_plant(p);
        const ControlSchedule sched = ControlSchedule::cuk_default();
        auto control = [sched, p](double t, const Vec& x) {
            return cuk_control(x, t, sched, p);
        };
        if (case_name == "cuk-kklpebo") {
            Vec gain(1);
            gain << 0.001;
            return equivalence_check(plant, control, cuk_kpo_design(p),
                                     cuk_kpo_regressor(p, 0.5), gain,
                                     Vec::Zero(4), horizon, dt);
        }
        if (case_name == "cuk-kklo")
            return equivalence_check(plant, control, cuk_kklo_design(p),
                                     RegressorBuilder{}, Vec(), Vec::Zero(4),
                                     horizon, dt);
        throw ConfigError("unknown equiv case: " + case_name);
    }, py::arg("case_name") = "cuk-kklpebo", py::arg("horizon") = 0.1,
       py::arg("dt") = 1e-5);

    m.def("pe_check", [](std::vector<double> t,
                         std::vector<std::vector<double>> b, double T,
                         double delta) {
        std::vector<Vec> bv;
        bv.reserve(b.size());
        for (const auto& row : b) bv.push_back(to_vec(row));
        return pe_check(t, bv, T, delta);
    }, py::arg("t"), py::arg("b"), py::arg("T"), py::arg("delta"));
}
