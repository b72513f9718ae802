#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "obskit/scenario.hpp"
#include "obskit/verify.hpp"

namespace fs = std::filesystem;
using namespace obskit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    double dt = -1.0;
    double horizon = -1.0;
    long seed = -1;
    std::string noise;  // "", "on", "off"
    std::string observer;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "configuration file");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--dt", f.dt, "integration step [s]");
    cmd->add_option("--horizon", f.horizon, "run length [s]");
    cmd->add_option("--seed", f.seed, "noise seed");
    cmd->add_option("--noise", f.noise, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--observer", f.observer, "observer id or 'all'");
}

ScenarioConfig build_config(const CommonFlags& f, ScenarioConfig cfg) {
    if (!f.config_path.empty()) cfg.apply(KvConfig::from_file(f.config_path));
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (f.dt > 0) cfg.dt = f.dt;
    if (f.horizon > 0) cfg.horizon = f.horizon;
    if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
    if (f.noise == "on") cfg.noise_on = true;
    if (f.noise == "off") cfg.noise_on = false;
    if (!f.observer.empty()) cfg.observer_ids = {f.observer};
    return cfg;
}

int write_outputs(const ScenarioConfig& cfg, const ScenarioResult& result) {
    fs::create_directories(cfg.out_dir);
    for (const SimTrace& tr : result.traces) {
        const std::string path =
            (fs::path(cfg.out_dir) / (cfg.plant_id + "_" + tr.observer_id + ".csv"))
                .string();
        export_csv(tr, path, cfg.csv);
        std::cout << "wrote " << path << " (" << tr.rows() << " rows)\n";
    }
    const std::string mpath = (fs::path(cfg.out_dir) / "metrics.csv").string();
    write_metrics_csv(result.metrics, mpath);
    std::cout << "wrote " << mpath << "\n";
    if (result.error) {
        std::cerr << "error: " << *result.error << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}

struct PdeCase {
    PlantModel plant;
    DesignTriple design;
};

PdeCase pde_case(const std::string& name, const ScenarioConfig& cfg) {
    if (name == "cuk-kklo")
        return {make_cuk_plant(cfg.cuk_params), cuk_kklo_design(cfg.cuk_params)};
    if (name == "cuk-pebo")
        return {make_cuk_plant(cfg.cuk_params), cuk_pebo_design(cfg.cuk_params)};
    if (name == "cuk-kklpebo")
        return {make_cuk_plant(cfg.cuk_params), cuk_kpo_design(cfg.cuk_params)};
    if (name == "acad3") return {make_acad3_plant(), acad3_design()};
    throw ConfigError("unknown pde-check case: " + name +
                      " (valid: cuk-kklo, cuk-pebo, cuk-kklpebo, acad3)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"obskit - nonlinear observer simulation and verification"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    CommonFlags sim_f, cmp_f;
    int decimation = -1;
    double fixed_u = std::numeric_limits<double>::quiet_NaN();
    std::string sim_plant = "cuk";

    auto* sim = app.add_subcommand("simulate", "run one plant/observer scenario");
    sim->add_option("--plant", sim_plant, "cuk|acad3|cascade");
    sim->add_option("--decimation", decimation, "record every k-th step");
    sim->add_option("--fixed-u", fixed_u, "constant input override");
    add_common(sim, sim_f);

    auto* cmp = app.add_subcommand(
        "compare", "six-observer converter comparison study");
    add_common(cmp, cmp_f);

    std::string pde_case_name;
    int pde_samples = 1000;
    double pde_tol = 1e-9;
    bool pde_fd = false;
    CommonFlags pde_f;
    auto* pde = app.add_subcommand("pde-check",
                                   "certify a design against its plant");
    pde->add_option("--case", pde_case_name, "design id")->required();
    pde->add_option("--samples", pde_samples, "sample count");
    pde->add_option("--tol", pde_tol, "pass threshold on the sup residual");
    pde->add_flag("--fd", pde_fd, "force finite-difference Jacobians");
    pde->add_option("--config", pde_f.config_path, "configuration file");

    std::string eq_case = "cuk-kklpebo";
    double eq_tol = 1e-8;
    CommonFlags eq_f;
    auto* eq = app.add_subcommand(
        "equiv-check", "combined observer vs its manifold-observer form");
    eq->add_option("--case", eq_case, "cuk-kklpebo|cuk-kklo");
    eq->add_option("--tol", eq_tol, "pass threshold on the sup deviation");
    add_common(eq, eq_f);

    double pe_T = 2.0 * M_PI;
    double pe_delta = 1.0;
    CommonFlags pe_f;
    auto* pe = app.add_subcommand(
        "pe-check", "excitation of the cascade demo regressor");
    pe->add_option("--T", pe_T, "window length [s]");
    pe->add_option("--delta", pe_delta, "Gramian lower bound");
    add_common(pe, pe_f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (sim->parsed()) {
            ScenarioConfig cfg = build_config(sim_f, [&] {
                ScenarioConfig c = ScenarioConfig::defaults_for(sim_plant);
                if (!sim_f.config_path.empty()) {
                    // plant key in the file wins over the flag default
                    c.apply(KvConfig::from_file(sim_f.config_path));
                }
                return c;
            }());
            if (decimation > 0) cfg.decimation = decimation;
            if (std::isfinite(fixed_u)) cfg.fixed_u = fixed_u;
            return write_outputs(cfg, run_scenario(cfg));
        }

        if (cmp->parsed()) {
            ScenarioConfig cfg = build_config(cmp_f, ScenarioConfig::compare_defaults());
            return write_outputs(cfg, run_scenario(cfg));
        }

        if (pde->parsed()) {
            ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
            if (!pde_f.config_path.empty())
                cfg.apply(KvConfig::from_file(pde_f.config_path));
            PdeCase c = pde_case(pde_case_name, cfg);
            if (pde_fd) c.design.phi_jacobian = nullptr;
            const PdeCheckReport rep = pde_residual(c.plant, c.design, pde_samples);
            std::printf("case %s: max residual %.3e over %d samples "
                        "(worst x = [", pde_case_name.c_str(), rep.max_residual,
                        rep.samples);
            for (Eigen::Index i = 0; i < rep.worst_x.size(); ++i)
                std::printf("%s%.4g", i ? ", " : "", rep.worst_x[i]);
            std::printf("], u = %.4g)\n", rep.worst_u.size() ? rep.worst_u[0] : 0.0);
            if (!rep.finite || rep.max_residual > pde_tol) {
                std::printf("FAIL: residual above %.1e\n", pde_tol);
                return kExitNumerical;
            }
            std::printf("PASS: residual within %.1e\n", pde_tol);
            return kExitOk;
        }

        if (eq->parsed()) {
            ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
            if (!eq_f.config_path.empty())
                cfg.apply(KvConfig::from_file(eq_f.config_path));
            double horizon = eq_f.horizon > 0 ? eq_f.horizon : 0.5;
            double dt = eq_f.dt > 0 ? eq_f.dt : 1e-5;
            const PlantModel plant = make_cuk_plant(cfg.cuk_params);
            const ControlSchedule sched = cfg.schedule;
            const CukParams p = cfg.cuk_params;
            auto control = [sched, p](double t, const Vec& x) {
                return cuk_control(x, t, sched, p);
            };
            EquivalenceResult res;
            if (eq_case == "cuk-kklpebo") {
                Vec gain(1);
                gain << cfg.gains.gamma;
                res = equivalence_check(plant, control, cuk_kpo_design(p),
                                        cuk_kpo_regressor(p, cfg.gains.alpha),
                                        gain, Vec::Zero(4), horizon, dt);
            } else if (eq_case == "cuk-kklo") {
                res = equivalence_check(plant, control, cuk_kklo_design(p),
                                        RegressorBuilder{}, Vec(), Vec::Zero(4),
                                        horizon, dt);
            } else {
                throw ConfigError("unknown equiv-check case: " + eq_case +
                                  " (valid: cuk-kklpebo, cuk-kklo)");
            }
            std::printf("case %s: sup deviation %.3e over %.3g s (%d steps)\n",
                        eq_case.c_str(), res.max_deviation, res.horizon,
                        res.steps);
            if (res.max_deviation > eq_tol) {
                std::printf("FAIL: deviation above %.1e\n", eq_tol);
                return kExitNumerical;
            }
            std::printf("PASS: deviation within %.1e\n", eq_tol);
            return kExitOk;
        }

        if (pe->parsed()) {
            ScenarioConfig cfg = ScenarioConfig::defaults_for("cascade");
            if (!pe_f.config_path.empty())
                cfg.apply(KvConfig::from_file(pe_f.config_path));
            if (pe_f.dt > 0) cfg.dt = pe_f.dt;
            if (pe_f.horizon > 0) cfg.horizon = pe_f.horizon;
            cfg.record_regressor = true;
            const ScenarioResult result = run_scenario(cfg);
            if (result.error) {
                std::cerr << "error: " << *result.error << "\n";
                return kExitNumerical;
            }
            const SimTrace& tr = result.traces.at(0);
            const PeCheckResult res = pe_check(tr.t, tr.regressor, pe_T, pe_delta);
            std::printf("windows %d, min Gramian eigenvalue %.6g "
                        "(T = %.4g s, delta = %.4g)\n",
                        res.windows, res.min_window_eig, pe_T, pe_delta);
            std::printf(res.satisfied ? "PASS: persistently exciting\n"
                                      : "FAIL: excitation below delta\n");
            return res.satisfied ? kExitOk : kExitNumerical;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}
