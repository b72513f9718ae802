#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "obskit/config.hpp"
#include "obskit/scenario.hpp"
#include "obskit/verify.hpp"

namespace fs = std::filesystem;
using namespace obskit;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path test_dir() {
    const fs::path p = fs::temp_directory_path() / "obskit_tests";
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("config: parse, comments, lists, flags") {
    const KvConfig kv = KvConfig::from_string(
        "schema_version = 1\n"
        "# a comment\n"
        "scenario.plant = cuk   # trailing comment\n"
        "scenario.dt = 2e-6\n"
        "scenario.noise = on\n"
        "noise.amplitude = 0.02, 2e-4\n");
    CHECK(kv.get_str("scenario.plant", "") == "cuk");
    CHECK(kv.get_num("scenario.dt", 0) == 2e-6);
    CHECK(kv.get_flag("scenario.noise", false));
    const auto amp = kv.get_list("noise.amplitude");
    REQUIRE(amp.size() == 2);
    CHECK(amp[1] == 2e-4);
}

TEST_CASE("config: malformed input rejected") {
    CHECK_THROWS_AS(KvConfig::from_string("just words\n"), ConfigError);
    CHECK_THROWS_AS(KvConfig::from_string("schema_version = 99\n"), ConfigError);
    CHECK_THROWS_AS(KvConfig::from_string("scenario.dt = abc\n").get_num(
                        "scenario.dt", 0.0),
                    ConfigError);
}

TEST_CASE("config: unknown keys are rejected at scenario assembly") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    CHECK_THROWS_AS(cfg.apply(KvConfig::from_string("scenario.dtt = 1\n")),
                    ConfigError);
}

TEST_CASE("config: values land in the scenario") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.apply(KvConfig::from_string(
        "scenario.observers = kklo,iio\n"
        "scenario.dt = 5e-6\n"
        "scenario.seed = 9\n"
        "control.schedule = 0:-10,0.5:-20\n"
        "gains.gamma1 = 12.5\n"
        "kkl_pebo.y_variant = printed\n"
        "plant.x0 = 1,2,3,4\n"));
    CHECK(cfg.observer_ids == std::vector<std::string>{"kklo", "iio"});
    CHECK(cfg.dt == 5e-6);
    CHECK(cfg.seed == 9);
    REQUIRE(cfg.schedule.vd_segments.size() == 2);
    CHECK(cfg.schedule.vd_segments[1].second == -20.0);
    CHECK(cfg.gains.gamma1 == 12.5);
    CHECK(cfg.y_variant == CukYVariant::printed);
    CHECK(cfg.x0.size() == 4);
}

TEST_CASE("scenario validation") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.horizon = cfg.dt / 2.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ScenarioConfig::defaults_for("cuk");
    cfg.noise_on = true;
    cfg.dt = 1e-3;  // above the noise sample period
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("run_scenario: horizon equal to dt gives a two-row trace") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.observer_ids = {"kklo"};
    cfg.dt = 1e-5;
    cfg.horizon = 1e-5;
    cfg.decimation = 1;
    const ScenarioResult res = run_scenario(cfg);
    REQUIRE(res.traces.size() == 1);
    CHECK(res.traces[0].rows() == 2);
}

TEST_CASE("run_scenario: trace row count follows the decimation formula") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.observer_ids = {"kklo"};
    cfg.dt = 1e-5;
    cfg.horizon = 1e-3;  // 100 steps
    cfg.decimation = 7;
    const ScenarioResult res = run_scenario(cfg);
    CHECK(res.traces[0].rows() == 100 / 7 + 1);
    for (std::size_t k = 1; k < res.traces[0].rows(); ++k)
        CHECK(res.traces[0].t[k] > res.traces[0].t[k - 1]);
}

TEST_CASE("run_scenario: truth-initialized observers track exactly") {
    // Zero plant state and zero extensions sit on every observer manifold
    // (theta = 0), so noiseless estimates must track at integrator tolerance.
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.observer_ids = {"kklo", "pebo", "kkl_pebo", "iio"};
    cfg.horizon = 0.05;
    const ScenarioResult res = run_scenario(cfg);
    REQUIRE_FALSE(res.error.has_value());
    for (const SimTrace& tr : res.traces) {
        double worst = 0.0;
        for (const Vec& e : tr.xerr)
            worst = std::max(worst, e.cwiseAbs().maxCoeff());
        INFO(tr.observer_id);
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("run_scenario: blowup reports the subsystem and keeps the partial "
          "trace") {
    // The open-loop observer's estimator mode is outside the RK4 stability
    // region at dt=1e-5, a reproducible blowup.
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.observer_ids = {"pebo"};
    cfg.dt = 1e-5;
    cfg.horizon = 0.05;
    cfg.decimation = 1;
    cfg.noise_on = true;
    const ScenarioResult res = run_scenario(cfg);
    REQUIRE(res.error.has_value());
    CHECK(res.error->find("pebo") != std::string::npos);
    CHECK(res.error->find("t=") != std::string::npos);
    CHECK(res.traces[0].rows() > 10);
    CHECK(res.traces[0].rows() < 5001);
}

TEST_CASE("run_scenario: metrics monotone under noise") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.observer_ids = {"kklo", "iio"};
    cfg.horizon = 0.1;
    const ScenarioResult clean = run_scenario(cfg);
    cfg.noise_on = true;
    const ScenarioResult noisy = run_scenario(cfg);
    for (std::size_t i = 0; i < clean.metrics.per_observer.size(); ++i) {
        const Vec& a = clean.metrics.per_observer[i].rms_ss;
        const Vec& b = noisy.metrics.per_observer[i].rms_ss;
        for (Eigen::Index j = 0; j < a.size(); ++j) CHECK(a[j] <= b[j] + 1e-15);
    }
}

TEST_CASE("run_scenario: decimation selects rows without altering values") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.observer_ids = {"kklo"};
    cfg.dt = 1e-5;
    cfg.horizon = 2e-3;
    cfg.noise_on = true;
    cfg.decimation = 1;
    const ScenarioResult fine = run_scenario(cfg);
    cfg.decimation = 10;
    const ScenarioResult coarse = run_scenario(cfg);
    for (std::size_t k = 0; k < coarse.traces[0].rows(); ++k) {
        const std::size_t kk = k * 10;
        CHECK(coarse.traces[0].t[k] == fine.traces[0].t[kk]);
        CHECK((coarse.traces[0].x[k] - fine.traces[0].x[kk])
                  .cwiseAbs().maxCoeff() == 0.0);
        CHECK((coarse.traces[0].xhat[k] - fine.traces[0].xhat[kk])
                  .cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("csv: two-row trace gives header plus two lines, values round-trip") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.observer_ids = {"kkl_pebo"};
    cfg.dt = 1e-5;
    cfg.horizon = 1e-5;
    cfg.decimation = 1;
    cfg.noise_on = true;
    const ScenarioResult res = run_scenario(cfg);
    const fs::path path = test_dir() / "two_row.csv";
    export_csv(res.traces[0], path.string());

    const std::string text = slurp(path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);

    const auto [names, rows] = parse_csv(path.string());
    REQUIRE(rows.size() == 2);
    REQUIRE(names.size() == rows[0].size());
    CHECK(names[0] == "t");
    const SimTrace& tr = res.traces[0];
    // 9 significant digits round-trip within 5e-9 relative
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(std::abs(rows[k][0] - tr.t[k]) <=
              5e-9 * std::max(1.0, std::abs(tr.t[k])));
        for (int i = 0; i < 4; ++i)
            CHECK(std::abs(rows[k][1 + i] - tr.x[k][i]) <=
                  5e-9 * std::max(1.0, std::abs(tr.x[k][i])));
    }
}

TEST_CASE("csv: compare emits one file per observer plus metrics") {
    ScenarioConfig cfg = ScenarioConfig::compare_defaults();
    cfg.horizon = 1e-3;
    cfg.decimation = 10;
    const ScenarioResult res = run_scenario(cfg);
    REQUIRE(res.traces.size() == 6);
    const fs::path dir = test_dir() / "compare_files";
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const SimTrace& tr : res.traces)
        export_csv(tr, (dir / ("cuk_" + tr.observer_id + ".csv")).string());
    write_metrics_csv(res.metrics, (dir / "metrics.csv").string());
    int count = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++count;
    CHECK(count == 7);
}

TEST_CASE("determinism: identical seed gives byte-identical exports") {
    ScenarioConfig cfg = ScenarioConfig::compare_defaults();
    cfg.horizon = 5e-3;
    cfg.seed = 1234;
    const fs::path d1 = test_dir() / "det1", d2 = test_dir() / "det2";
    fs::create_directories(d1);
    fs::create_directories(d2);
    const ScenarioResult r1 = run_scenario(cfg);
    const ScenarioResult r2 = run_scenario(cfg);
    for (std::size_t i = 0; i < r1.traces.size(); ++i) {
        const fs::path p1 = d1 / (r1.traces[i].observer_id + ".csv");
        const fs::path p2 = d2 / (r2.traces[i].observer_id + ".csv");
        export_csv(r1.traces[i], p1.string());
        export_csv(r2.traces[i], p2.string());
        CHECK(slurp(p1) == slurp(p2));
    }
}

TEST_CASE("acad3 scenario: estimates settle toward the equilibrium run") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("acad3");
    cfg.horizon = 8.0;
    cfg.decimation = 100;
    const ScenarioResult res = run_scenario(cfg);
    REQUIRE_FALSE(res.error.has_value());
    const SimTrace& tr = res.traces[0];
    const Vec err_end = tr.xerr.back().cwiseAbs();
    CHECK(err_end[1] < 1e-2);
    CHECK(err_end[2] < 1e-1);
}

#ifdef OBSKIT_CLI_PATH
namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(OBSKIT_CLI_PATH) + " " + args +
                            " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("cli: no arguments prints usage and exits 1") {
    CHECK(run_cli("") == 1);
}

TEST_CASE("cli: unknown observer id exits 1") {
    CHECK(run_cli("simulate --plant cuk --observer bogus --horizon 1e-4") == 1);
}

TEST_CASE("cli: unknown pde case exits 1, good case exits 0") {
    CHECK(run_cli("pde-check --case nope") == 1);
    CHECK(run_cli("pde-check --case cuk-kklpebo") == 0);
}

TEST_CASE("cli: simulate writes traces and exits 0") {
    const fs::path dir = test_dir() / "cli_sim";
    fs::remove_all(dir);
    CHECK(run_cli("simulate --plant cuk --observer kklo --horizon 1e-3 --out " +
                  dir.string()) == 0);
    CHECK(fs::exists(dir / "cuk_kklo.csv"));
    CHECK(fs::exists(dir / "metrics.csv"));
}

TEST_CASE("cli: config file drives the scenario") {
    const fs::path dir = test_dir() / "cli_cfg";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfgfile = dir / "run.cfg";
    {
        std::ofstream f(cfgfile);
        f << "schema_version = 1\n"
          << "scenario.plant = cuk\n"
          << "scenario.observers = iio\n"
          << "scenario.horizon = 1e-3\n"
          << "scenario.out = " << (dir / "out").string() << "\n";
    }
    CHECK(run_cli("simulate --config " + cfgfile.string()) == 0);
    CHECK(fs::exists(dir / "out" / "cuk_iio.csv"));
}
#endif

TEST_CASE("off-manifold coordinate recorded and exported on request") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.observer_ids = {"kkl_pebo"};
    cfg.horizon = 1e-3;
    cfg.decimation = 10;
    cfg.record_dm = true;
    cfg.csv.include_dm = true;
    const ScenarioResult res = run_scenario(cfg);
    REQUIRE_FALSE(res.error.has_value());
    const SimTrace& tr = res.traces[0];
    REQUIRE(tr.d_M.size() == tr.rows());
    for (const Vec& d : tr.d_M) CHECK(d.cwiseAbs().maxCoeff() < 1e-9);

    const fs::path path = test_dir() / "dm.csv";
    export_csv(tr, path.string(), cfg.csv);
    const auto [names, rows] = parse_csv(path.string());
    CHECK(std::count(names.begin(), names.end(), "dm1") == 1);
    CHECK(std::count(names.begin(), names.end(), "dm2") == 1);
    CHECK(rows.size() == tr.rows());
}
