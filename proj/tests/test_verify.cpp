#include <doctest.h>

#include <cmath>
#include <random>

#include "obskit/designs.hpp"
#include "obskit/scenario.hpp"
#include "obskit/verify.hpp"

using namespace obskit;

namespace {

std::function<double(double, const Vec&)> cuk_feedback(const CukParams& p) {
    const ControlSchedule s = ControlSchedule::cuk_default();
    return [s, p](double t, const Vec& x) { return cuk_control(x, t, s, p); };
}

}  // namespace

TEST_CASE("halton: deterministic, inside the box, low discrepancy-ish") {
    std::vector<std::pair<double, double>> box = {{-1.0, 1.0}, {0.0, 4.0}};
    const Mat a = halton_points(256, box);
    const Mat b = halton_points(256, box);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    int left = 0;
    for (int k = 0; k < 256; ++k) {
        CHECK(a(k, 0) >= -1.0);
        CHECK(a(k, 0) <= 1.0);
        CHECK(a(k, 1) >= 0.0);
        CHECK(a(k, 1) <= 4.0);
        if (a(k, 0) < 0.0) ++left;
    }
    CHECK(left > 100);
    CHECK(left < 156);
}

TEST_CASE("design equation residuals vanish for the shipped designs") {
    const CukParams p = CukParams::paper();
    const PlantModel cuk = make_cuk_plant(p);

    SUBCASE("analytic Jacobians") {
        CHECK(pde_residual(cuk, cuk_kklo_design(p), 1000).max_residual < 1e-9);
        CHECK(pde_residual(cuk, cuk_pebo_design(p), 1000).max_residual < 1e-9);
        CHECK(pde_residual(cuk, cuk_kpo_design(p), 1000).max_residual < 1e-9);
        CHECK(pde_residual(make_acad3_plant(), acad3_design(), 1000)
                  .max_residual < 1e-9);
    }
    SUBCASE("finite-difference Jacobians") {
        // The converter fields reach 1e5, so the roundoff-limited difference
        // quotients bound the residual relative to the identity's terms.
        for (DesignTriple d : {cuk_kklo_design(p), cuk_pebo_design(p),
                               cuk_kpo_design(p)}) {
            d.phi_jacobian = nullptr;
            CHECK(pde_residual(cuk, d, 300).max_residual_rel < 1e-6);
        }
        DesignTriple d = acad3_design();
        d.phi_jacobian = nullptr;
        CHECK(pde_residual(make_acad3_plant(), d, 300).max_residual < 1e-6);
    }
}

TEST_CASE("zero design has zero residual on any plant") {
    const PlantModel cuk = make_cuk_plant(CukParams::paper());
    DesignTriple d;
    d.n_xi = 2;
    d.lambda_diag = [](const Vec&) { return Vec(Vec::Constant(2, -1.0)); };
    d.B = [](const Vec&, const Vec&) { return Vec(Vec::Zero(2)); };
    d.phi = [](const Vec&) { return Vec(Vec::Zero(2)); };
    d.phi_jacobian = [](const Vec&) { return Mat(Mat::Zero(2, 4)); };
    d.phi_left = [](const Vec& w, const Vec&) { return w; };
    CHECK(pde_residual(cuk, d, 200).max_residual == 0.0);
}

TEST_CASE("input-affine split residuals vanish where the split exists") {
    const CukParams p = CukParams::paper();
    const PlantModel cuk = make_cuk_plant(p);
    const auto rep_kpo = pde_residual(cuk, cuk_kpo_design(p), 500,
                                      PdeMode::affine_split);
    CHECK(rep_kpo.max_residual_drift < 1e-9);
    CHECK(rep_kpo.max_residual_gain < 1e-9);
    const auto rep_pebo = pde_residual(cuk, cuk_pebo_design(p), 500,
                                       PdeMode::affine_split);
    CHECK(rep_pebo.max_residual < 1e-9);
    // the contracting design has a duty-dependent eigenvalue: no affine split
    CHECK_THROWS_AS(pde_residual(cuk, cuk_kklo_design(p), 10,
                                 PdeMode::affine_split),
                    ConfigError);
}

TEST_CASE("residual sampling validates the box dimension") {
    const PlantModel cuk = make_cuk_plant(CukParams::paper());
    CHECK_THROWS_AS(pde_residual(cuk, cuk_kklo_design(CukParams::paper()), 10,
                                 {{0.0, 1.0}}, {0.1, 0.9}),
                    ConfigError);
}

TEST_CASE("analytic and finite-difference design Jacobians agree") {
    const CukParams p = CukParams::paper();
    const PlantModel cuk = make_cuk_plant(p);
    std::mt19937 rng(5);
    for (const DesignTriple& d : {cuk_kklo_design(p), cuk_pebo_design(p),
                                  cuk_kpo_design(p)}) {
        for (int k = 0; k < 100; ++k) {
            Vec x(4);
            for (int i = 0; i < 4; ++i) {
                std::uniform_real_distribution<double> dist(
                    cuk.state_box[i].first, cuk.state_box[i].second);
                x[i] = dist(rng);
            }
            const Mat Ja = d.phi_jacobian(x);
            const Mat Jf = fd_jacobian(d.phi, x);
            CHECK((Ja - Jf).cwiseAbs().maxCoeff() < 1e-5);
        }
    }
}

TEST_CASE("manifold monitor: contracting observer d_M equals the error") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.observer_ids = {"kklo"};
    cfg.horizon = 0.02;
    cfg.dt = 1e-6;
    cfg.decimation = 10;
    Vec x0(4);
    x0 << 0.3, -8.0, 15.0, -0.4;
    cfg.x0 = x0;
    const ScenarioResult res = run_scenario(cfg);
    REQUIRE_FALSE(res.error.has_value());
    const SimTrace& tr = res.traces[0];
    const DesignTriple d = cuk_kklo_design(cfg.cuk_params);
    const ManifoldTrace mt = manifold_monitor(
        tr, [](const Vec&, const Vec& chi) { return chi; }, d.phi);
    for (std::size_t k = 0; k < tr.rows(); ++k) {
        const Vec e = tr.chi[k] - d.phi(tr.x[k]);
        CHECK((mt.d_M[k] - e).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("manifold monitor: on-manifold start stays on the manifold") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for("cuk");
    cfg.observer_ids = {"iio"};
    cfg.horizon = 0.1;
    cfg.dt = 1e-6;
    cfg.decimation = 100;
    const ScenarioResult res = run_scenario(cfg);  // zero state, zero chi
    REQUIRE_FALSE(res.error.has_value());
    const auto obs = make_observers(cfg)[0];
    const ManifoldTrace mt = manifold_monitor(
        res.traces[0], *obs, [](const Vec& x) { return Vec(x.head(2)); });
    for (double n : mt.norms) CHECK(n <= 1e-5);
}

TEST_CASE("manifold monitor: off-manifold start decays") {
    const CukParams p = CukParams::paper();
    const PlantModel plant = make_cuk_plant(p);
    const CukGains g;
    auto obs = std::make_shared<CukIioObserver>(p, g.gamma1, g.gamma2);
    ClosedLoop loop(plant, cuk_feedback(p));
    Vec chi0(2);
    chi0 << 1.7, 9.0;  // arbitrary off-manifold start
    loop.add_observer(obs, chi0);

    SimTrace tr;
    auto record = [&]() {
        Vec u(1);
        u << loop.control_value();
        tr.t.push_back(loop.t());
        tr.x.push_back(loop.x());
        tr.y_clean.push_back(loop.y_clean());
        tr.y_noisy.push_back(loop.y_measured());
        tr.u.push_back(u);
        tr.chi.push_back(loop.chi(0));
        tr.xhat.push_back(obs->estimate(loop.chi(0), loop.y_measured(), u));
        tr.xerr.push_back(tr.xhat.back() - loop.x());
    };
    record();
    // The slow manifold mode contracts at gamma1*(1-u) ~ 22 1/s; run the full
    // schedule horizon so it decays through 1e-6 of its start.
    for (int k = 0; k < 120000; ++k) {
        loop.step(1e-5);
        if ((k + 1) % 100 == 0) record();
    }
    const ManifoldTrace mt = manifold_monitor(
        tr, *obs, [](const Vec& x) { return Vec(x.head(2)); });
    CHECK(mt.decayed);
    CHECK(mt.norms.back() < 1e-6 * mt.norms.front());
}

TEST_CASE("equivalence: zero horizon reports zero deviation") {
    const CukParams p = CukParams::paper();
    const EquivalenceResult res = equivalence_check(
        make_cuk_plant(p), cuk_feedback(p), cuk_kklo_design(p),
        RegressorBuilder{}, Vec(), Vec::Zero(4), 0.0, 1e-5);
    CHECK(res.max_deviation == 0.0);
    CHECK(res.steps == 0);
}

TEST_CASE("equivalence deviation sits at roundoff and does not grow when dt "
          "halves") {
    const CukParams p = CukParams::paper();
    const PlantModel plant = make_cuk_plant(p);
    Vec gain(1);
    gain << 0.001;
    auto run = [&](double dt) {
        return equivalence_check(plant, cuk_feedback(p), cuk_kpo_design(p),
                                 cuk_kpo_regressor(p, 0.5), gain, Vec::Zero(4),
                                 0.2, dt).max_deviation;
    };
    const double dev_full = run(2e-5);
    const double dev_half = run(1e-5);
    CHECK(dev_full < 1e-9);
    CHECK(dev_half < 1e-9);
    // algebraic coincidence: refining the grid must not reveal an O(dt^k) gap
    CHECK(dev_half <= 4.0 * std::max(dev_full, 1e-12));
}

TEST_CASE("pe check: zero regressor is not exciting") {
    std::vector<double> t;
    std::vector<Vec> b;
    for (int k = 0; k <= 200; ++k) {
        t.push_back(k * 0.01);
        b.push_back(Vec::Zero(1));
    }
    const PeCheckResult res = pe_check(t, b, 1.0, 0.1);
    CHECK_FALSE(res.satisfied);
    CHECK(res.min_window_eig == 0.0);
}

TEST_CASE("pe check: unit scalar regressor integrates to the window length") {
    std::vector<double> t;
    std::vector<Vec> b;
    for (int k = 0; k <= 200; ++k) {
        t.push_back(k * 0.01);
        b.push_back(Vec::Ones(1));
    }
    const PeCheckResult res = pe_check(t, b, 1.0, 0.999);
    CHECK(res.satisfied);
    CHECK(res.min_window_eig == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pe check: cascade demo regressor against a quadrature oracle") {
    // b(t) = 1 + sin^2(sin t), period 2*pi; every full-period window has the
    // same Gramian, evaluated here by Simpson quadrature as the oracle.
    auto bfun = [](double t) {
        const double s = std::sin(std::sin(t));
        return 1.0 + s * s;
    };
    const double T = 2.0 * M_PI;
    double oracle = 0.0;
    const int n_simpson = 20000;
    const double h = T / n_simpson;
    for (int k = 0; k <= n_simpson; ++k) {
        const double w = (k == 0 || k == n_simpson) ? 1.0
                         : (k % 2 == 1 ? 4.0 : 2.0);
        const double b = bfun(k * h);
        oracle += w * b * b;
    }
    oracle *= h / 3.0;

    std::vector<double> t;
    std::vector<Vec> b;
    const double dt = 1e-3;
    for (int k = 0; k <= static_cast<int>(4.0 * M_PI / dt); ++k) {
        t.push_back(k * dt);
        b.push_back(Vec::Constant(1, bfun(k * dt)));
    }
    const PeCheckResult res = pe_check(t, b, T, 0.9 * oracle);
    CHECK(res.satisfied);
    CHECK(res.min_window_eig == doctest::Approx(oracle).epsilon(1e-4));
    CHECK_FALSE(pe_check(t, b, T, 1.1 * oracle).satisfied);
}

TEST_CASE("pe check: window must fit the trace") {
    std::vector<double> t = {0.0, 0.1};
    std::vector<Vec> b = {Vec::Ones(1), Vec::Ones(1)};
    CHECK_THROWS_AS(pe_check(t, b, 1.0, 0.1), ConfigError);
}

TEST_CASE("residual report flags non-finite evaluations") {
    const PlantModel cuk = make_cuk_plant(CukParams::paper());
    DesignTriple d = cuk_kpo_design(CukParams::paper());
    d.B = [](const Vec& y, const Vec&) {
        Vec b(2);
        b[0] = 1.0 / (y[0] - y[0]);  // inf
        b[1] = 0.0;
        return b;
    };
    const PdeCheckReport rep = pde_residual(cuk, d, 50);
    CHECK_FALSE(rep.finite);
}

TEST_CASE("orthogonally mixed design satisfies the mixed identity") {
    const CukParams p = CukParams::paper();
    DesignTriple r5 = cuk_kpo_design(p);
    r5.lambda_diag = [p](const Vec&) {
        Vec lam(2);
        lam << -p.G / p.C4, 0.0;
        return lam;
    };
    r5.open_coords = {1};
    Mat P(2, 2);
    P << 0, 1,
         1, 0;
    r5.P = P;
    CHECK(pde_residual(make_cuk_plant(p), r5, 500).max_residual < 1e-9);
}

TEST_CASE("shipped designs: the left inverse undoes the coordinate change") {
    const CukParams p = CukParams::paper();
    const PlantModel cuk = make_cuk_plant(p);
    std::mt19937 rng(17);
    auto sample = [&rng](const PlantModel& plant) {
        Vec x(plant.n);
        for (int i = 0; i < plant.n; ++i) {
            std::uniform_real_distribution<double> dist(
                plant.state_box[i].first, plant.state_box[i].second);
            x[i] = dist(rng);
        }
        return x;
    };
    for (const DesignTriple& d : {cuk_kklo_design(p), cuk_pebo_design(p),
                                  cuk_kpo_design(p)}) {
        for (int k = 0; k < 50; ++k) {
            const Vec x = sample(cuk);
            const Vec back = d.phi_left(d.phi(x), cuk.output(x));
            CHECK((back - x).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
    const PlantModel acad = make_acad3_plant();
    const DesignTriple d = acad3_design();
    for (int k = 0; k < 50; ++k) {
        const Vec x = sample(acad);
        CHECK((d.phi_left(d.phi(x), acad.output(x)) - x)
                  .cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("design validation polices the eigenvalue signs") {
    DesignTriple d = cuk_kpo_design(CukParams::paper());
    d.open_coords = {};  // claims fully contracting, but lambda1 is zero
    CHECK_THROWS_AS(d.validate(), ConfigError);
    DesignTriple d2 = cuk_kpo_design(CukParams::paper());
    d2.open_coords = {0, 1};  // claims fully open, but lambda2 is negative
    CHECK_THROWS_AS(d2.validate(), ConfigError);
}
