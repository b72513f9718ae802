#include <doctest.h>

#include <cmath>

#include "obskit/designs.hpp"
#include "obskit/observers.hpp"
#include "obskit/scenario.hpp"

using namespace obskit;

namespace {

DesignTriple toy_decay_design() {
    DesignTriple d;
    d.n_xi = 2;
    d.lambda_diag = [](const Vec&) { return Vec(Vec::Constant(2, -1.0)); };
    d.B = [](const Vec&, const Vec&) { return Vec(Vec::Zero(2)); };
    d.phi = [](const Vec& x) { return x; };
    d.phi_left = [](const Vec& w, const Vec&) { return w; };
    return d;
}

ControlSchedule default_sched() { return ControlSchedule::cuk_default(); }

std::function<double(double, const Vec&)> cuk_feedback(const CukParams& p) {
    const ControlSchedule s = default_sched();
    return [s, p](double t, const Vec& x) { return cuk_control(x, t, s, p); };
}

}  // namespace

TEST_CASE("contracting observer: pure decay when B is zero") {
    KkloObserver obs("toy", toy_decay_design());
    Vec chi(2), y(1), u(1);
    chi << 2.0, -1.5;
    y.setZero();
    u.setZero();
    const Vec chi0 = chi;
    const double dt = 1e-3;
    for (int k = 0; k < 1000; ++k)
        chi = observer_step(obs, chi, y, u, k * dt, dt);
    CHECK((chi - chi0 * std::exp(-1.0)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("contracting observer rejects designs with an open block") {
    CHECK_THROWS_AS(KkloObserver("bad", cuk_kpo_design(CukParams::paper())),
                    ConfigError);
}

TEST_CASE("combined observer degenerates bit-for-bit") {
    const CukParams p = CukParams::paper();
    const PlantModel plant = make_cuk_plant(p);
    Vec x0(4);
    x0 << 0.3, -8.0, 15.0, -0.4;
    const double dt = 1e-6;
    const int steps = 2000;

    SUBCASE("full contracting block reproduces the plain observer") {
        auto a = std::make_shared<KkloObserver>("kklo", cuk_kklo_design(p));
        auto b = std::make_shared<KklPeboObserver>(
            "combined", cuk_kklo_design(p), RegressorBuilder{}, Vec());
        ClosedLoop loop(plant, cuk_feedback(p));
        loop.add_observer(a);
        loop.add_observer(b);
        loop.set_state(x0);
        for (int k = 0; k < steps; ++k) loop.step(dt);
        const Vec ca = loop.chi(0), cb = loop.chi(1);
        for (int i = 0; i < 2; ++i) CHECK(ca[i] == cb[i]);
        Vec y = loop.y_measured(), u(1);
        u << loop.control_value();
        CHECK((a->estimate(ca, y, u) - b->estimate(cb, y, u))
                  .cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("empty contracting block reproduces the open-loop observer") {
        Vec gain(2);
        gain << 0.001, 100.0;
        auto a = std::make_shared<PeboObserver>(
            "pebo", cuk_pebo_design(p), cuk_pebo_regressor(p, 0.5), gain);
        auto b = std::make_shared<KklPeboObserver>(
            "combined", cuk_pebo_design(p), cuk_pebo_regressor(p, 0.5), gain);
        ClosedLoop loop(plant, cuk_feedback(p));
        loop.add_observer(a);
        loop.add_observer(b);
        loop.set_state(x0);
        for (int k = 0; k < steps; ++k) loop.step(dt);
        const Vec ca = loop.chi(0), cb = loop.chi(1);
        REQUIRE(ca.size() == cb.size());
        for (Eigen::Index i = 0; i < ca.size(); ++i) CHECK(ca[i] == cb[i]);
    }
}

TEST_CASE("combined observer validates estimator dimensions") {
    const CukParams p = CukParams::paper();
    Vec bad_gain(2);
    bad_gain << 1.0, 1.0;
    CHECK_THROWS_AS(KklPeboObserver("x", cuk_kpo_design(p),
                                    cuk_kpo_regressor(p, 0.5), bad_gain),
                    ConfigError);
}

TEST_CASE("generalized observer with identity beta reproduces the "
          "contracting observer") {
    const CukParams p = CukParams::paper();
    const PlantModel plant = make_cuk_plant(p);
    const DesignTriple d = cuk_kklo_design(p);

    IioMappings maps;
    maps.beta.n_chi = 2;
    maps.beta.n_z = 2;
    maps.beta.value = [](const Vec&, const Vec& chi) { return chi; };
    maps.beta.jac_chi = [](const Vec&, const Vec&) {
        return Mat(Mat::Identity(2, 2));
    };
    maps.beta.jac_y = [](const Vec& y, const Vec&) {
        return Mat(Mat::Zero(2, y.size()));
    };
    maps.phi = d.phi;
    maps.phi_jacobian = d.phi_jacobian;
    maps.phi_left = d.phi_left;

    auto kklo = std::make_shared<KkloObserver>("kklo", d);
    auto iio = std::make_shared<IioGenericObserver>("iio_generic", plant, maps);
    ClosedLoop loop(plant, cuk_feedback(p));
    loop.add_observer(kklo);
    loop.add_observer(iio);
    Vec x0(4);
    x0 << 0.2, -5.0, 10.0, -0.3;
    loop.set_state(x0);
    double dev = 0.0;
    for (int k = 0; k < 20000; ++k) {
        loop.step(1e-5);
        dev = std::max(dev, (loop.chi(0) - loop.chi(1)).cwiseAbs().maxCoeff());
    }
    CHECK(dev < 1e-8);
}

TEST_CASE("generalized observer: nullspace term vanishes for square "
          "full-rank beta") {
    const CukParams p = CukParams::paper();
    const PlantModel plant = make_cuk_plant(p);
    const DesignTriple d = cuk_kklo_design(p);
    IioMappings maps;
    maps.beta.n_chi = 2;
    maps.beta.n_z = 2;
    maps.beta.value = [](const Vec&, const Vec& chi) { return chi; };
    maps.beta.jac_chi = [](const Vec&, const Vec&) {
        return Mat(Mat::Identity(2, 2));
    };
    maps.beta.jac_y = [](const Vec& y, const Vec&) {
        return Mat(Mat::Zero(2, y.size()));
    };
    maps.phi = d.phi;
    maps.phi_jacobian = d.phi_jacobian;
    maps.phi_left = d.phi_left;

    Vec chi(2), y(2), u(1);
    chi << 0.7, -0.2;
    y << 11.0, -0.4;
    u << 0.45;
    const Vec base = iio_field_eval(plant, maps, 0.0, chi, y, u);
    maps.Q = [](const Vec&, const Vec&, const Vec&) {
        Vec q(2);
        q << 123.0, -456.0;
        return q;
    };
    const Vec with_q = iio_field_eval(plant, maps, 0.0, chi, y, u);
    CHECK((base - with_q).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("generalized observer: rank deficiency raises a manifold error") {
    const PlantModel plant = make_cuk_plant(CukParams::paper());
    IioMappings maps;
    maps.beta.n_chi = 2;
    maps.beta.n_z = 2;
    maps.beta.value = [](const Vec&, const Vec&) { return Vec(Vec::Zero(2)); };
    maps.phi = [](const Vec& x) { return Vec(x.head(2)); };
    maps.phi_left = [](const Vec& w, const Vec& y) {
        Vec x(4);
        x << w[0], w[1], y[0], y[1];
        return x;
    };
    Vec chi = Vec::Zero(2), y = Vec::Zero(2), u(1);
    u << 0.5;
    CHECK_THROWS_AS(iio_field_eval(plant, maps, 0.0, chi, y, u),
                    SingularManifoldError);
}

TEST_CASE("cascade observer: exact tracking from a consistent start") {
    const CascadeSpec spec = CascadeSpec::demo();
    const CascadePlant cp = cascade_build(spec);
    auto obs = std::make_shared<CascadeObserver>("cascade", spec, 1.0,
                                                 Vec::Constant(1, 1.0));
    // y(0) = 0 keeps the filtered-regression transient identically zero, so
    // the consistent start is exactly invariant.
    Vec x0(4);
    x0 << 0.0, -0.2, 0.4, 1.0;
    // chi = [xhat2, xhat3, xi, theta, filters]: start on the truth with
    // xi = x4 so theta = 0 and theta_hat = 0 matches it.
    Vec chi0 = obs->chi0();
    chi0[0] = x0[1];
    chi0[1] = x0[2];
    chi0[2] = x0[3];
    ClosedLoop loop(cp.model, [](double t, const Vec&) { return std::sin(t); });
    loop.add_observer(obs, chi0);
    loop.set_state(x0);
    double worst = 0.0;
    for (int k = 0; k < 4000; ++k) {
        loop.step(1e-3);
        Vec u(1);
        u << loop.control_value();
        const Vec xhat = obs->estimate(loop.chi(0), loop.y_measured(), u);
        worst = std::max(worst, (xhat - loop.x()).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("cascade observer: x2 error contracts inside the linear envelope") {
    const CascadeSpec spec = CascadeSpec::demo();  // scalar A2 = -1
    const CascadePlant cp = cascade_build(spec);
    auto obs = std::make_shared<CascadeObserver>("cascade", spec, 1.0,
                                                 Vec::Constant(1, 1.0));
    Vec x0(4);
    x0 << 0.5, 1.0, 0.0, 0.0;
    ClosedLoop loop(cp.model, [](double t, const Vec&) { return std::sin(t); });
    loop.add_observer(obs);  // zero chi -> xhat2(0) - x2(0) = -1
    loop.set_state(x0);
    const double e0 = std::abs(obs->xhat2_of(loop.chi(0))[0] - x0[1]);
    for (int k = 0; k < 3000; ++k) {
        loop.step(1e-3);
        const double t = loop.t();
        const double e = std::abs(obs->xhat2_of(loop.chi(0))[0] - loop.x()[1]);
        CHECK(e <= e0 * std::exp(-t) * 1.001 + 1e-12);
    }
}

TEST_CASE("cascade observer: estimator converges under the exciting input") {
    const CascadeSpec spec = CascadeSpec::demo();
    const CascadePlant cp = cascade_build(spec);
    auto obs = std::make_shared<CascadeObserver>("cascade", spec, 1.0,
                                                 Vec::Constant(1, 1.0));
    Vec x0(4);
    x0 << 0.5, 0.0, 0.0, 1.0;  // theta = x4(0) - xi(0) = 1
    ClosedLoop loop(cp.model, [](double t, const Vec&) { return std::sin(t); });
    loop.add_observer(obs);
    loop.set_state(x0);
    for (int k = 0; k < 8000; ++k) loop.step(1e-3);
    const double theta_hat = obs->theta_of(loop.chi(0))[0];
    CHECK(std::abs(theta_hat - 1.0) < 0.02);
}
