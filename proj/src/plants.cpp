#include "obskit/plants.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace obskit {

CukParams CukParams::paper() { return CukParams{}; }

void CukParams::validate() const {
    if (!(L1 > 0 && C2 > 0 && L3 > 0 && C4 > 0))
        throw ConfigError("CukParams: L1, C2, L3, C4 must be > 0");
    if (!(G > 0)) throw ConfigError("CukParams: G must be > 0");
}

Vec cuk_field(const Vec& xf, double u, const CukParams& p) {
    if (!(u > 0.0 && u < 1.0)) {
        std::ostringstream os;
        os << "cuk_field: duty ratio u=" << u << " outside (0,1)";
        throw DomainError(os.str());
    }
    const double x1 = xf[0], x2 = xf[1], y1 = xf[2], y2 = xf[3];
    Vec d(4);
    d[0] = -(1.0 - u) * y1 / p.L1 + p.E / p.L1;
    d[1] = y2 / p.C4 - p.G * x2 / p.C4;
    d[2] = (1.0 - u) * x1 / p.C2 + u * y2 / p.C2;
    d[3] = -u * y1 / p.L3 - x2 / p.L3;
    return d;
}

Vec cuk_equilibrium_for_duty(double u, const CukParams& p) {
    const double y1 = p.E / (1.0 - u);
    const double x2 = -u * y1;
    const double y2 = p.G * x2;
    const double x1 = -u * y2 / (1.0 - u);
    Vec eq(4);
    eq << x1, x2, y1, y2;
    return eq;
}

ControlSchedule ControlSchedule::cuk_default() {
    ControlSchedule s;
    s.vd_segments = {{0.0, -15.0}, {0.2, -25.0}, {0.4, -15.0},
                     {0.6, -25.0}, {0.8, -15.0}, {1.0, -25.0}};
    s.lambda_c = 0.1;
    s.u_min = 0.05;
    s.u_max = 0.95;
    return s;
}

void ControlSchedule::validate() const {
    if (vd_segments.empty() || vd_segments.front().first != 0.0)
        throw ConfigError("ControlSchedule: first segment must start at t=0");
    for (std::size_t i = 1; i < vd_segments.size(); ++i)
        if (!(vd_segments[i].first > vd_segments[i - 1].first))
            throw ConfigError("ControlSchedule: segment starts must increase");
    if (lambda_c < 0.0) throw ConfigError("ControlSchedule: lambda_c must be >= 0");
    if (!(0.0 < u_min && u_min < u_max && u_max < 1.0))
        throw ConfigError("ControlSchedule: need 0 < u_min < u_max < 1");
}

double ControlSchedule::vd_at(double t) const {
    double vd = vd_segments.front().second;
    for (const auto& [start, v] : vd_segments) {
        if (t >= start) vd = v;
        else break;
    }
    return vd;
}

double cuk_control(const Vec& xf, double t, const ControlSchedule& sched,
                   const CukParams& p) {
    const double vd = std::abs(sched.vd_at(t));
    const double x1 = xf[0], x2 = xf[1], v2 = xf[2];
    const double s = p.G * vd * v2 + p.E * (x2 - x1);
    double u = vd / (vd + p.E) + sched.lambda_c * s / (1.0 + s * s);
    return std::clamp(u, sched.u_min, sched.u_max);
}

PlantModel make_cuk_plant(const CukParams& p) {
    p.validate();
    PlantModel plant;
    plant.n = 4;
    plant.m = 1;
    plant.p = 2;
    plant.field = [p](const Vec& x, const Vec& u) { return cuk_field(x, u[0], p); };
    plant.output = [](const Vec& x) {
        Vec y(2);
        y << x[2], x[3];
        return y;
    };
    plant.output_indices = {2, 3};
    plant.params = {{"L1", p.L1}, {"C2", p.C2}, {"L3", p.L3},
                    {"C4", p.C4}, {"E", p.E},   {"G", p.G}};
    // Box spanning +/- 2x the first default setpoint equilibrium (Vd = -15 V).
    const double u_ref = 15.0 / (15.0 + p.E);
    const Vec eq = cuk_equilibrium_for_duty(u_ref, p);
    plant.state_box.reserve(4);
    for (int i = 0; i < 4; ++i) {
        const double a = 2.0 * std::abs(eq[i]);
        plant.state_box.emplace_back(-a, a);
    }
    plant.u_range = {0.05, 0.95};
    plant.drift = [p](const Vec& xf) {
        const double x1 = xf[0], x2 = xf[1], y1 = xf[2], y2 = xf[3];
        Vec d(4);
        d[0] = -y1 / p.L1 + p.E / p.L1;
        d[1] = y2 / p.C4 - p.G * x2 / p.C4;
        d[2] = x1 / p.C2;
        d[3] = -x2 / p.L3;
        return d;
    };
    plant.input_gain = [p](const Vec& xf) {
        const double x1 = xf[0], y1 = xf[2], y2 = xf[3];
        Vec g(4);
        g[0] = y1 / p.L1;
        g[1] = 0.0;
        g[2] = (y2 - x1) / p.C2;
        g[3] = -y1 / p.L3;
        return g;
    };
    return plant;
}

Vec acad3_field(const Vec& x, double u) {
    const double e3 = std::exp(x[2]);
    Vec d(3);
    d[0] = -x[0] * x[0] * x[0] + e3;
    d[1] = -x[1] + x[0] * x[0] + std::sin(x[0]);
    d[2] = 1.0 / (x[0] * x[0] + 1.0) + x[0] * u;
    return d;
}

PlantModel make_acad3_plant() {
    PlantModel plant;
    plant.n = 3;
    plant.m = 1;
    plant.p = 1;
    plant.field = [](const Vec& x, const Vec& u) { return acad3_field(x, u[0]); };
    plant.output = [](const Vec& x) {
        Vec y(1);
        y << x[0];
        return y;
    };
    plant.output_indices = {0};
    plant.state_box = {{-2.0, 2.0}, {-2.0, 2.0}, {-2.0, 2.0}};
    plant.u_range = {-2.0, 2.0};
    return plant;
}

Vec acad3_equilibrium() {
    // Real root of x^3 + x - 1 by Newton iteration.
    double r = 0.7;
    for (int i = 0; i < 60; ++i) {
        const double f = r * r * r + r - 1.0;
        const double fp = 3.0 * r * r + 1.0;
        r -= f / fp;
    }
    Vec eq(3);
    eq[0] = r;
    eq[1] = r * r + std::sin(r);
    eq[2] = 3.0 * std::log(r);
    return eq;
}

CascadeSpec CascadeSpec::demo() {
    CascadeSpec s;
    s.n1 = s.n2 = s.n3 = s.n4 = 1;
    s.A2 = Mat::Constant(1, 1, -1.0);
    s.A3 = Mat::Constant(1, 1, -2.0);
    s.f1 = [](const Vec& x1, const Vec&, const Vec&, const Vec&) { return Vec(-x1); };
    s.f2 = [](const Vec& x1, const Vec&) { return x1; };
    s.f3 = [](const Vec& x1, const Vec& x2, const Vec&) { return Vec(x1 + x2); };
    s.f4 = [](const Vec&, const Vec&, const Vec&, const Vec& u) {
        Vec v(1);
        v[0] = std::sin(u[0]);
        return v;
    };
    s.b = [](const Vec&, const Vec&, const Vec&, const Vec& u) {
        Vec v(1);
        const double su = std::sin(u[0]);
        v[0] = 1.0 + su * su;
        return v;
    };
    s.k = 1;
    return s;
}

namespace {

void require_hurwitz(const Mat& A, const char* name) {
    Eigen::EigenSolver<Mat> es(A);
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        const auto ev = es.eigenvalues()[i];
        if (ev.real() >= 0.0) {
            std::ostringstream os;
            os << "cascade_build: " << name << " is not Hurwitz, eigenvalue "
               << ev.real() << (ev.imag() >= 0 ? "+" : "") << ev.imag() << "i";
            throw ConfigError(os.str());
        }
    }
}

}  // namespace

CascadePlant cascade_build(const CascadeSpec& spec) {
    if (spec.A2.rows() != spec.n2 || spec.A2.cols() != spec.n2 ||
        spec.A3.rows() != spec.n3 || spec.A3.cols() != spec.n3)
        throw ConfigError("cascade_build: A2/A3 dimensions do not match n2/n3");
    if (spec.k < 1 || spec.k > spec.n1)
        throw ConfigError("cascade_build: k must satisfy 1 <= k <= n1");
    if (!spec.hurwitz_certified) {
        require_hurwitz(spec.A2, "A2");
        require_hurwitz(spec.A3, "A3");
    }

    CascadePlant out;
    out.spec = spec;
    const int n1 = spec.n1, n2 = spec.n2, n3 = spec.n3, n4 = spec.n4;
    const int n = n1 + n2 + n3 + n4;

    PlantModel& plant = out.model;
    plant.n = n;
    plant.m = 1;
    plant.p = n1;
    plant.field = [spec, n1, n2, n3, n4](const Vec& x, const Vec& u) {
        const Vec x1 = x.segment(0, n1);
        const Vec x2 = x.segment(n1, n2);
        const Vec x3 = x.segment(n1 + n2, n3);
        const Vec x4 = x.segment(n1 + n2 + n3, n4);
        Vec d(n1 + n2 + n3 + n4);
        Vec d1 = spec.f1(x1, x2, x3, u);
        d1[spec.k - 1] += spec.b(x1, x2, x3, u).dot(x4);
        d.segment(0, n1) = d1;
        d.segment(n1, n2) = spec.A2 * x2 + spec.f2(x1, u);
        d.segment(n1 + n2, n3) = spec.A3 * x3 + spec.f3(x1, x2, u);
        d.segment(n1 + n2 + n3, n4) = spec.f4(x1, x2, x3, u);
        return d;
    };
    plant.output = [n1](const Vec& x) { return Vec(x.head(n1)); };
    plant.output_indices.resize(n1);
    for (int i = 0; i < n1; ++i) plant.output_indices[i] = i;
    plant.state_box.assign(n, {-2.0, 2.0});
    plant.u_range = {-1.0, 1.0};

    // Probe the regressor; an identically zero b can never be persistently
    // exciting.
    bool any_nonzero = false;
    const Vec z1 = Vec::Zero(n1), z2 = Vec::Zero(n2), z3 = Vec::Zero(n3);
    for (double uv : {-1.0, -0.3, 0.0, 0.4, 1.0}) {
        Vec u(1);
        u[0] = uv;
        if (spec.b(z1, z2, z3, u).cwiseAbs().maxCoeff() > 0.0) any_nonzero = true;
        if (spec.b(Vec::Ones(n1), Vec::Ones(n2), Vec::Ones(n3), u)
                .cwiseAbs().maxCoeff() > 0.0)
            any_nonzero = true;
    }
    out.zero_regressor_warning = !any_nonzero;
    return out;
}

}  // namespace obskit
