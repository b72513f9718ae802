#include "obskit/designs.hpp"

#include <cmath>

namespace obskit {

void CukGains::validate() const {
    if (!(alpha > 0)) throw ConfigError("CukGains: alpha must be > 0");
    if (!(gamma > 0 && Gamma1 > 0 && Gamma2 > 0))
        throw ConfigError("CukGains: estimator gains must be > 0");
    if (!(gamma1 > 0 && gamma2 > 0))
        throw ConfigError("CukGains: gamma1, gamma2 must be > 0");
    if (!(r1 > 0 && r1 <= 1.0 && r2 > 0 && r2 <= 1.0))
        throw ConfigError("CukGains: r1, r2 must lie in (0,1]");
    if (!(a1 > 0 && a2 > 0 && a3 > 0 && a4 > 0))
        throw ConfigError("CukGains: a1..a4 must be > 0");
}

DesignTriple cuk_kklo_design(const CukParams& p) {
    DesignTriple d;
    d.n_xi = 2;
    d.lambda_diag = [p](const Vec& u) {
        Vec lam(2);
        lam << -p.G / p.C4, -(1.0 - u[0]) / p.L1;
        return lam;
    };
    d.B = [p](const Vec& y, const Vec& u) {
        Vec b(2);
        b[0] = y[1] / p.C4;
        b[1] = (1.0 + p.C2 / p.L1) * (-1.0 + u[0]) * y[0] + p.E - u[0] * y[1];
        return b;
    };
    d.phi = [p](const Vec& xf) {
        Vec w(2);
        w << xf[1], p.L1 * xf[0] - p.C2 * xf[2];
        return w;
    };
    d.phi_jacobian = [p](const Vec&) {
        Mat J(2, 4);
        J << 0, 1, 0, 0,
             p.L1, 0, -p.C2, 0;
        return J;
    };
    d.phi_left = [p](const Vec& w, const Vec& y) {
        Vec x(4);
        x << w[1] / p.L1 + p.C2 * y[0] / p.L1, w[0], y[0], y[1];
        return x;
    };
    return d;
}

DesignTriple cuk_pebo_design(const CukParams& p) {
    const double c = p.G * p.L3 / p.C4;
    DesignTriple d;
    d.n_xi = 2;
    d.open_coords = {0, 1};
    d.lambda_diag = [](const Vec&) { return Vec(Vec::Zero(2)); };
    d.B = [p](const Vec& y, const Vec& u) {
        Vec b(2);
        b[0] = (p.E - (1.0 - u[0]) * y[0]) / p.L1;
        b[1] = (y[1] + p.G * u[0] * y[0]) / p.C4;
        return b;
    };
    d.B_drift = [p](const Vec& y) {
        Vec b(2);
        b << (p.E - y[0]) / p.L1, y[1] / p.C4;
        return b;
    };
    d.B_gain = [p](const Vec& y) {
        Vec b(2);
        b << y[0] / p.L1, p.G * y[0] / p.C4;
        return b;
    };
    d.phi = [c](const Vec& xf) {
        Vec w(2);
        w << xf[0], xf[1] - c * xf[3];
        return w;
    };
    d.phi_jacobian = [c](const Vec&) {
        Mat J(2, 4);
        J << 1, 0, 0, 0,
             0, 1, 0, -c;
        return J;
    };
    d.phi_left = [c](const Vec& w, const Vec& y) {
        Vec x(4);
        x << w[0], w[1] + c * y[1], y[0], y[1];
        return x;
    };
    return d;
}

RegressorBuilder cuk_pebo_regressor(const CukParams& p, double alpha) {
    RegressorBuilder r;
    r.n_y = 2;
    r.n_theta = 2;
    auto ch = [alpha](std::function<double(const Vec&, const Vec&, const Vec&)> in) {
        return RegressorBuilder::Channel{alpha, 0.0, std::move(in)};
    };
    r.channels = {
        ch([](const Vec& y, const Vec&, const Vec&) { return y[0]; }),
        ch([](const Vec& y, const Vec& xi, const Vec& u) {
            return xi[0] * (1.0 - u[0]) + u[0] * y[1];
        }),
        ch([](const Vec& y, const Vec&, const Vec&) { return y[1]; }),
        ch([p](const Vec& y, const Vec& xi, const Vec& u) {
            return (u[0] * y[0] + xi[1]) / p.L3 + (p.G / p.C4) * y[1];
        }),
        ch([](const Vec&, const Vec&, const Vec& u) { return 1.0 - u[0]; }),
    };
    r.assemble = [p](const Vec& zf, const Vec& ww, const Vec&, const Vec&,
                     const Vec&, Vec& Y, Mat& M) {
        Y[0] = ww[0] - zf[1] / p.C2;
        Y[1] = ww[2] + zf[3];
        M.setZero();
        M(0, 0) = zf[4] / p.C2;
        M(1, 1) = -1.0 / p.L3;
    };
    return r;
}

DesignTriple cuk_kpo_design(const CukParams& p) {
    DesignTriple d;
    d.n_xi = 2;
    d.open_coords = {0};
    d.lambda_diag = [p](const Vec&) {
        Vec lam(2);
        lam << 0.0, -p.G / p.C4;
        return lam;
    };
    d.B = [p](const Vec& y, const Vec& u) {
        Vec b(2);
        b[0] = (p.E - (1.0 - u[0]) * y[0]) / p.L1;
        b[1] = y[1] / p.C4;
        return b;
    };
    d.B_drift = [p](const Vec& y) {
        Vec b(2);
        b << (p.E - y[0]) / p.L1, y[1] / p.C4;
        return b;
    };
    d.B_gain = [p](const Vec& y) {
        Vec b(2);
        b << y[0] / p.L1, 0.0;
        return b;
    };
    d.phi = [](const Vec& xf) { return Vec(xf.head(2)); };
    d.phi_jacobian = [](const Vec&) {
        Mat J(2, 4);
        J << 1, 0, 0, 0,
             0, 1, 0, 0;
        return J;
    };
    d.phi_left = [](const Vec& w, const Vec& y) {
        Vec x(4);
        x << w[0], w[1], y[0], y[1];
        return x;
    };
    return d;
}

RegressorBuilder cuk_kpo_regressor(const CukParams& p, double alpha,
                                   CukYVariant variant) {
    const int idx = variant == CukYVariant::derived ? 0 : 1;
    RegressorBuilder r;
    r.n_y = 1;
    r.n_theta = 1;
    auto ch = [alpha](std::function<double(const Vec&, const Vec&, const Vec&)> in) {
        return RegressorBuilder::Channel{alpha, 0.0, std::move(in)};
    };
    r.channels = {
        ch([](const Vec& y, const Vec&, const Vec&) { return y[0]; }),
        ch([idx](const Vec& y, const Vec& xi, const Vec& u) {
            return (1.0 - u[0]) * xi[idx] + u[0] * y[1];
        }),
        ch([](const Vec&, const Vec&, const Vec& u) { return 1.0 - u[0]; }),
    };
    r.assemble = [p](const Vec& zf, const Vec& ww, const Vec&, const Vec&,
                     const Vec&, Vec& Y, Mat& M) {
        Y[0] = ww[0] - zf[1] / p.C2;
        M(0, 0) = zf[2] / p.C2;
    };
    return r;
}

DesignTriple acad3_design() {
    DesignTriple d;
    d.n_xi = 2;
    d.open_coords = {1};
    d.lambda_diag = [](const Vec&) {
        Vec lam(2);
        lam << -1.0, 0.0;
        return lam;
    };
    d.B = [](const Vec& y, const Vec& u) {
        const double y1 = y[0];
        Vec b(2);
        b[0] = y1 * y1 + std::sin(y1);
        b[1] = u[0] * y1 + 1.0 / (y1 * y1 + 1.0);
        return b;
    };
    d.phi = [](const Vec& x) { return Vec(x.tail(2)); };
    d.phi_jacobian = [](const Vec&) {
        Mat J(2, 3);
        J << 0, 1, 0,
             0, 0, 1;
        return J;
    };
    d.phi_left = [](const Vec& w, const Vec& y) {
        Vec x(3);
        x << y[0], w[0], w[1];
        return x;
    };
    return d;
}

RegressorBuilder acad3_regressor(double alpha, double psi0) {
    RegressorBuilder r;
    r.n_y = 1;
    r.n_theta = 1;
    r.channels = {
        {alpha, 0.0, [](const Vec& y, const Vec&, const Vec&) { return y[0]; }},
        {alpha, 0.0, [](const Vec& y, const Vec&, const Vec&) {
             return y[0] * y[0] * y[0];
         }},
        {alpha, psi0, [](const Vec&, const Vec& xi, const Vec&) {
             return std::exp(xi[1]);
         }},
    };
    r.assemble = [](const Vec& zf, const Vec& ww, const Vec&, const Vec&,
                    const Vec&, Vec& Y, Mat& M) {
        Y[0] = ww[0] + zf[1];
        M(0, 0) = zf[2];
    };
    return r;
}

ObserverPtr make_acad3_observer(double alpha, double gamma, double psi0,
                                double theta0) {
    if (!(theta0 > 0.0))
        throw ConfigError("acad3 observer: initial estimator state must be > 0 "
                          "(the estimate map takes its log)");
    Vec gain(1), th0(1);
    gain << gamma;
    th0 << theta0;
    return std::make_shared<KklPeboObserver>(
        "kkl_pebo", acad3_design(), acad3_regressor(alpha, psi0), gain, th0,
        Vec(), [](const Vec& t) {
            Vec out(1);
            out[0] = std::log(t[0]);
            return out;
        });
}

ObserverPtr make_cascade_observer(const CascadeSpec& spec, double alpha,
                                  double gain) {
    Vec g = Vec::Constant(spec.n4, gain);
    return std::make_shared<CascadeObserver>("cascade", spec, alpha, g);
}

// --------------------------- CukIioObserver -------------------------------

CukIioObserver::CukIioObserver(CukParams p, double gamma1, double gamma2)
    : p_(p), g1_(gamma1), g2_(gamma2) {
    if (!(g1_ > 0 && g2_ > 0))
        throw ConfigError("CukIioObserver: gamma1, gamma2 must be > 0");
}

void CukIioObserver::field(double, const Vec& chi, const Vec& y, const Vec& u,
                           Vec& dchi) const {
    const double y1 = y[0], y2 = y[1], uu = u[0];
    const double xh1 = chi[0] + p_.C2 * g1_ * y1;
    const double xh2 = chi[1] - p_.L3 * g2_ * y2;
    dchi[0] = -g1_ * (1.0 - uu) * xh1 - g1_ * uu * y2
              + (p_.E - (1.0 - uu) * y1) / p_.L1;
    dchi[1] = (y2 - p_.G * xh2) / p_.C4 - g2_ * (uu * y1 + xh2);
}

Vec CukIioObserver::estimate(const Vec& chi, const Vec& y, const Vec&) const {
    Vec x(4);
    x << chi[0] + p_.C2 * g1_ * y[0], chi[1] - p_.L3 * g2_ * y[1], y[0], y[1];
    return x;
}

std::optional<Vec> CukIioObserver::manifold_value(const Vec& chi,
                                                  const Vec& y) const {
    Vec b(2);
    b << chi[0] + p_.C2 * g1_ * y[0], chi[1] - p_.L3 * g2_ * y[1];
    return b;
}

IioMappings CukIioObserver::generic_mappings() const {
    const CukParams p = p_;
    const double g1 = g1_, g2 = g2_;
    IioMappings m;
    m.beta.n_chi = 2;
    m.beta.n_z = 2;
    m.beta.value = [p, g1, g2](const Vec& y, const Vec& chi) {
        Vec b(2);
        b << chi[0] + p.C2 * g1 * y[0], chi[1] - p.L3 * g2 * y[1];
        return b;
    };
    m.beta.jac_chi = [](const Vec&, const Vec&) { return Mat(Mat::Identity(2, 2)); };
    m.beta.jac_y = [p, g1, g2](const Vec&, const Vec&) {
        Mat J(2, 2);
        J << p.C2 * g1, 0.0,
             0.0, -p.L3 * g2;
        return J;
    };
    m.phi = [](const Vec& xf) { return Vec(xf.head(2)); };
    m.phi_jacobian = [](const Vec&) {
        Mat J(2, 4);
        J << 1, 0, 0, 0,
             0, 1, 0, 0;
        return J;
    };
    m.phi_left = [](const Vec& w, const Vec& y) {
        Vec x(4);
        x << w[0], w[1], y[0], y[1];
        return x;
    };
    return m;
}

// --------------------------- High-gain observers --------------------------

CukHgoTvObserver::CukHgoTvObserver(CukParams p, const CukGains& g)
    : p_(p), r_(g.r1), a1_(g.a1), a2_(g.a2), a3_(g.a3), a4_(g.a4) {}

void CukHgoTvObserver::field(double, const Vec& chi, const Vec& y, const Vec& u,
                             Vec& dchi) const {
    const double y1 = y[0], y2 = y[1], uu = u[0];
    dchi[0] = ((1.0 - uu) * chi[1] + uu * y2) / p_.C2 + a1_ / r_ * (y1 - chi[0]);
    dchi[1] = (-(1.0 - uu) * y1 + p_.E) / p_.L1 + a2_ / (r_ * r_) * (y1 - chi[0]);
    dchi[2] = (-chi[3] - uu * y1) / p_.L3 + a3_ / r_ * (y2 - chi[2]);
    dchi[3] = (y2 - p_.G * chi[3]) / p_.C4 + a4_ / (r_ * r_) * (y2 - chi[2]);
}

Vec CukHgoTvObserver::estimate(const Vec& chi, const Vec& y, const Vec&) const {
    Vec x(4);
    x << chi[1], chi[3], y[0], y[1];
    return x;
}

CukHgoLinObserver::CukHgoLinObserver(CukParams p, const CukGains& g)
    : p_(p), r_(g.r2), a1_(g.a1), a2_(g.a2), a3_(g.a3), a4_(g.a4) {}

void CukHgoLinObserver::field(double, const Vec& chi, const Vec& y, const Vec& u,
                              Vec& dchi) const {
    const double y1 = y[0], y2 = y[1], uu = u[0];
    dchi[0] = chi[1] + a1_ / r_ * (y1 - chi[0]);
    dchi[1] = (-(1.0 - uu) * y1 + p_.E) / p_.L1 + a2_ / (r_ * r_) * (y1 - chi[0]);
    dchi[2] = chi[3] + a3_ / r_ * (y2 - chi[2]);
    dchi[3] = (y2 - p_.G * chi[3]) / p_.C4 + a4_ / (r_ * r_) * (y2 - chi[2]);
}

Vec CukHgoLinObserver::estimate(const Vec& chi, const Vec& y, const Vec& u) const {
    const double uu = u[0];
    if (std::abs(1.0 - uu) < 1e-3)
        throw DomainError("hgo_lin estimate map: 1-u too close to zero");
    Vec x(4);
    x << (p_.C2 * chi[1] - uu * y[1]) / (1.0 - uu),
         -p_.L3 * chi[3] - uu * y[0], y[0], y[1];
    return x;
}

// --------------------------- Factory ---------------------------------------

std::vector<std::string> cuk_observer_ids() {
    return {"kklo", "pebo", "kkl_pebo", "iio", "hgo_tv", "hgo_lin"};
}

ObserverPtr make_cuk_observer(const std::string& id, const CukParams& p,
                              const CukGains& g, CukYVariant variant) {
    g.validate();
    if (id == "kklo")
        return std::make_shared<KkloObserver>("kklo", cuk_kklo_design(p));
    if (id == "pebo") {
        Vec gain(2);
        gain << g.Gamma1, g.Gamma2;
        return std::make_shared<PeboObserver>(
            "pebo", cuk_pebo_design(p), cuk_pebo_regressor(p, g.alpha), gain);
    }
    if (id == "kkl_pebo") {
        Vec gain(1);
        gain << g.gamma;
        return std::make_shared<KklPeboObserver>(
            "kkl_pebo", cuk_kpo_design(p),
            cuk_kpo_regressor(p, g.alpha, variant), gain);
    }
    if (id == "iio")
        return std::make_shared<CukIioObserver>(p, g.gamma1, g.gamma2);
    if (id == "hgo_tv") return std::make_shared<CukHgoTvObserver>(p, g);
    if (id == "hgo_lin") return std::make_shared<CukHgoLinObserver>(p, g);
    throw ConfigError("unknown cuk observer id: " + id +
                      " (valid: kklo, pebo, kkl_pebo, iio, hgo_tv, hgo_lin)");
}

}  // namespace obskit
