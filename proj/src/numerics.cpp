#include "obskit/numerics.hpp"

#include <cmath>
#include <sstream>

namespace obskit {

bool all_finite(const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) return false;
    }
    return true;
}

Vec rk4_step(const OdeField& field, const Vec& x, double t, double dt) {
    if (!(dt > 0.0)) throw ConfigError("rk4_step: dt must be > 0");
    const Vec k1 = field(t, x);
    const Vec k2 = field(t + 0.5 * dt, x + (0.5 * dt) * k1);
    const Vec k3 = field(t + 0.5 * dt, x + (0.5 * dt) * k2);
    const Vec k4 = field(t + dt, x + dt * k3);
    Vec out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!all_finite(out)) {
        std::ostringstream os;
        os << "rk4_step: non-finite state after step at t=" << t
           << ", x=[" << x.transpose() << "]";
        throw IntegrationError(os.str(), t);
    }
    return out;
}

void rk4_step_inplace(const std::function<void(double, const Vec&, Vec&)>& field,
                      Vec& z, double t, double dt, Rk4Workspace& ws) {
    field(t, z, ws.k1);
    ws.tmp = z + (0.5 * dt) * ws.k1;
    field(t + 0.5 * dt, ws.tmp, ws.k2);
    ws.tmp = z + (0.5 * dt) * ws.k2;
    field(t + 0.5 * dt, ws.tmp, ws.k3);
    ws.tmp = z + dt * ws.k3;
    field(t + dt, ws.tmp, ws.k4);
    z += (dt / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
}

std::pair<FilterState, double> filter_F_step(FilterState fs, double u_in, double dt) {
    Vec z(1);
    z[0] = fs.z;
    const double a = fs.alpha;
    Vec zn = rk4_step([a, u_in](double, const Vec& s) {
        Vec d(1);
        d[0] = a * (u_in - s[0]);
        return d;
    }, z, 0.0, dt);
    fs.z = zn[0];
    return {fs, fs.f_output()};
}

std::pair<FilterState, double> filter_W_step(FilterState fs, double u_in, double dt) {
    auto [next, f_out] = filter_F_step(fs, u_in, dt);
    (void)f_out;
    return {next, next.w_output(u_in)};
}

GradientEstimatorState::GradientEstimatorState(Vec theta0, Vec g)
    : theta_hat(std::move(theta0)), gain(std::move(g)) {
    if (gain.size() != theta_hat.size())
        throw ConfigError("GradientEstimatorState: gain/theta dimension mismatch");
    for (Eigen::Index i = 0; i < gain.size(); ++i)
        if (!(gain[i] > 0.0))
            throw ConfigError("GradientEstimatorState: gain entries must be > 0");
}

GradientEstimatorState gradient_step(const GradientEstimatorState& ge,
                                     const Mat& M, const Vec& Y, double dt) {
    const Eigen::Index nth = ge.theta_hat.size();
    if (M.cols() != nth || M.rows() != Y.size())
        throw ConfigError("gradient_step: regressor dimensions do not match estimator");
    GradientEstimatorState out = ge;
    out.theta_hat = rk4_step([&](double, const Vec& th) {
        return Vec(ge.gain.asDiagonal() * (M.transpose() * (Y - M * th)));
    }, ge.theta_hat, 0.0, dt);
    return out;
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& g, const Vec& x, double h) {
    if (!(h > 0.0)) throw ConfigError("fd_jacobian: h must be > 0");
    Vec xp = x, xm = x;
    Mat J;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double hj = std::max(h, h * std::abs(x[j]));
        xp[j] = x[j] + hj;
        xm[j] = x[j] - hj;
        const Vec gp = g(xp);
        const Vec gm = g(xm);
        if (!all_finite(gp) || !all_finite(gm)) {
            std::ostringstream os;
            os << "fd_jacobian: non-finite evaluation near x=[" << x.transpose()
               << "], axis " << j;
            throw Error(os.str());
        }
        if (J.size() == 0) J.resize(gp.size(), x.size());
        J.col(j) = (gp - gm) / (2.0 * hj);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    if (J.size() == 0) J.resize(0, x.size());
    return J;
}

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

NoiseSpec::NoiseSpec(Vec amp, double period, std::uint64_t s)
    : amplitude(std::move(amp)), sample_period(period), seed(s) {
    for (Eigen::Index i = 0; i < amplitude.size(); ++i)
        if (amplitude[i] < 0.0)
            throw ConfigError("NoiseSpec: amplitudes must be >= 0");
    if (!(sample_period > 0.0))
        throw ConfigError("NoiseSpec: sample_period must be > 0");
}

Vec NoiseSpec::sample(double t) const {
    Vec out = Vec::Zero(amplitude.size());
    if (!enabled()) return out;
    const auto k = static_cast<std::uint64_t>(std::floor(t / sample_period));
    const std::uint64_t base = splitmix64(seed) ^ splitmix64(k);
    for (Eigen::Index i = 0; i < amplitude.size(); ++i) {
        const std::uint64_t r = splitmix64(base + static_cast<std::uint64_t>(i));
        const double u01 = static_cast<double>(r >> 11) * 0x1.0p-53;  // [0,1)
        out[i] = amplitude[i] * (2.0 * u01 - 1.0);
    }
    return out;
}

}  // namespace obskit
