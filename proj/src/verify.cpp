#include "obskit/verify.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace obskit {

double halton(std::uint64_t i, unsigned base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

Mat halton_points(int count, const std::vector<std::pair<double, double>>& box) {
    static const unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                      23, 29, 31, 37, 41, 43, 47, 53};
    const int dim = static_cast<int>(box.size());
    if (dim > static_cast<int>(std::size(primes)))
        throw ConfigError("halton_points: too many dimensions");
    Mat pts(count, dim);
    for (int k = 0; k < count; ++k) {
        for (int j = 0; j < dim; ++j) {
            const double v = halton(static_cast<std::uint64_t>(k + 1), primes[j]);
            pts(k, j) = box[j].first + v * (box[j].second - box[j].first);
        }
    }
    return pts;
}

namespace {

Mat lambda_matrix(const DesignTriple& d, const Vec& u) {
    Mat L = d.lambda_diag(u).asDiagonal();
    if (d.has_P()) return d.P.transpose() * L * d.P;
    return L;
}

}  // namespace

PdeCheckReport pde_residual(const PlantModel& plant, const DesignTriple& d,
                            int n_samples,
                            const std::vector<std::pair<double, double>>& box,
                            std::pair<double, double> u_range, PdeMode mode) {
    d.validate();
    if (static_cast<int>(box.size()) != plant.n)
        throw ConfigError("pde_residual: box dimension must equal plant.n");

    if (mode == PdeMode::affine_split) {
        if (!plant.drift || !plant.input_gain)
            throw ConfigError("pde_residual: plant has no affine split");
        if (!d.B_drift || !d.B_gain)
            throw ConfigError("pde_residual: design has no B split");
        Vec ulo(1), uhi(1);
        ulo << u_range.first;
        uhi << u_range.second;
        if ((d.lambda_diag(ulo) - d.lambda_diag(uhi)).cwiseAbs().maxCoeff() > 0.0)
            throw ConfigError("pde_residual: affine mode requires an "
                              "input-independent Lambda");
    }

    auto boxes = box;
    boxes.emplace_back(u_range.first, u_range.second);
    const Mat pts = halton_points(n_samples, boxes);

    PdeCheckReport rep;
    rep.samples = n_samples;
    rep.mode = mode;
    for (int k = 0; k < n_samples; ++k) {
        const Vec x = pts.row(k).head(plant.n);
        Vec u(1);
        u << pts(k, plant.n);
        const Vec y = plant.output(x);
        const Mat J = d.jacobian_phi(x);
        double res;
        double scale = 1.0;
        if (mode == PdeMode::general) {
            const Vec jf = J * plant.field(x, u);
            const Vec lp = lambda_matrix(d, u) * d.phi(x);
            const Vec b = d.B(y, u);
            const Vec r = jf - lp - b;
            res = r.cwiseAbs().maxCoeff();
            scale = std::max({1.0, jf.cwiseAbs().maxCoeff(),
                              lp.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
        } else {
            const Vec rF = J * plant.drift(x) - lambda_matrix(d, u) * d.phi(x)
                           - d.B_drift(y);
            const Vec rg = J * plant.input_gain(x) - d.B_gain(y);
            const double aF = rF.cwiseAbs().maxCoeff();
            const double ag = rg.cwiseAbs().maxCoeff();
            rep.max_residual_drift = std::max(rep.max_residual_drift, aF);
            rep.max_residual_gain = std::max(rep.max_residual_gain, ag);
            res = std::max(aF, ag);
        }
        if (!std::isfinite(res)) {
            rep.finite = false;
            rep.max_residual = res;
            rep.worst_x = x;
            rep.worst_u = u;
            return rep;
        }
        rep.max_residual_rel = std::max(rep.max_residual_rel, res / scale);
        if (res > rep.max_residual) {
            rep.max_residual = res;
            rep.worst_x = x;
            rep.worst_u = u;
        }
    }
    return rep;
}

PdeCheckReport pde_residual(const PlantModel& plant, const DesignTriple& d,
                            int n_samples, PdeMode mode) {
    return pde_residual(plant, d, n_samples, plant.state_box, plant.u_range,
                        mode);
}

ManifoldTrace manifold_monitor(
    const SimTrace& trace,
    const std::function<Vec(const Vec& y, const Vec& chi)>& beta,
    const std::function<Vec(const Vec& x)>& phi) {
    ManifoldTrace out;
    const std::size_t rows = trace.rows();
    out.t = trace.t;
    out.d_M.reserve(rows);
    out.norms.reserve(rows);
    for (std::size_t k = 0; k < rows; ++k) {
        Vec d = beta(trace.y_noisy[k], trace.chi[k]) - phi(trace.x[k]);
        out.norms.push_back(d.cwiseAbs().maxCoeff());
        out.d_M.push_back(std::move(d));
    }
    if (rows >= 2) {
        const std::size_t k10 = rows / 10;
        out.decayed = out.norms.back() < out.norms[k10];
    }
    return out;
}

ManifoldTrace manifold_monitor(const SimTrace& trace, const Observer& obs,
                               const std::function<Vec(const Vec& x)>& phi) {
    return manifold_monitor(
        trace,
        [&obs](const Vec& y, const Vec& chi) {
            auto b = obs.manifold_value(chi, y);
            if (!b) throw ConfigError("manifold_monitor: observer has no "
                                      "registered manifold map");
            return *b;
        },
        phi);
}

EquivalenceResult equivalence_check(
    const PlantModel& plant,
    const std::function<double(double t, const Vec& x)>& control,
    const DesignTriple& design, const RegressorBuilder& reg, const Vec& gain,
    const Vec& x0, double horizon, double dt) {
    design.validate();
    if (design.has_P())
        throw ConfigError("equivalence_check: mixing matrix P not supported");
    const int n = plant.n;
    const int n_xi = design.n_xi;
    const int nth = static_cast<int>(gain.size());
    const int n_open = static_cast<int>(design.open_coords.size());
    if (nth != n_open)
        throw ConfigError("equivalence_check: gain dimension must match the "
                          "open block");
    const int nf = reg.n_filters();
    const int est_off = n;             // [theta | z] when the open block exists
    const int kpo_off = n + nth + nf;
    const int iio_off = kpo_off + n_xi;
    const int total = iio_off + n_xi;

    Vec z0 = Vec::Zero(total);
    z0.head(n) = x0;
    if (nth > 0) z0.segment(n + nth, nf) = reg.z0();

    IioMappings maps;
    maps.beta.n_chi = n_xi;
    maps.beta.n_z = n_xi;
    maps.beta.jac_chi = [n_xi](const Vec&, const Vec&) {
        return Mat(Mat::Identity(n_xi, n_xi));
    };
    maps.beta.jac_y = [n_xi](const Vec& y, const Vec&) {
        return Mat(Mat::Zero(n_xi, y.size()));
    };
    maps.phi = design.phi;
    maps.phi_jacobian = design.phi_jacobian;
    maps.phi_left = design.phi_left;

    auto field = [&](double t, const Vec& z, Vec& dz) {
        const Vec x = z.head(n);
        Vec u(1);
        u[0] = control(t, x);
        const Vec y = plant.output(x);
        dz.head(n) = plant.field(x, u);

        const Vec xi_kpo = z.segment(kpo_off, n_xi);
        Vec theta(nth);
        if (nth > 0)
            detail::regressor_field(reg, gain, y, xi_kpo, u, z, est_off, dz,
                                    &theta);

        const Vec lam = design.lambda_diag(u);
        const Vec b = design.B(y, u);
        for (int i = 0; i < n_xi; ++i) {
            if (lam[i] != 0.0) dz[kpo_off + i] = lam[i] * z[kpo_off + i] + b[i];
            else dz[kpo_off + i] = b[i];
        }

        // Manifold-observer route with the estimator output entering as a
        // measured signal; beta is affine with identity chi-Jacobian.
        maps.beta.value = [&design, &theta](const Vec&, const Vec& chi) {
            Vec w = chi;
            for (std::size_t j = 0; j < design.open_coords.size(); ++j)
                w[design.open_coords[j]] += theta[static_cast<Eigen::Index>(j)];
            return w;
        };
        const Vec chi_iio = z.segment(iio_off, n_xi);
        dz.segment(iio_off, n_xi) =
            iio_field_eval(plant, maps, t, chi_iio, y, u);
    };

    const auto steps = static_cast<long>(std::llround(horizon / dt));
    EquivalenceResult result;
    result.horizon = horizon;
    result.steps = static_cast<int>(steps);
    Vec z = z0;
    Rk4Workspace ws;
    ws.resize(total);
    double dev = 0.0;
    for (long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        rk4_step_inplace(field, z, t, dt, ws);
        if (!all_finite(z))
            throw IntegrationError("equivalence_check: non-finite state", t);
        const double d = (z.segment(kpo_off, n_xi) - z.segment(iio_off, n_xi))
                             .cwiseAbs().maxCoeff();
        dev = std::max(dev, d);
    }
    result.max_deviation = dev;
    return result;
}

PeCheckResult pe_check(const std::vector<double>& t,
                       const std::vector<Vec>& b_trace, double T,
                       double delta) {
    if (t.size() != b_trace.size() || t.size() < 2)
        throw ConfigError("pe_check: need a trace of at least two samples");
    const double dt = t[1] - t[0];
    const auto L = static_cast<std::size_t>(std::llround(T / dt));
    if (L < 1 || L >= t.size())
        throw ConfigError("pe_check: window longer than the trace");

    const int nb = static_cast<int>(b_trace[0].size());
    // Trapezoid prefix sums of b b^T.
    std::vector<Mat> prefix(t.size(), Mat::Zero(nb, nb));
    for (std::size_t k = 1; k < t.size(); ++k) {
        const Mat g0 = b_trace[k - 1] * b_trace[k - 1].transpose();
        const Mat g1 = b_trace[k] * b_trace[k].transpose();
        prefix[k] = prefix[k - 1] + 0.5 * dt * (g0 + g1);
    }
    PeCheckResult res;
    res.satisfied = true;
    res.min_window_eig = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + L < t.size(); ++k) {
        const Mat W = prefix[k + L] - prefix[k];
        Eigen::SelfAdjointEigenSolver<Mat> es(W);
        const double emin = es.eigenvalues().minCoeff();
        res.min_window_eig = std::min(res.min_window_eig, emin);
        if (emin < delta) res.satisfied = false;
        ++res.windows;
    }
    return res;
}

}  // namespace obskit
