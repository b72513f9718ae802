#include "obskit/observers.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace obskit {

Mat DesignTriple::jacobian_phi(const Vec& x) const {
    if (phi_jacobian) return phi_jacobian(x);
    return fd_jacobian(phi, x);
}

void DesignTriple::validate() const {
    if (n_xi < 1) throw ConfigError("DesignTriple: n_xi must be >= 1");
    if (!lambda_diag || !B || !phi || !phi_left)
        throw ConfigError("DesignTriple: lambda_diag, B, phi, phi_left required");
    for (int i : open_coords)
        if (i < 0 || i >= n_xi)
            throw ConfigError("DesignTriple: open coordinate index out of range");
    // Zero eigenvalues exactly on the open block, strictly negative elsewhere.
    const Vec lam = lambda_diag(Vec::Zero(1));
    if (lam.size() != n_xi)
        throw ConfigError("DesignTriple: lambda_diag dimension must be n_xi");
    for (int i = 0; i < n_xi; ++i) {
        const bool open = std::find(open_coords.begin(), open_coords.end(), i)
                          != open_coords.end();
        if (open && lam[i] != 0.0)
            throw ConfigError("DesignTriple: open coordinate has a nonzero "
                              "eigenvalue");
        if (!open && !(lam[i] < 0.0))
            throw ConfigError("DesignTriple: contracting eigenvalues must be "
                              "negative");
    }
    if (has_P()) {
        if (P.rows() != n_xi || P.cols() != n_xi)
            throw ConfigError("DesignTriple: P must be n_xi x n_xi");
        const double err = (P.transpose() * P - Mat::Identity(n_xi, n_xi))
                               .cwiseAbs().maxCoeff();
        if (err > 1e-12) throw ConfigError("DesignTriple: P is not orthogonal");
    }
}

Vec RegressorBuilder::z0() const {
    Vec z(n_filters());
    for (int j = 0; j < n_filters(); ++j) z[j] = channels[j].z0;
    return z;
}

Vec observer_step(const Observer& obs, const Vec& chi, const Vec& y,
                  const Vec& u, double t, double dt) {
    Vec dchi(chi.size());
    Vec out = rk4_step([&](double ts, const Vec& c) {
        Vec d(c.size());
        obs.field(ts, c, y, u, d);
        return d;
    }, chi, t, dt);
    (void)dchi;
    return out;
}

namespace detail {

/// Shared filter/estimator evaluation so the specialized observers and the
/// combined one produce identical arithmetic.
/// chi tail layout: [theta (n_theta) | z (n_filters)] starting at `offset`.
void regressor_field(const RegressorBuilder& reg, const Vec& gain,
                     const Vec& y, const Vec& xi, const Vec& u, const Vec& chi,
                     int offset, Vec& dchi, Vec* theta_out) {
    const int nth = static_cast<int>(gain.size());
    const int nf = reg.n_filters();
    const Vec theta = chi.segment(offset, nth);
    Vec zf(nf), ww(nf);
    for (int j = 0; j < nf; ++j) {
        const double zj = chi[offset + nth + j];
        const double in = reg.channels[j].input(y, xi, u);
        const double a = reg.channels[j].alpha;
        zf[j] = zj;
        ww[j] = a * (in - zj);
        dchi[offset + nth + j] = a * (in - zj);
    }
    Vec Y(reg.n_y);
    Mat M(reg.n_y, reg.n_theta);
    reg.assemble(zf, ww, y, xi, u, Y, M);
    dchi.segment(offset, nth) = gain.asDiagonal() * (M.transpose() * (Y - M * theta));
    if (theta_out) *theta_out = theta;
}

Vec default_vec(const Vec& given, int n) {
    if (given.size() == 0) return Vec::Zero(n);
    if (given.size() != n)
        throw ConfigError("observer: initial state has wrong dimension");
    return given;
}

}  // namespace detail

// --------------------------- KkloObserver ---------------------------------

KkloObserver::KkloObserver(std::string id, DesignTriple d, Vec xi0)
    : id_(std::move(id)), d_(std::move(d)) {
    d_.validate();
    if (d_.q() != d_.n_xi)
        throw ConfigError("KkloObserver: design has open coordinates; use the "
                          "combined observer");
    xi0_ = detail::default_vec(xi0, d_.n_xi);
}

void KkloObserver::field(double, const Vec& chi, const Vec& y, const Vec& u,
                         Vec& dchi) const {
    const Vec lam = d_.lambda_diag(u);
    const Vec b = d_.B(y, u);
    for (int i = 0; i < d_.n_xi; ++i) dchi[i] = lam[i] * chi[i] + b[i];
}

Vec KkloObserver::estimate(const Vec& chi, const Vec& y, const Vec&) const {
    return d_.phi_left(chi, y);
}

// --------------------------- PeboObserver ---------------------------------

PeboObserver::PeboObserver(std::string id, DesignTriple d, RegressorBuilder reg,
                           Vec gain, Vec theta0, Vec xi0)
    : id_(std::move(id)), d_(std::move(d)), reg_(std::move(reg)),
      gain_(std::move(gain)) {
    d_.validate();
    if (d_.q() != 0)
        throw ConfigError("PeboObserver: design has contracting coordinates; "
                          "use the combined observer");
    if (gain_.size() != d_.n_xi)
        throw ConfigError("PeboObserver: estimator gain dimension must equal n_xi");
    if (reg_.n_theta != d_.n_xi)
        throw ConfigError("PeboObserver: regressor column count must equal n_xi");
    theta0_ = detail::default_vec(theta0, static_cast<int>(gain_.size()));
    xi0_ = detail::default_vec(xi0, d_.n_xi);
}

int PeboObserver::chi_dim() const {
    return d_.n_xi + static_cast<int>(gain_.size()) + reg_.n_filters();
}

Vec PeboObserver::chi0() const {
    Vec c(chi_dim());
    c << xi0_, theta0_, reg_.z0();
    return c;
}

void PeboObserver::field(double, const Vec& chi, const Vec& y, const Vec& u,
                         Vec& dchi) const {
    const Vec xi = chi.head(d_.n_xi);
    const Vec b = d_.B(y, u);
    for (int i = 0; i < d_.n_xi; ++i) dchi[i] = b[i];
    detail::regressor_field(reg_, gain_, y, xi, u, chi, d_.n_xi, dchi, nullptr);
}

Vec PeboObserver::theta_of(const Vec& chi) const {
    return chi.segment(d_.n_xi, gain_.size());
}

Vec PeboObserver::estimate(const Vec& chi, const Vec& y, const Vec&) const {
    Vec w = chi.head(d_.n_xi);
    const Vec th = theta_of(chi);
    for (int i = 0; i < d_.n_xi; ++i) w[i] += th[i];
    return d_.phi_left(w, y);
}

std::optional<Vec> PeboObserver::manifold_value(const Vec& chi, const Vec&) const {
    Vec w = chi.head(d_.n_xi);
    const Vec th = theta_of(chi);
    for (int i = 0; i < d_.n_xi; ++i) w[i] += th[i];
    return w;
}

// --------------------------- KklPeboObserver ------------------------------

KklPeboObserver::KklPeboObserver(std::string id, DesignTriple d,
                                 RegressorBuilder reg, Vec gain, Vec theta0,
                                 Vec xi0, std::function<Vec(const Vec&)> tmap)
    : id_(std::move(id)), d_(std::move(d)), reg_(std::move(reg)),
      gain_(std::move(gain)), theta_map_(std::move(tmap)) {
    d_.validate();
    const int n_open = static_cast<int>(d_.open_coords.size());
    if (n_open > 0) {
        if (gain_.size() != n_open)
            throw ConfigError("KklPeboObserver: estimator gain dimension must "
                              "equal the open block size");
        if (reg_.n_theta != n_open)
            throw ConfigError("KklPeboObserver: regressor columns must equal "
                              "the open block size");
    } else if (gain_.size() != 0) {
        throw ConfigError("KklPeboObserver: estimator configured but the "
                          "design has no open coordinates");
    }
    theta0_ = detail::default_vec(theta0, n_open);
    xi0_ = detail::default_vec(xi0, d_.n_xi);
}

int KklPeboObserver::chi_dim() const {
    return d_.n_xi + static_cast<int>(gain_.size()) + reg_.n_filters();
}

Vec KklPeboObserver::chi0() const {
    Vec c(chi_dim());
    if (gain_.size() == 0) c << xi0_;
    else c << xi0_, theta0_, reg_.z0();
    return c;
}

void KklPeboObserver::field(double, const Vec& chi, const Vec& y, const Vec& u,
                            Vec& dchi) const {
    const Vec xi = chi.head(d_.n_xi);
    const Vec lam = d_.lambda_diag(u);
    Vec b = d_.B(y, u);
    if (d_.has_P()) b = d_.P * b;
    for (int i = 0; i < d_.n_xi; ++i) {
        if (lam[i] != 0.0) dchi[i] = lam[i] * chi[i] + b[i];
        else dchi[i] = b[i];
    }
    if (gain_.size() > 0)
        detail::regressor_field(reg_, gain_, y, xi, u, chi, d_.n_xi, dchi, nullptr);
}

Vec KklPeboObserver::theta_of(const Vec& chi) const {
    return chi.segment(d_.n_xi, gain_.size());
}

std::optional<Vec> KklPeboObserver::manifold_value(const Vec& chi,
                                                   const Vec&) const {
    // The estimate lifts the open coordinates in the design frame, then the
    // orthogonal mixing (when present) rotates back: w = P^T (xi + lift).
    Vec w = chi.head(d_.n_xi);
    if (gain_.size() > 0) {
        Vec th = theta_of(chi);
        if (theta_map_) th = theta_map_(th);
        for (std::size_t j = 0; j < d_.open_coords.size(); ++j)
            w[d_.open_coords[j]] += th[j];
    }
    if (d_.has_P()) w = d_.P.transpose() * w;
    return w;
}

Vec KklPeboObserver::estimate(const Vec& chi, const Vec& y, const Vec&) const {
    return d_.phi_left(*manifold_value(chi, y), y);
}

// --------------------------- IioGenericObserver ---------------------------

Vec iio_field_eval(const PlantModel& plant, const IioMappings& maps, double t,
                   const Vec& chi, const Vec& y, const Vec& u) {
    const BetaMap& beta = maps.beta;
    const Mat J_chi = beta.jac_chi
        ? beta.jac_chi(y, chi)
        : fd_jacobian([&](const Vec& c) { return beta.value(y, c); }, chi);

    Eigen::JacobiSVD<Mat> svd(J_chi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    const double tol = maps.rank_tol_rel * smax;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > tol && sv[i] > 0.0) ++rank;
    if (rank < beta.n_z) {
        std::ostringstream os;
        os << "manifold rank " << rank << " < " << beta.n_z << " at t=" << t
           << ", chi=[" << chi.transpose() << "]";
        throw SingularManifoldError(os.str(), t);
    }
    Vec inv_sv(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        inv_sv[i] = sv[i] > tol ? 1.0 / sv[i] : 0.0;
    const Mat pinv = svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();

    const Vec xhat = maps.phi_left(beta.value(y, chi), y);
    const Vec f = plant.field(xhat, u);

    const Mat J_y = beta.jac_y
        ? beta.jac_y(y, chi)
        : fd_jacobian([&](const Vec& yy) { return beta.value(yy, chi); }, y);
    Mat J_h;
    if (!plant.output_indices.empty()) {
        J_h = Mat::Zero(plant.p, plant.n);
        for (int i = 0; i < plant.p; ++i) J_h(i, plant.output_indices[i]) = 1.0;
    } else {
        J_h = fd_jacobian(plant.output, xhat);
    }
    const Mat J_phi = maps.phi_jacobian
        ? maps.phi_jacobian(xhat)
        : fd_jacobian(maps.phi, xhat);

    Vec dchi = -pinv * ((J_y * J_h - J_phi) * f);
    if (maps.Q) {
        const Vec q = maps.Q(y, chi, u);
        dchi += q - pinv * (J_chi * q);
    }
    return dchi;
}

IioGenericObserver::IioGenericObserver(std::string id, PlantModel plant,
                                       IioMappings maps, Vec chi0)
    : id_(std::move(id)), plant_(std::move(plant)), maps_(std::move(maps)) {
    if (maps_.beta.n_chi < maps_.beta.n_z)
        throw ConfigError("IioGenericObserver: need n_chi >= n_z");
    chi0_ = detail::default_vec(chi0, maps_.beta.n_chi);
}

void IioGenericObserver::field(double t, const Vec& chi, const Vec& y,
                               const Vec& u, Vec& dchi) const {
    dchi = iio_field_eval(plant_, maps_, t, chi, y, u);
}

Vec IioGenericObserver::estimate(const Vec& chi, const Vec& y,
                                 const Vec&) const {
    return maps_.phi_left(maps_.beta.value(y, chi), y);
}

// --------------------------- CascadeObserver ------------------------------

CascadeObserver::CascadeObserver(std::string id, CascadeSpec spec, double alpha,
                                 Vec gain, Vec chi0_overrides)
    : id_(std::move(id)), spec_(std::move(spec)), alpha_(alpha),
      gain_(std::move(gain)) {
    if (!(alpha_ > 0)) throw ConfigError("CascadeObserver: alpha must be > 0");
    if (gain_.size() != spec_.n4)
        throw ConfigError("CascadeObserver: gain dimension must equal n4");
    chi0_ = detail::default_vec(chi0_overrides, chi_dim());
}

int CascadeObserver::chi_dim() const {
    // xhat2, xhat3, xi, theta, filters: y_k, f1_k, b^T xi, b (n4 entries)
    return spec_.n2 + spec_.n3 + spec_.n4 + spec_.n4 + 3 + spec_.n4;
}

Vec CascadeObserver::chi0() const { return chi0_; }

void CascadeObserver::field(double, const Vec& chi, const Vec& y, const Vec& u,
                            Vec& dchi) const {
    const int n2 = spec_.n2, n3 = spec_.n3, n4 = spec_.n4;
    const Vec x2 = chi.segment(0, n2);
    const Vec x3 = chi.segment(n2, n3);
    const Vec xi = chi.segment(n2 + n3, n4);
    const Vec th = chi.segment(n2 + n3 + n4, n4);
    const int zoff = n2 + n3 + 2 * n4;

    dchi.segment(0, n2) = spec_.A2 * x2 + spec_.f2(y, u);
    dchi.segment(n2, n3) = spec_.A3 * x3 + spec_.f3(y, x2, u);
    dchi.segment(n2 + n3, n4) = spec_.f4(y, x2, x3, u);

    const Vec b = spec_.b(y, x2, x3, u);
    const double f1k = spec_.f1(y, x2, x3, u)[spec_.k - 1];

    // Filter channels: 0 -> y_k, 1 -> f1_k, 2 -> b^T xi, 3.. -> entries of b.
    const double in0 = y[spec_.k - 1];
    const double in1 = f1k;
    const double in2 = b.dot(xi);
    dchi[zoff + 0] = alpha_ * (in0 - chi[zoff + 0]);
    dchi[zoff + 1] = alpha_ * (in1 - chi[zoff + 1]);
    dchi[zoff + 2] = alpha_ * (in2 - chi[zoff + 2]);
    for (int j = 0; j < n4; ++j)
        dchi[zoff + 3 + j] = alpha_ * (b[j] - chi[zoff + 3 + j]);

    const double Yhat = alpha_ * (in0 - chi[zoff + 0])  // W[y_k]
                        - chi[zoff + 1]                  // F[f1_k]
                        - chi[zoff + 2];                 // F[b^T xi]
    const Vec psi = chi.segment(zoff + 3, n4);           // F[b]
    dchi.segment(n2 + n3 + n4, n4) =
        gain_.asDiagonal() * (psi * (Yhat - psi.dot(th)));
}

Vec CascadeObserver::theta_of(const Vec& chi) const {
    return chi.segment(spec_.n2 + spec_.n3 + spec_.n4, spec_.n4);
}

Vec CascadeObserver::regressor(const Vec& chi, const Vec& y, const Vec& u) const {
    return spec_.b(y, xhat2_of(chi), xhat3_of(chi), u);
}

Vec CascadeObserver::estimate(const Vec& chi, const Vec& y, const Vec&) const {
    const int n1 = spec_.n1;
    Vec xhat(n1 + spec_.n2 + spec_.n3 + spec_.n4);
    xhat.head(n1) = y;
    xhat.segment(n1, spec_.n2) = xhat2_of(chi);
    xhat.segment(n1 + spec_.n2, spec_.n3) = xhat3_of(chi);
    xhat.segment(n1 + spec_.n2 + spec_.n3, spec_.n4) =
        xi_of(chi) + theta_of(chi);
    return xhat;
}

}  // namespace obskit
