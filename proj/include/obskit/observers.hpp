#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "obskit/numerics.hpp"
#include "obskit/plants.hpp"

namespace obskit {

/// Candidate solution (phi, Lambda, B, phi_left) of the design equation
///   grad(phi)^T f(x,u) = Lambda phi(x) + B(h(x),u),
/// with Lambda diagonal; zero diagonal entries form the open-loop block and
/// negative ones the contracting block. The diagonal may depend on u (the Cuk
/// contracting design uses a duty-dependent eigenvalue).
struct DesignTriple {
    int n_xi = 0;
    std::function<Vec(const Vec& u)> lambda_diag;
    std::vector<int> open_coords;  // indices with zero eigenvalue
    std::function<Vec(const Vec& y, const Vec& u)> B;

    std::function<Vec(const Vec& x)> phi;           // full state -> R^{n_xi}
    std::function<Mat(const Vec& x)> phi_jacobian;  // analytic; empty -> fd
    std::function<Vec(const Vec& w, const Vec& y)> phi_left;  // -> full state

    /// Orthogonal mixing matrix; size 0 means identity.
    Mat P;

    /// Optional split B(y,u) = B_drift(y) + B_gain(y) u for input-affine
    /// plants (scalar input).
    std::function<Vec(const Vec& y)> B_drift;
    std::function<Vec(const Vec& y)> B_gain;

    int q() const { return n_xi - static_cast<int>(open_coords.size()); }
    bool has_P() const { return P.size() > 0; }
    Mat jacobian_phi(const Vec& x) const;
    void validate() const;
};

/// Bank of first-order filters plus the rule assembling the regression pair
/// (Y, M) from their outputs. All filters advance on the shared clock.
struct RegressorBuilder {
    struct Channel {
        double alpha = 1.0;
        double z0 = 0.0;
        /// Filter input as a function of the measured output, the observer's
        /// dynamic-extension state, and the control.
        std::function<double(const Vec& y, const Vec& xi, const Vec& u)> input;
    };
    std::vector<Channel> channels;
    int n_y = 0;      // rows of Y
    int n_theta = 0;  // columns of M

    /// zf: F-outputs (filter states), ww: W-outputs alpha*(input - z).
    std::function<void(const Vec& zf, const Vec& ww, const Vec& y,
                       const Vec& xi, const Vec& u, Vec& Y, Mat& M)>
        assemble;

    int n_filters() const { return static_cast<int>(channels.size()); }
    Vec z0() const;
};

/// Observers are stateless descriptors; the internal state chi is owned by
/// the caller (the simulation loop keeps it inside one joint state vector so
/// every subsystem sees stage-consistent signals).
class Observer {
public:
    virtual ~Observer() = default;
    virtual std::string id() const = 0;
    virtual int chi_dim() const = 0;
    virtual Vec chi0() const = 0;
    virtual void field(double t, const Vec& chi, const Vec& y, const Vec& u,
                       Vec& dchi) const = 0;
    /// Full plant-state estimate (dimension n); measured states pass through.
    virtual Vec estimate(const Vec& chi, const Vec& y, const Vec& u) const = 0;

    virtual int theta_dim() const { return 0; }
    virtual Vec theta_of(const Vec&) const { return Vec(); }

    /// Manifold map beta(y,chi) with image comparable to phi(x); empty
    /// optional when the observer has no registered manifold.
    virtual std::optional<Vec> manifold_value(const Vec& /*chi*/,
                                              const Vec& /*y*/) const {
        return std::nullopt;
    }
    /// phi(x): the target the manifold map chases (same image space).
    virtual std::optional<Vec> manifold_target(const Vec& /*x*/) const {
        return std::nullopt;
    }
    virtual const DesignTriple* design() const { return nullptr; }

    /// Raw regressor vector (the signal whose excitation matters), when the
    /// observer defines one.
    virtual Vec regressor(const Vec& /*chi*/, const Vec& /*y*/,
                          const Vec& /*u*/) const {
        return Vec();
    }
};

using ObserverPtr = std::shared_ptr<const Observer>;

/// Convenience stepper for unit tests: advances chi one RK4 step with y and u
/// frozen over the step.
Vec observer_step(const Observer& obs, const Vec& chi, const Vec& y,
                  const Vec& u, double t, double dt);

namespace detail {
/// Filter + estimator derivatives shared by the open-loop and combined
/// observers (identical arithmetic keeps their degenerate traces bit-equal).
/// chi tail layout: [theta (gain.size()) | z (filters)] starting at offset.
void regressor_field(const RegressorBuilder& reg, const Vec& gain,
                     const Vec& y, const Vec& xi, const Vec& u, const Vec& chi,
                     int offset, Vec& dchi, Vec* theta_out);
}  // namespace detail

// ---------------------------------------------------------------------------
// Contracting-design observer: xi_dot = Lambda xi + B(y,u), xhat = phi_left.
// Requires every diagonal entry negative (q = n_xi).
// ---------------------------------------------------------------------------
class KkloObserver : public Observer {
public:
    KkloObserver(std::string id, DesignTriple d, Vec xi0 = Vec());
    std::string id() const override { return id_; }
    int chi_dim() const override { return d_.n_xi; }
    Vec chi0() const override { return xi0_; }
    void field(double, const Vec& chi, const Vec& y, const Vec& u,
               Vec& dchi) const override;
    Vec estimate(const Vec& chi, const Vec& y, const Vec& u) const override;
    std::optional<Vec> manifold_value(const Vec& chi, const Vec&) const override {
        return chi;
    }
    std::optional<Vec> manifold_target(const Vec& x) const override {
        return d_.phi(x);
    }
    const DesignTriple* design() const override { return &d_; }

private:
    std::string id_;
    DesignTriple d_;
    Vec xi0_;
};

// ---------------------------------------------------------------------------
// Open-loop design observer: xi_dot = B(y,u), xhat = phi_left(xi + theta_hat),
// with theta_hat from a gradient estimator over the filtered regression.
// Requires every diagonal entry zero (q = 0).
// chi layout: [xi | theta_hat | filter states].
// ---------------------------------------------------------------------------
class PeboObserver : public Observer {
public:
    PeboObserver(std::string id, DesignTriple d, RegressorBuilder reg, Vec gain,
                 Vec theta0 = Vec(), Vec xi0 = Vec());
    std::string id() const override { return id_; }
    int chi_dim() const override;
    Vec chi0() const override;
    void field(double, const Vec& chi, const Vec& y, const Vec& u,
               Vec& dchi) const override;
    Vec estimate(const Vec& chi, const Vec& y, const Vec& u) const override;
    int theta_dim() const override { return static_cast<int>(gain_.size()); }
    Vec theta_of(const Vec& chi) const override;
    std::optional<Vec> manifold_value(const Vec& chi, const Vec& y) const override;
    std::optional<Vec> manifold_target(const Vec& x) const override {
        return d_.phi(x);
    }
    const DesignTriple* design() const override { return &d_; }

private:
    std::string id_;
    DesignTriple d_;
    RegressorBuilder reg_;
    Vec gain_, theta0_, xi0_;
};

// ---------------------------------------------------------------------------
// Combined observer: contracting block and open block advance side by side,
// the estimator only lifts the open coordinates. Degenerates to the two
// observers above at q = n_xi and q = 0. An orthogonal P switches in the
// mixed variant xi_dot = Lambda xi + P B, xhat = phi_left(P^T xi + lift).
// chi layout: [xi | theta_hat | filter states].
// ---------------------------------------------------------------------------
class KklPeboObserver : public Observer {
public:
    /// theta_map transforms the estimator state before it is added to the
    /// open coordinates (identity by default; the academic design uses log).
    KklPeboObserver(std::string id, DesignTriple d, RegressorBuilder reg,
                    Vec gain, Vec theta0 = Vec(), Vec xi0 = Vec(),
                    std::function<Vec(const Vec&)> theta_map = {});
    std::string id() const override { return id_; }
    int chi_dim() const override;
    Vec chi0() const override;
    void field(double, const Vec& chi, const Vec& y, const Vec& u,
               Vec& dchi) const override;
    Vec estimate(const Vec& chi, const Vec& y, const Vec& u) const override;
    int theta_dim() const override { return static_cast<int>(gain_.size()); }
    Vec theta_of(const Vec& chi) const override;
    std::optional<Vec> manifold_value(const Vec& chi, const Vec& y) const override;
    std::optional<Vec> manifold_target(const Vec& x) const override {
        return d_.phi(x);
    }
    const DesignTriple* design() const override { return &d_; }

private:
    std::string id_;
    DesignTriple d_;
    RegressorBuilder reg_;
    Vec gain_, theta0_, xi0_;
    std::function<Vec(const Vec&)> theta_map_;
};

// ---------------------------------------------------------------------------
// Generalized manifold observer:
//   chi_dot = -pinv(J_chi) (J_y grad(h)^T(xhat) - grad(phi)^T(xhat)) f(xhat,u)
//             + (I - pinv(J_chi) J_chi) Q(y,chi,u),
//   xhat = phi_left(beta(y,chi), y),
// with J_chi = grad_chi(beta)^T full row rank (checked via singular values).
// ---------------------------------------------------------------------------
struct BetaMap {
    int n_chi = 0;
    int n_z = 0;
    std::function<Vec(const Vec& y, const Vec& chi)> value;
    std::function<Mat(const Vec& y, const Vec& chi)> jac_chi;  // empty -> fd
    std::function<Mat(const Vec& y, const Vec& chi)> jac_y;    // empty -> fd
};

struct IioMappings {
    BetaMap beta;
    std::function<Vec(const Vec& x)> phi;
    std::function<Mat(const Vec& x)> phi_jacobian;  // empty -> fd
    std::function<Vec(const Vec& w, const Vec& y)> phi_left;
    std::function<Vec(const Vec& y, const Vec& chi, const Vec& u)> Q;  // optional
    double rank_tol_rel = 1e-10;
};

/// One field evaluation of the generalized manifold observer. Throws
/// SingularManifoldError when the rank of grad_chi(beta)^T drops below n_z.
Vec iio_field_eval(const PlantModel& plant, const IioMappings& maps, double t,
                   const Vec& chi, const Vec& y, const Vec& u);

class IioGenericObserver : public Observer {
public:
    IioGenericObserver(std::string id, PlantModel plant, IioMappings maps,
                       Vec chi0 = Vec());
    std::string id() const override { return id_; }
    int chi_dim() const override { return maps_.beta.n_chi; }
    Vec chi0() const override { return chi0_; }
    void field(double t, const Vec& chi, const Vec& y, const Vec& u,
               Vec& dchi) const override;
    Vec estimate(const Vec& chi, const Vec& y, const Vec& u) const override;
    std::optional<Vec> manifold_value(const Vec& chi, const Vec& y) const override {
        return maps_.beta.value(y, chi);
    }
    std::optional<Vec> manifold_target(const Vec& x) const override {
        return maps_.phi(x);
    }

private:
    std::string id_;
    PlantModel plant_;
    IioMappings maps_;
    Vec chi0_;
};

// ---------------------------------------------------------------------------
// Observer for the cascade class: copies of the contracting blocks, open
// integration of the last block, and a gradient estimator fed by filtered
// regressions of the k-th output channel.
// chi layout: [xhat2 | xhat3 | xi (n4) | theta_hat (n4) | filter states].
// Filters: one on y_k (shared F/W state), one on f1_k(y,xhat2,xhat3,u),
// one on b^T xi, and n4 on the entries of b.
// ---------------------------------------------------------------------------
class CascadeObserver : public Observer {
public:
    CascadeObserver(std::string id, CascadeSpec spec, double alpha, Vec gain,
                    Vec chi0_overrides = Vec());
    std::string id() const override { return id_; }
    int chi_dim() const override;
    Vec chi0() const override;
    void field(double, const Vec& chi, const Vec& y, const Vec& u,
               Vec& dchi) const override;
    Vec estimate(const Vec& chi, const Vec& y, const Vec& u) const override;
    int theta_dim() const override { return spec_.n4; }
    Vec theta_of(const Vec& chi) const override;
    Vec regressor(const Vec& chi, const Vec& y, const Vec& u) const override;
    std::optional<Vec> manifold_value(const Vec& chi, const Vec&) const override {
        return Vec(xi_of(chi) + theta_of(chi));
    }
    std::optional<Vec> manifold_target(const Vec& x) const override {
        return Vec(x.tail(spec_.n4));
    }

    Vec xhat2_of(const Vec& chi) const { return chi.segment(0, spec_.n2); }
    Vec xhat3_of(const Vec& chi) const { return chi.segment(spec_.n2, spec_.n3); }
    Vec xi_of(const Vec& chi) const {
        return chi.segment(spec_.n2 + spec_.n3, spec_.n4);
    }
    const CascadeSpec& spec_ref() const { return spec_; }

private:
    std::string id_;
    CascadeSpec spec_;
    double alpha_;
    Vec gain_;
    Vec chi0_;
};

}  // namespace obskit
