#pragma once

#include <string>
#include <vector>

#include "obskit/observers.hpp"
#include "obskit/plants.hpp"

namespace obskit {

/// Observer gains for the Cuk converter study. Defaults reproduce the
/// reference tuning used throughout the tests.
struct CukGains {
    double alpha = 0.5;    // regression filter pole [1/s]
    double gamma = 0.001;  // combined-observer estimator gain
    double Gamma1 = 0.001, Gamma2 = 100.0;  // open-loop-observer estimator gains
    double gamma1 = 50.0, gamma2 = 1.0;     // manifold-observer injection gains
    double r1 = 0.05, r2 = 0.005;           // high-gain small parameters
    double a1 = 2.0, a2 = 1.0, a3 = 2.0, a4 = 1.0;  // high-gain coefficients

    void validate() const;
};

/// Which regression output the combined Cuk observer assembles. The derived
/// variant builds Y from the open-loop coordinate (the one whose constant is
/// being estimated), which makes Y = M theta hold identically; the printed
/// variant uses the contracting coordinate instead.
enum class CukYVariant { derived, printed };

// Shipped design triples (each solves the design PDE exactly).
DesignTriple cuk_kklo_design(const CukParams& p);
DesignTriple cuk_pebo_design(const CukParams& p);
DesignTriple cuk_kpo_design(const CukParams& p);
DesignTriple acad3_design();

// Regression builders paired with the open-loop designs.
RegressorBuilder cuk_pebo_regressor(const CukParams& p, double alpha);
RegressorBuilder cuk_kpo_regressor(const CukParams& p, double alpha,
                                   CukYVariant variant = CukYVariant::derived);
RegressorBuilder acad3_regressor(double alpha, double psi0);

// The six Cuk observers. Ids: kklo, pebo, kkl_pebo, iio, hgo_tv, hgo_lin.
ObserverPtr make_cuk_observer(const std::string& id, const CukParams& p,
                              const CukGains& g,
                              CukYVariant variant = CukYVariant::derived);
std::vector<std::string> cuk_observer_ids();

/// Academic-system observer (combined design with a log-lifted estimator).
/// theta0 is the initial estimator state (must be positive, the estimate map
/// takes its log); psi0 seeds the regressor filter.
ObserverPtr make_acad3_observer(double alpha = 0.5, double gamma = 1.0,
                                double psi0 = 0.1, double theta0 = 1.0);

ObserverPtr make_cascade_observer(const CascadeSpec& spec, double alpha = 1.0,
                                  double gain = 1.0);

// ---------------------------------------------------------------------------
// Closed-form Cuk manifold observer and the two high-gain observers.
// ---------------------------------------------------------------------------

class CukIioObserver : public Observer {
public:
    CukIioObserver(CukParams p, double gamma1, double gamma2);
    std::string id() const override { return "iio"; }
    int chi_dim() const override { return 2; }
    Vec chi0() const override { return Vec::Zero(2); }
    void field(double, const Vec& chi, const Vec& y, const Vec& u,
               Vec& dchi) const override;
    Vec estimate(const Vec& chi, const Vec& y, const Vec& u) const override;
    std::optional<Vec> manifold_value(const Vec& chi, const Vec& y) const override;
    std::optional<Vec> manifold_target(const Vec& x) const override {
        return Vec(x.head(2));
    }

    /// The same observer expressed through the generalized manifold mappings
    /// (beta affine in chi, Q = 0); used to cross-check the closed form.
    IioMappings generic_mappings() const;

private:
    CukParams p_;
    double g1_, g2_;
};

class CukHgoTvObserver : public Observer {
public:
    CukHgoTvObserver(CukParams p, const CukGains& g);
    std::string id() const override { return "hgo_tv"; }
    int chi_dim() const override { return 4; }
    Vec chi0() const override { return Vec::Zero(4); }
    void field(double, const Vec& chi, const Vec& y, const Vec& u,
               Vec& dchi) const override;
    Vec estimate(const Vec& chi, const Vec& y, const Vec& u) const override;

private:
    CukParams p_;
    double r_, a1_, a2_, a3_, a4_;
};

class CukHgoLinObserver : public Observer {
public:
    CukHgoLinObserver(CukParams p, const CukGains& g);
    std::string id() const override { return "hgo_lin"; }
    int chi_dim() const override { return 4; }
    Vec chi0() const override { return Vec::Zero(4); }
    void field(double, const Vec& chi, const Vec& y, const Vec& u,
               Vec& dchi) const override;
    /// Estimate map divides by 1-u; throws DomainError when |1-u| < 1e-3.
    Vec estimate(const Vec& chi, const Vec& y, const Vec& u) const override;

private:
    CukParams p_;
    double r_, a1_, a2_, a3_, a4_;
};

}  // namespace obskit
