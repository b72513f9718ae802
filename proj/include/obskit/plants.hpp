#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "obskit/numerics.hpp"

namespace obskit {

/// A continuous-time plant xdot = f(x,u), y = h(x). Immutable after
/// construction; shareable across concurrent simulations.
struct PlantModel {
    int n = 0;  // state dimension
    int m = 0;  // input dimension
    int p = 0;  // output dimension

    std::function<Vec(const Vec& x, const Vec& u)> field;
    std::function<Vec(const Vec& x)> output;
    std::map<std::string, double> params;

    /// Per-axis sampling interval used by the verification module.
    std::vector<std::pair<double, double>> state_box;
    std::pair<double, double> u_range{0.0, 0.0};

    /// Optional input-affine split f(x,u) = drift(x) + input_gain(x) * u
    /// (single input). Present for the Cuk converter.
    std::function<Vec(const Vec& x)> drift;
    std::function<Vec(const Vec& x)> input_gain;

    /// Indices of the measured states when outputs are partial states.
    std::vector<int> output_indices;

    Vec measure(const Vec& x) const { return output(x); }
};

// ---------------------------------------------------------------------------
// Cuk converter (averaged model). State layout col(x1, x2, y1, y2) with
// x = col(i1, v4) unmeasured and y = col(v2, i3) measured.
// ---------------------------------------------------------------------------

struct CukParams {
    double L1 = 10e-3;    // [H]
    double C2 = 22.0e-6;  // [F]
    double L3 = 10e-3;    // [H]
    double C4 = 22.9e-6;  // [F]
    double E = 12.0;      // [V]
    double G = 0.0447;    // [S]

    static CukParams paper();
    void validate() const;
};

/// Duty-ratio derivatives of the averaged model, states (x1, x2, y1, y2).
Vec cuk_field(const Vec& xfull, double u, const CukParams& p);

/// Closed-form operating point for a constant duty ratio u:
/// returns (x1*, x2*, y1*, y2*).
Vec cuk_equilibrium_for_duty(double u, const CukParams& p);

/// Output-voltage setpoint schedule plus the saturating damping law.
struct ControlSchedule {
    std::vector<std::pair<double, double>> vd_segments;  // (start time, Vd)
    double lambda_c = 0.1;
    double u_min = 0.05;
    double u_max = 0.95;

    static ControlSchedule cuk_default();
    void validate() const;
    double vd_at(double t) const;
};

/// Full-state stabilizing feedback
///   u = |Vd|/(|Vd|+E) + lambda (G|Vd| v2 + E(x2-x1)) / (1 + (...)^2),
/// clamped to [u_min, u_max].
double cuk_control(const Vec& xfull, double t, const ControlSchedule& sched,
                   const CukParams& p);

PlantModel make_cuk_plant(const CukParams& p = CukParams::paper());

// ---------------------------------------------------------------------------
// Three-state academic system, y = x1.
// ---------------------------------------------------------------------------

Vec acad3_field(const Vec& x, double u);
PlantModel make_acad3_plant();

/// Equilibrium of the academic system under u = -1; x1* is the real root of
/// x^3 + x - 1 = 0.
Vec acad3_equilibrium();

// ---------------------------------------------------------------------------
// Cascade class: four blocks with Hurwitz middle matrices, y = x1, and the
// k-th entry of S factorized as b^T(x1,x2,x3,u) x4.
// ---------------------------------------------------------------------------

struct CascadeSpec {
    int n1 = 1, n2 = 1, n3 = 1, n4 = 1;
    Mat A2, A3;
    std::function<Vec(const Vec& x1, const Vec& x2, const Vec& x3, const Vec& u)> f1;
    std::function<Vec(const Vec& x1, const Vec& u)> f2;
    std::function<Vec(const Vec& x1, const Vec& x2, const Vec& u)> f3;
    std::function<Vec(const Vec& x1, const Vec& x2, const Vec& x3, const Vec& u)> f4;
    std::function<Vec(const Vec& x1, const Vec& x2, const Vec& x3, const Vec& u)> b;
    int k = 1;  // 1-based row of S carrying b^T x4
    bool hurwitz_certified = false;  // skip the eigenvalue check when set

    /// Shipped demo: all blocks scalar, A2=-1, A3=-2, f1=-x1, f2=x1,
    /// f3=x1+x2, f4=sin(u), b=1+sin^2(u), driven by u(t)=sin(t).
    static CascadeSpec demo();
};

struct CascadePlant {
    PlantModel model;
    CascadeSpec spec;
    bool zero_regressor_warning = false;  // b probed as identically zero
};

/// Assemble the cascade plant. Throws ConfigError when A2 or A3 is not
/// Hurwitz (names the offending eigenvalue). Probes b at a few points and
/// flags a warning when it is identically zero (the PE condition cannot hold).
CascadePlant cascade_build(const CascadeSpec& spec);

}  // namespace obskit
