#pragma once

#include <optional>

#include "obskit/config.hpp"
#include "obskit/observers.hpp"
#include "obskit/trace.hpp"

namespace obskit {

/// Plant + control + noise + observer bank advanced as one joint ODE so the
/// observers see stage-consistent measurements (one clock for everything).
class ClosedLoop {
public:
    ClosedLoop(PlantModel plant,
               std::function<double(double t, const Vec& x)> control,
               NoiseSpec noise = {});

    void add_observer(ObserverPtr obs);
    void add_observer(ObserverPtr obs, const Vec& chi0);

    /// One RK4 step of the joint state. Throws IntegrationError naming the
    /// subsystem whose block went non-finite.
    void step(double dt);

    double t() const { return t_; }
    const Vec& x() const { return x_; }
    Vec y_clean() const { return plant_.output(x_); }
    Vec y_measured() const;
    double control_value() const { return control_(t_, x_); }
    Vec chi(std::size_t i) const;
    const Observer& observer(std::size_t i) const { return *observers_[i]; }
    std::size_t n_observers() const { return observers_.size(); }

    void set_state(const Vec& x0);
    void set_chi(std::size_t i, const Vec& chi0);
    void set_time(double t0);

private:
    void rebuild_joint();

    PlantModel plant_;
    std::function<double(double t, const Vec& x)> control_;
    NoiseSpec noise_;
    std::vector<ObserverPtr> observers_;
    std::vector<int> offsets_;
    Vec z_;
    Vec x_;  // mirrors z_.head(n)
    double t_ = 0.0;
    long step_count_ = 0;
    Rk4Workspace ws_;
    mutable Vec scratch_chi_, scratch_dchi_;
};

struct ScenarioResult {
    std::vector<SimTrace> traces;  // one per observer
    MetricsReport metrics;
    std::optional<std::string> error;  // integration failure report
};

/// Lockstep run of the configured scenario: sample-held noise on the
/// measurements, control from the true state, one trace per observer,
/// deterministic under a fixed seed. An integration blowup yields partial
/// traces plus an error naming the subsystem and time.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// Assembles the plant described by the config (with parameter overrides).
PlantModel make_plant(const ScenarioConfig& cfg);

/// Observer bank for the config's plant; empty observer_ids means all.
std::vector<ObserverPtr> make_observers(const ScenarioConfig& cfg);

/// Control policy for the config's plant.
std::function<double(double, const Vec&)> make_control(const ScenarioConfig& cfg);

/// Default initial plant state for the config's plant.
Vec default_x0(const ScenarioConfig& cfg);

/// Per-state reference magnitudes used for metric bands.
Vec reference_magnitudes(const ScenarioConfig& cfg,
                         const std::vector<SimTrace>& traces);

}  // namespace obskit
