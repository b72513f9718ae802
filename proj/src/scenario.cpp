#include "obskit/scenario.hpp"

#include <cmath>
#include <sstream>

namespace obskit {

ClosedLoop::ClosedLoop(PlantModel plant,
                       std::function<double(double, const Vec&)> control,
                       NoiseSpec noise)
    : plant_(std::move(plant)), control_(std::move(control)),
      noise_(std::move(noise)) {
    x_ = Vec::Zero(plant_.n);
    rebuild_joint();
}

void ClosedLoop::add_observer(ObserverPtr obs) {
    add_observer(obs, obs->chi0());
}

void ClosedLoop::add_observer(ObserverPtr obs, const Vec& chi0) {
    if (chi0.size() != obs->chi_dim())
        throw ConfigError("ClosedLoop: chi0 dimension mismatch for " + obs->id());
    const Vec xsave = x_;
    std::vector<Vec> chis;
    for (std::size_t i = 0; i < observers_.size(); ++i) chis.push_back(chi(i));
    observers_.push_back(std::move(obs));
    chis.push_back(chi0);
    rebuild_joint();
    x_ = xsave;
    z_.head(plant_.n) = x_;
    for (std::size_t i = 0; i < observers_.size(); ++i)
        z_.segment(offsets_[i], observers_[i]->chi_dim()) = chis[i];
}

void ClosedLoop::rebuild_joint() {
    offsets_.clear();
    int total = plant_.n;
    for (const auto& obs : observers_) {
        offsets_.push_back(total);
        total += obs->chi_dim();
    }
    z_ = Vec::Zero(total);
    z_.head(plant_.n) = x_;
    ws_.resize(total);
}

Vec ClosedLoop::y_measured() const {
    Vec y = plant_.output(x_);
    if (noise_.enabled()) y += noise_.sample(t_);
    return y;
}

Vec ClosedLoop::chi(std::size_t i) const {
    return z_.segment(offsets_[i], observers_[i]->chi_dim());
}

void ClosedLoop::set_state(const Vec& x0) {
    if (x0.size() != plant_.n) throw ConfigError("ClosedLoop: x0 dimension");
    x_ = x0;
    z_.head(plant_.n) = x0;
}

void ClosedLoop::set_chi(std::size_t i, const Vec& chi0) {
    z_.segment(offsets_[i], observers_[i]->chi_dim()) = chi0;
}

void ClosedLoop::set_time(double t0) {
    t_ = t0;
    step_count_ = 0;
}

void ClosedLoop::step(double dt) {
    const int n = plant_.n;
    auto field = [&](double ts, const Vec& z, Vec& dz) {
        const auto xs = z.head(n);
        Vec u(1);
        u[0] = control_(ts, xs);
        Vec y = plant_.output(xs);
        if (noise_.enabled()) y += noise_.sample(ts);
        dz.head(n) = plant_.field(xs, u);
        for (std::size_t i = 0; i < observers_.size(); ++i) {
            const int off = offsets_[i];
            const int dim = observers_[i]->chi_dim();
            scratch_chi_ = z.segment(off, dim);
            scratch_dchi_.resize(dim);
            observers_[i]->field(ts, scratch_chi_, y, u, scratch_dchi_);
            dz.segment(off, dim) = scratch_dchi_;
        }
    };
    rk4_step_inplace(field, z_, t_, dt, ws_);
    ++step_count_;
    t_ = static_cast<double>(step_count_) * dt;
    x_ = z_.head(n);
    if (!all_finite(z_)) {
        std::string who = "plant";
        if (all_finite(x_)) {
            for (std::size_t i = 0; i < observers_.size(); ++i) {
                if (!all_finite(chi(i))) {
                    who = "observer " + observers_[i]->id();
                    break;
                }
            }
        }
        std::ostringstream os;
        os << "integration blowup in " << who << " at t=" << t_;
        throw IntegrationError(os.str(), t_);
    }
}

PlantModel make_plant(const ScenarioConfig& cfg) {
    if (cfg.plant_id == "cuk") return make_cuk_plant(cfg.cuk_params);
    if (cfg.plant_id == "acad3") return make_acad3_plant();
    if (cfg.plant_id == "cascade") return cascade_build(CascadeSpec::demo()).model;
    throw ConfigError("unknown plant id: " + cfg.plant_id +
                      " (valid: cuk, acad3, cascade)");
}

std::vector<ObserverPtr> make_observers(const ScenarioConfig& cfg) {
    std::vector<std::string> ids = cfg.observer_ids;
    std::vector<ObserverPtr> out;
    if (cfg.plant_id == "cuk") {
        if (ids.empty() || (ids.size() == 1 && ids[0] == "all"))
            ids = cuk_observer_ids();
        for (const auto& id : ids)
            out.push_back(make_cuk_observer(id, cfg.cuk_params, cfg.gains,
                                            cfg.y_variant));
    } else if (cfg.plant_id == "acad3") {
        if (ids.empty() || (ids.size() == 1 && ids[0] == "all"))
            ids = {"kkl_pebo"};
        for (const auto& id : ids) {
            if (id != "kkl_pebo")
                throw ConfigError("unknown acad3 observer id: " + id +
                                  " (valid: kkl_pebo)");
            out.push_back(make_acad3_observer(cfg.gains.alpha, cfg.acad3_gamma,
                                              cfg.acad3_psi0, cfg.acad3_theta0));
        }
    } else if (cfg.plant_id == "cascade") {
        if (ids.empty() || (ids.size() == 1 && ids[0] == "all"))
            ids = {"cascade"};
        for (const auto& id : ids) {
            if (id != "cascade")
                throw ConfigError("unknown cascade observer id: " + id +
                                  " (valid: cascade)");
            out.push_back(make_cascade_observer(CascadeSpec::demo(),
                                                cfg.cascade_alpha,
                                                cfg.cascade_gain));
        }
    } else {
        throw ConfigError("unknown plant id: " + cfg.plant_id);
    }
    return out;
}

std::function<double(double, const Vec&)> make_control(const ScenarioConfig& cfg) {
    if (cfg.fixed_u) {
        const double u = *cfg.fixed_u;
        return [u](double, const Vec&) { return u; };
    }
    if (cfg.plant_id == "cuk") {
        const ControlSchedule sched = cfg.schedule;
        const CukParams p = cfg.cuk_params;
        return [sched, p](double t, const Vec& x) {
            return cuk_control(x, t, sched, p);
        };
    }
    if (cfg.plant_id == "acad3") {
        const double u = cfg.acad3_u;
        return [u](double, const Vec&) { return u; };
    }
    // cascade demo input
    return [](double t, const Vec&) { return std::sin(t); };
}

Vec default_x0(const ScenarioConfig& cfg) {
    if (cfg.x0.size() > 0) return cfg.x0;
    if (cfg.plant_id == "cuk") return Vec::Zero(4);
    if (cfg.plant_id == "acad3") {
        Vec x0(3);
        x0 << 0.8, 1.2, -1.0;
        return x0;
    }
    Vec x0(4);
    x0 << 0.5, 0.0, 0.0, 1.0;
    return x0;
}

Vec reference_magnitudes(const ScenarioConfig& cfg,
                         const std::vector<SimTrace>& traces) {
    if (cfg.plant_id == "cuk") {
        const double vd = std::abs(cfg.schedule.vd_at(cfg.horizon));
        const double u = vd / (vd + cfg.cuk_params.E);
        return cuk_equilibrium_for_duty(u, cfg.cuk_params).cwiseAbs();
    }
    if (cfg.plant_id == "acad3") return acad3_equilibrium().cwiseAbs();
    // Self-scaled for the cascade demo.
    if (!traces.empty() && traces[0].rows() > 0) {
        Vec ref = Vec::Zero(traces[0].x[0].size());
        for (const Vec& x : traces[0].x) ref = ref.cwiseMax(x.cwiseAbs());
        for (Eigen::Index i = 0; i < ref.size(); ++i)
            if (ref[i] == 0.0) ref[i] = 1.0;
        return ref;
    }
    return Vec();
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    const PlantModel plant = make_plant(cfg);
    auto control = make_control(cfg);
    auto observers = make_observers(cfg);

    NoiseSpec noise;
    if (cfg.noise_on) {
        Vec amp = cfg.noise_amplitude;
        if (amp.size() == 0) amp = Vec::Zero(plant.p);
        if (amp.size() != plant.p)
            throw ConfigError("scenario: noise amplitude dimension must equal "
                              "the output dimension");
        noise = NoiseSpec(amp, cfg.noise_period, cfg.seed);
    }

    ClosedLoop loop(plant, control, noise);
    const Vec x0 = default_x0(cfg);
    for (const auto& obs : observers) loop.add_observer(obs);
    loop.set_state(x0);

    const auto n_steps = static_cast<long>(std::llround(cfg.horizon / cfg.dt));
    const std::size_t n_obs = observers.size();

    std::vector<SimTrace> traces(n_obs);
    for (std::size_t i = 0; i < n_obs; ++i) {
        traces[i].observer_id = observers[i]->id();
        traces[i].dt = cfg.dt;
        traces[i].decimation = cfg.decimation;
        const auto rows = static_cast<std::size_t>(n_steps / cfg.decimation) + 1;
        traces[i].t.reserve(rows);
    }

    std::optional<std::string> error;
    auto record = [&]() {
        const double t = loop.t();
        const Vec& x = loop.x();
        const Vec yc = loop.y_clean();
        const Vec ym = loop.y_measured();
        Vec u(1);
        u[0] = loop.control_value();
        for (std::size_t i = 0; i < n_obs; ++i) {
            SimTrace& tr = traces[i];
            const Vec c = loop.chi(i);
            const Vec xhat = observers[i]->estimate(c, ym, u);
            tr.t.push_back(t);
            tr.x.push_back(x);
            tr.y_clean.push_back(yc);
            tr.y_noisy.push_back(ym);
            tr.u.push_back(u);
            tr.chi.push_back(c);
            tr.xhat.push_back(xhat);
            tr.xerr.push_back(xhat - x);
            if (observers[i]->theta_dim() > 0)
                tr.theta.push_back(observers[i]->theta_of(c));
            if (cfg.record_regressor) {
                Vec b = observers[i]->regressor(c, ym, u);
                if (b.size() > 0) tr.regressor.push_back(std::move(b));
            }
            if (cfg.record_dm) {
                const auto mv = observers[i]->manifold_value(c, ym);
                const auto mt = observers[i]->manifold_target(x);
                if (mv && mt) tr.d_M.push_back(*mv - *mt);
            }
        }
    };

    record();
    for (long k = 0; k < n_steps; ++k) {
        try {
            loop.step(cfg.dt);
        } catch (const IntegrationError& e) {
            error = e.what();
            break;
        }
        if ((k + 1) % cfg.decimation == 0) record();
    }

    ScenarioResult result;
    result.traces = std::move(traces);
    result.error = error;

    const Vec ref = reference_magnitudes(cfg, result.traces);
    std::vector<std::optional<Vec>> theta_truth(n_obs);
    for (std::size_t i = 0; i < n_obs; ++i) {
        const SimTrace& tr = result.traces[i];
        if (tr.theta.empty() || tr.rows() == 0) continue;
        // Open-loop constants are fixed by the initial condition; recover the
        // truth from the design when one is registered.
        if (const DesignTriple* d = observers[i]->design()) {
            if (!d->open_coords.empty()) {
                const Vec w = d->phi(x0);
                Vec truth(static_cast<Eigen::Index>(d->open_coords.size()));
                const Vec c0 = observers[i]->chi0();
                for (std::size_t j = 0; j < d->open_coords.size(); ++j)
                    truth[static_cast<Eigen::Index>(j)] =
                        w[d->open_coords[j]] - c0[d->open_coords[j]];
                if (observers[i]->id() == "kkl_pebo" && cfg.plant_id == "acad3")
                    truth = truth.array().exp().matrix();
                theta_truth[i] = truth;
            }
        } else if (cfg.plant_id == "cascade") {
            const auto* cas = dynamic_cast<const CascadeObserver*>(observers[i].get());
            if (cas) {
                const CascadeSpec& s = cas->spec_ref();
                theta_truth[i] = Vec(x0.tail(s.n4) - cas->xi_of(cas->chi0()));
            }
        }
    }
    result.metrics = compute_metrics(result.traces, ref, 0.05, theta_truth);
    return result;
}

}  // namespace obskit
