#include "obskit/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace obskit {

const int kConfigSchemaVersion = 1;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

KvConfig KvConfig::from_string(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": empty key");
        cfg.kv_[key] = val;
    }
    if (cfg.has("schema_version")) {
        const double v = cfg.get_num("schema_version", 0);
        if (static_cast<int>(v) != kConfigSchemaVersion)
            throw ConfigError("config: unsupported schema_version " +
                              cfg.get_str("schema_version", ""));
    }
    return cfg;
}

KvConfig KvConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str());
}

bool KvConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string KvConfig::get_str(const std::string& key,
                              const std::string& dflt) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
}

double KvConfig::get_num(const std::string& key, double dflt) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size())
            throw ConfigError("config: trailing characters in value of " + key);
        return v;
    } catch (const std::invalid_argument&) {
        throw ConfigError("config: value of " + key + " is not a number");
    }
}

bool KvConfig::get_flag(const std::string& key, bool dflt) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ConfigError("config: value of " + key + " must be on/off");
}

std::vector<double> KvConfig::get_list(const std::string& key) const {
    std::vector<double> out;
    const auto it = kv_.find(key);
    if (it == kv_.end()) return out;
    std::stringstream ss(it->second);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (cell.empty()) continue;
        try {
            out.push_back(std::stod(cell));
        } catch (const std::invalid_argument&) {
            throw ConfigError("config: list value of " + key +
                              " has a non-numeric entry");
        }
    }
    return out;
}

void KvConfig::set(const std::string& key, const std::string& value) {
    kv_[key] = value;
}

ScenarioConfig ScenarioConfig::defaults_for(const std::string& plant_id) {
    ScenarioConfig cfg;
    cfg.plant_id = plant_id;
    if (plant_id == "cuk") {
        // The open-loop observer's estimator mode sits at -Gamma2/L3^2 = -1e6
        // 1/s at reference gains; the explicit integrator needs dt at 1e-6 to
        // keep it inside the stability region (the plant alone would allow
        // 1e-5).
        cfg.dt = 1e-6;
        cfg.horizon = 1.2;
        cfg.decimation = 100;  // 10 kHz log rate
        cfg.noise_amplitude = Vec(2);
        cfg.noise_amplitude << 0.02, 2e-4;
        cfg.noise_period = 1e-4;
    } else if (plant_id == "acad3") {
        cfg.dt = 1e-3;
        cfg.horizon = 30.0;
        cfg.noise_amplitude = Vec::Zero(1);
    } else if (plant_id == "cascade") {
        cfg.dt = 1e-3;
        cfg.horizon = 20.0;
        cfg.noise_amplitude = Vec::Zero(1);
    } else {
        throw ConfigError("unknown plant id: " + plant_id +
                          " (valid: cuk, acad3, cascade)");
    }
    return cfg;
}

ScenarioConfig ScenarioConfig::compare_defaults() {
    ScenarioConfig cfg = defaults_for("cuk");
    cfg.observer_ids = cuk_observer_ids();
    cfg.noise_on = true;
    return cfg;
}

void ScenarioConfig::apply(const KvConfig& kv) {
    static const char* known[] = {
        "schema_version", "scenario.plant", "scenario.observers", "scenario.dt",
        "scenario.horizon", "scenario.decimation", "scenario.seed",
        "scenario.noise", "scenario.out", "scenario.fixed_u",
        "noise.amplitude", "noise.period", "plant.x0", "cuk.L1", "cuk.C2",
        "cuk.L3", "cuk.C4", "cuk.E", "cuk.G", "control.lambda",
        "control.u_min", "control.u_max", "control.schedule", "gains.alpha",
        "gains.gamma", "gains.Gamma", "gains.gamma1", "gains.gamma2",
        "gains.r1", "gains.r2", "gains.a", "kkl_pebo.y_variant", "acad3.u",
        "acad3.gamma", "acad3.psi0", "acad3.theta0", "cascade.alpha",
        "cascade.gain", "csv.chi", "csv.theta", "csv.regressor", "csv.dm",
    };
    for (const auto& [k, v] : kv.entries()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char* s) {
                return k == s;
            }) == std::end(known))
            throw ConfigError("config: unknown key '" + k + "'");
        (void)v;
    }

    if (kv.has("scenario.plant")) {
        const std::string pid = kv.get_str("scenario.plant", plant_id);
        *this = defaults_for(pid);
    }
    if (kv.has("scenario.observers")) {
        observer_ids.clear();
        std::stringstream ss(kv.get_str("scenario.observers", ""));
        std::string cell;
        while (std::getline(ss, cell, ','))
            if (!trim(cell).empty()) observer_ids.push_back(trim(cell));
    }
    dt = kv.get_num("scenario.dt", dt);
    horizon = kv.get_num("scenario.horizon", horizon);
    decimation = static_cast<int>(kv.get_num("scenario.decimation", decimation));
    seed = static_cast<std::uint64_t>(kv.get_num("scenario.seed",
                                                 static_cast<double>(seed)));
    noise_on = kv.get_flag("scenario.noise", noise_on);
    out_dir = kv.get_str("scenario.out", out_dir);
    if (kv.has("scenario.fixed_u")) fixed_u = kv.get_num("scenario.fixed_u", 0.0);

    if (kv.has("noise.amplitude")) {
        const auto amp = kv.get_list("noise.amplitude");
        noise_amplitude = Eigen::Map<const Vec>(amp.data(),
                                                static_cast<Eigen::Index>(amp.size()));
    }
    noise_period = kv.get_num("noise.period", noise_period);
    if (kv.has("plant.x0")) {
        const auto v = kv.get_list("plant.x0");
        x0 = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    cuk_params.L1 = kv.get_num("cuk.L1", cuk_params.L1);
    cuk_params.C2 = kv.get_num("cuk.C2", cuk_params.C2);
    cuk_params.L3 = kv.get_num("cuk.L3", cuk_params.L3);
    cuk_params.C4 = kv.get_num("cuk.C4", cuk_params.C4);
    cuk_params.E = kv.get_num("cuk.E", cuk_params.E);
    cuk_params.G = kv.get_num("cuk.G", cuk_params.G);

    schedule.lambda_c = kv.get_num("control.lambda", schedule.lambda_c);
    schedule.u_min = kv.get_num("control.u_min", schedule.u_min);
    schedule.u_max = kv.get_num("control.u_max", schedule.u_max);
    if (kv.has("control.schedule")) {
        schedule.vd_segments.clear();
        std::stringstream ss(kv.get_str("control.schedule", ""));
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const auto colon = cell.find(':');
            if (colon == std::string::npos)
                throw ConfigError("config: control.schedule entries must be "
                                  "start:Vd");
            schedule.vd_segments.emplace_back(std::stod(cell.substr(0, colon)),
                                              std::stod(cell.substr(colon + 1)));
        }
    }

    gains.alpha = kv.get_num("gains.alpha", gains.alpha);
    gains.gamma = kv.get_num("gains.gamma", gains.gamma);
    if (kv.has("gains.Gamma")) {
        const auto g = kv.get_list("gains.Gamma");
        if (g.size() != 2)
            throw ConfigError("config: gains.Gamma needs two entries");
        gains.Gamma1 = g[0];
        gains.Gamma2 = g[1];
    }
    gains.gamma1 = kv.get_num("gains.gamma1", gains.gamma1);
    gains.gamma2 = kv.get_num("gains.gamma2", gains.gamma2);
    gains.r1 = kv.get_num("gains.r1", gains.r1);
    gains.r2 = kv.get_num("gains.r2", gains.r2);
    if (kv.has("gains.a")) {
        const auto a = kv.get_list("gains.a");
        if (a.size() != 4) throw ConfigError("config: gains.a needs four entries");
        gains.a1 = a[0];
        gains.a2 = a[1];
        gains.a3 = a[2];
        gains.a4 = a[3];
    }
    if (kv.has("kkl_pebo.y_variant")) {
        const std::string v = kv.get_str("kkl_pebo.y_variant", "derived");
        if (v == "derived") y_variant = CukYVariant::derived;
        else if (v == "printed") y_variant = CukYVariant::printed;
        else throw ConfigError("config: kkl_pebo.y_variant must be derived or "
                               "printed");
    }

    acad3_u = kv.get_num("acad3.u", acad3_u);
    acad3_gamma = kv.get_num("acad3.gamma", acad3_gamma);
    acad3_psi0 = kv.get_num("acad3.psi0", acad3_psi0);
    acad3_theta0 = kv.get_num("acad3.theta0", acad3_theta0);
    cascade_alpha = kv.get_num("cascade.alpha", cascade_alpha);
    cascade_gain = kv.get_num("cascade.gain", cascade_gain);

    csv.include_chi = kv.get_flag("csv.chi", csv.include_chi);
    csv.include_theta = kv.get_flag("csv.theta", csv.include_theta);
    record_regressor = kv.get_flag("csv.regressor", record_regressor);
    record_dm = kv.get_flag("csv.dm", record_dm);
    csv.include_dm = record_dm;
}

void ScenarioConfig::validate() const {
    if (!(dt > 0)) throw ConfigError("scenario: dt must be > 0");
    if (!(horizon >= dt)) throw ConfigError("scenario: horizon must be >= dt");
    if (decimation < 1) throw ConfigError("scenario: decimation must be >= 1");
    if (noise_on) {
        if (!(noise_period > 0))
            throw ConfigError("scenario: noise.period must be > 0");
        if (dt > noise_period + 1e-15)
            throw ConfigError("scenario: dt must not exceed the noise sample "
                              "period");
    }
    schedule.validate();
    cuk_params.validate();
    gains.validate();
}

}  // namespace obskit
