#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "obskit/designs.hpp"
#include "obskit/plants.hpp"
#include "obskit/trace.hpp"

namespace obskit {

/// Flat key=value configuration text with dotted section names and '#'
/// comments. Unknown keys are rejected at scenario assembly.
class KvConfig {
public:
    static KvConfig from_file(const std::string& path);
    static KvConfig from_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& dflt) const;
    double get_num(const std::string& key, double dflt) const;
    bool get_flag(const std::string& key, bool dflt) const;  // on/off/true/false
    std::vector<double> get_list(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

/// Everything needed to run one scenario: plant, observers, clock, noise,
/// control, gains, and output options.
struct ScenarioConfig {
    std::string plant_id = "cuk";
    std::vector<std::string> observer_ids;  // empty = all for the plant

    double dt = 1e-5;
    double horizon = 1.2;
    int decimation = 1;
    std::uint64_t seed = 1;

    bool noise_on = false;
    Vec noise_amplitude;       // defaults per plant
    double noise_period = 1e-4;

    Vec x0;                    // empty = plant default
    std::optional<double> fixed_u;  // constant duty/input override

    CukParams cuk_params;
    ControlSchedule schedule = ControlSchedule::cuk_default();
    CukGains gains;
    CukYVariant y_variant = CukYVariant::derived;

    double acad3_u = -1.0;
    double acad3_gamma = 1.0;
    double acad3_psi0 = 0.1;
    double acad3_theta0 = 1.0;

    double cascade_alpha = 1.0;
    double cascade_gain = 1.0;

    std::string out_dir = ".";
    CsvOptions csv;
    bool record_regressor = false;
    bool record_dm = false;

    static ScenarioConfig defaults_for(const std::string& plant_id);
    /// Cuk six-observer comparison study at reference gains, noisy by default.
    static ScenarioConfig compare_defaults();

    void apply(const KvConfig& kv);
    void validate() const;
};

extern const int kConfigSchemaVersion;

}  // namespace obskit
