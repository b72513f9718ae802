#pragma once

#include <optional>
#include <string>
#include <vector>

#include "obskit/numerics.hpp"

namespace obskit {

/// Uniformly sampled record of one observer's run against the plant.
/// Row k corresponds to step index k*decimation.
struct SimTrace {
    std::string observer_id;
    double dt = 0.0;
    int decimation = 1;

    std::vector<double> t;
    std::vector<Vec> x;        // true plant state
    std::vector<Vec> y_clean;
    std::vector<Vec> y_noisy;
    std::vector<Vec> u;
    std::vector<Vec> chi;
    std::vector<Vec> xhat;
    std::vector<Vec> xerr;     // xhat - x
    std::vector<Vec> theta;    // empty when the observer has no estimator
    std::vector<Vec> d_M;      // off-manifold coordinate, when requested
    std::vector<Vec> regressor;  // recorded only when requested

    std::size_t rows() const { return t.size(); }
};

struct CsvOptions {
    bool include_chi = false;
    bool include_theta = true;
    bool include_dm = false;
};

/// Writes the trace with a header naming every column; values use decimal
/// notation with 9 significant digits. Byte output is deterministic for
/// fixed inputs.
void export_csv(const SimTrace& trace, const std::string& path,
                const CsvOptions& opts = {});

/// Per-observer error metrics. conv_time entries are -1 when the state never
/// settles into the band ("not converged").
struct ObserverMetrics {
    std::string observer_id;
    Vec rms_ss;      // steady-state RMS error per state (last 20% of horizon)
    Vec peak_err;    // peak |error| per state over the run
    Vec conv_time;   // first time after which |err| stays within band*ref
    std::optional<double> theta_err_final;  // |theta_hat - theta| at the end
};

struct MetricsReport {
    std::vector<ObserverMetrics> per_observer;
    Vec ref_magnitudes;  // per-state reference used for the convergence band
    double band = 0.05;
    double horizon = 0.0;
};

MetricsReport compute_metrics(const std::vector<SimTrace>& traces,
                              const Vec& ref_magnitudes, double band,
                              const std::vector<std::optional<Vec>>& theta_truth);

void write_metrics_csv(const MetricsReport& report, const std::string& path);

/// Parse a file previously written by export_csv; returns column names and
/// row-major values. Used by round-trip tests and downstream tooling.
std::pair<std::vector<std::string>, std::vector<std::vector<double>>>
parse_csv(const std::string& path);

}  // namespace obskit
