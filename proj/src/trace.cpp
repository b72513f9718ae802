#include "obskit/trace.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "obskit/errors.hpp"

namespace obskit {

namespace {

void append_num(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    out += buf;
}

void append_vec_header(std::string& out, const std::string& stem, int n) {
    for (int i = 0; i < n; ++i) {
        out += ',';
        out += stem;
        out += std::to_string(i + 1);
    }
}

}  // namespace

void export_csv(const SimTrace& trace, const std::string& path,
                const CsvOptions& opts) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("export_csv: cannot open " + path);

    const int n = trace.x.empty() ? 0 : static_cast<int>(trace.x[0].size());
    const int p = trace.y_clean.empty() ? 0 : static_cast<int>(trace.y_clean[0].size());
    const int m = trace.u.empty() ? 0 : static_cast<int>(trace.u[0].size());
    const int nth = trace.theta.empty() ? 0 : static_cast<int>(trace.theta[0].size());
    const int nchi = trace.chi.empty() ? 0 : static_cast<int>(trace.chi[0].size());
    const int ndm = trace.d_M.empty() ? 0 : static_cast<int>(trace.d_M[0].size());

    std::string line = "t";
    append_vec_header(line, "x", n);
    append_vec_header(line, "y", p);
    append_vec_header(line, "ynoisy", p);
    append_vec_header(line, "u", m);
    append_vec_header(line, "xhat", n);
    append_vec_header(line, "xerr", n);
    if (opts.include_theta) append_vec_header(line, "thetahat", nth);
    if (opts.include_chi) append_vec_header(line, "chi", nchi);
    if (opts.include_dm) append_vec_header(line, "dm", ndm);
    line += '\n';
    f << line;

    for (std::size_t k = 0; k < trace.rows(); ++k) {
        line.clear();
        append_num(line, trace.t[k]);
        auto emit = [&](const Vec& v) {
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                line += ',';
                append_num(line, v[i]);
            }
        };
        emit(trace.x[k]);
        emit(trace.y_clean[k]);
        emit(trace.y_noisy[k]);
        emit(trace.u[k]);
        emit(trace.xhat[k]);
        emit(trace.xerr[k]);
        if (opts.include_theta && nth > 0) emit(trace.theta[k]);
        if (opts.include_chi) emit(trace.chi[k]);
        if (opts.include_dm && ndm > 0) emit(trace.d_M[k]);
        line += '\n';
        f << line;
    }
    if (!f) throw Error("export_csv: write failed for " + path);
}

std::pair<std::vector<std::string>, std::vector<std::vector<double>>>
parse_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("parse_csv: cannot open " + path);
    std::string header;
    if (!std::getline(f, header)) throw Error("parse_csv: empty file " + path);

    std::vector<std::string> names;
    {
        std::stringstream ss(header);
        std::string cell;
        while (std::getline(ss, cell, ',')) names.push_back(cell);
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(names.size());
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (cell == "nc") row.push_back(-1.0);
            else row.push_back(std::stod(cell));
        }
        rows.push_back(std::move(row));
    }
    return {names, rows};
}

MetricsReport compute_metrics(const std::vector<SimTrace>& traces,
                              const Vec& ref, double band,
                              const std::vector<std::optional<Vec>>& theta_truth) {
    MetricsReport report;
    report.ref_magnitudes = ref;
    report.band = band;
    for (std::size_t oi = 0; oi < traces.size(); ++oi) {
        const SimTrace& tr = traces[oi];
        const std::size_t rows = tr.rows();
        if (rows == 0) continue;
        const int n = static_cast<int>(tr.x[0].size());
        report.horizon = tr.t.back();

        ObserverMetrics m;
        m.observer_id = tr.observer_id;
        m.rms_ss = Vec::Zero(n);
        m.peak_err = Vec::Zero(n);
        m.conv_time = Vec::Constant(n, -1.0);

        const double t_ss = tr.t.back() - 0.2 * (tr.t.back() - tr.t.front());
        Vec sum_sq = Vec::Zero(n);
        std::size_t count_ss = 0;
        for (std::size_t k = 0; k < rows; ++k) {
            const Vec aerr = tr.xerr[k].cwiseAbs();
            m.peak_err = m.peak_err.cwiseMax(aerr);
            if (tr.t[k] >= t_ss) {
                sum_sq += tr.xerr[k].cwiseProduct(tr.xerr[k]);
                ++count_ss;
            }
        }
        if (count_ss > 0) m.rms_ss = (sum_sq / double(count_ss)).cwiseSqrt();

        for (int i = 0; i < n; ++i) {
            const double lim = band * std::abs(ref[i]);
            // Last exit from the band; converged at the sample after it.
            std::ptrdiff_t last_out = -1;
            for (std::size_t k = 0; k < rows; ++k)
                if (std::abs(tr.xerr[k][i]) > lim)
                    last_out = static_cast<std::ptrdiff_t>(k);
            if (last_out + 1 < static_cast<std::ptrdiff_t>(rows))
                m.conv_time[i] = tr.t[static_cast<std::size_t>(last_out + 1)];
        }

        if (oi < theta_truth.size() && theta_truth[oi] && !tr.theta.empty()) {
            m.theta_err_final = (tr.theta.back() - *theta_truth[oi])
                                    .cwiseAbs().maxCoeff();
        }
        report.per_observer.push_back(std::move(m));
    }
    return report;
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("write_metrics_csv: cannot open " + path);
    const int n = report.ref_magnitudes.size()
                      ? static_cast<int>(report.ref_magnitudes.size())
                      : (report.per_observer.empty()
                             ? 0
                             : static_cast<int>(report.per_observer[0].rms_ss.size()));
    std::string line = "observer";
    append_vec_header(line, "rms_ss_x", n);
    append_vec_header(line, "peak_x", n);
    append_vec_header(line, "conv_time_x", n);
    line += ",theta_err_final\n";
    f << line;
    for (const auto& m : report.per_observer) {
        line = m.observer_id;
        auto emit = [&](const Vec& v) {
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                line += ',';
                append_num(line, v[i]);
            }
        };
        emit(m.rms_ss);
        emit(m.peak_err);
        for (Eigen::Index i = 0; i < m.conv_time.size(); ++i) {
            line += ',';
            if (m.conv_time[i] < 0.0) line += "nc";
            else append_num(line, m.conv_time[i]);
        }
        line += ',';
        if (m.theta_err_final) append_num(line, *m.theta_err_final);
        else line += "na";
        line += '\n';
        f << line;
    }
}

}  // namespace obskit
