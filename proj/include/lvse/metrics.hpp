#pragma once

// Estimation quality metrics and the mirror-test harness.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lvse/error.hpp"
#include "lvse/grid_model.hpp"
#include "lvse/measurements.hpp"
#include "lvse/power_flow.hpp"
#include "lvse/state_estimation.hpp"
#include "lvse/stats.hpp"

namespace lvse {

inline constexpr double kQualifyingLoading = 20.0; // % true loading for f_I

/// Mean absolute voltage deviation normalised by the snapshot maximum, in %.
inline double mean_norm_voltage_error(const std::vector<double>& v_est, const std::vector<double>& v_true) {
    if (v_est.size() != v_true.size()) throw DomainError("voltage vectors differ in length");
    if (v_true.empty()) return 0.0;
    const double vmax = *std::max_element(v_true.begin(), v_true.end());
    if (!(vmax > 0.0)) throw DomainError("maximum true voltage must be positive");
    double s = 0.0;
    for (std::size_t i = 0; i < v_true.size(); ++i) s += std::abs(v_est[i] - v_true[i]);
    return 100.0 * s / (double(v_true.size()) * vmax);
}

/// |v_est - v_real| / v_n in %.
inline double f_v(double v_est, double v_real, double v_n) {
    if (!(v_n > 0.0)) throw DomainError("nominal voltage must be positive");
    return 100.0 * std::abs(v_est - v_real) / v_n;
}

/// |i_est - i_real| / i_z in %.
inline double f_i(double i_est, double i_real, double i_z) {
    if (!(i_z > 0.0)) throw DomainError("current-carrying capacity must be positive");
    return 100.0 * std::abs(i_est - i_real) / i_z;
}

struct AlarmCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    /// Specificity in %; 100 when there are no negatives.
    double tnr() const { return tn + fp ? 100.0 * double(tn) / double(tn + fp) : 100.0; }
    double fpr() const { return 100.0 - tnr(); }
    /// Sensitivity in %; empty when no true overload exists.
    std::optional<double> tpr() const {
        if (tp + fn == 0) return std::nullopt;
        return 100.0 * double(tp) / double(tp + fn);
    }

    AlarmCounts& operator+=(const AlarmCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
};

/// Line-overload alarm confusion counts for paired loading series (%).
inline AlarmCounts alarm_counts(const std::vector<double>& est_loading, const std::vector<double>& true_loading,
                                double threshold = 100.0) {
    if (est_loading.size() != true_loading.size()) throw DomainError("loading series differ in length");
    AlarmCounts c;
    for (std::size_t i = 0; i < est_loading.size(); ++i) {
        const bool alarm = est_loading[i] > threshold;
        const bool truth = true_loading[i] > threshold;
        if (alarm && truth) ++c.tp;
        else if (alarm) ++c.fp;
        else if (truth) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline double tnr(const std::vector<double>& est_loading, const std::vector<double>& true_loading,
                  double threshold = 100.0) {
    return alarm_counts(est_loading, true_loading, threshold).tnr();
}

/// Per-period accuracy of one estimate against the power-flow truth.
struct PeriodAccuracy {
    double eps_bar = 0.0;          // %, over NCP buses
    std::vector<double> fv;        // %, per NCP bus
    std::vector<double> fi;        // %, per qualifying branch
    AlarmCounts alarms;
};

inline PeriodAccuracy evaluate_period(const GridNetwork& net, const SnapshotState& truth, const EstimationResult& est) {
    PeriodAccuracy a;
    std::vector<double> ve, vt;
    for (auto b : net.ncp_buses()) {
        const double vn = net.buses()[b].nominal_voltage;
        const double e = std::abs(est.voltage[b]) * vn, t = std::abs(truth.voltage[b]) * vn;
        ve.push_back(e);
        vt.push_back(t);
        a.fv.push_back(f_v(e, t, vn));
    }
    a.eps_bar = mean_norm_voltage_error(ve, vt);
    std::vector<double> le, lt;
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        const double iz = net.branches()[k].thermal_limit;
        const double ie = std::abs(est.branch_current[k]), it = std::abs(truth.branch_current[k]);
        le.push_back(100.0 * ie / iz);
        lt.push_back(100.0 * it / iz);
        if (100.0 * it / iz > kQualifyingLoading) a.fi.push_back(f_i(ie, it, iz));
    }
    a.alarms = alarm_counts(le, lt);
    return a;
}

enum class MirrorStatus { pass, flagged, fail };

inline std::string_view to_string(MirrorStatus s) {
    switch (s) {
    case MirrorStatus::pass: return "pass";
    case MirrorStatus::flagged: return "flagged";
    case MirrorStatus::fail: return "fail";
    }
    return "?";
}

struct MirrorRow {
    std::size_t step = 0;
    double deviation = 0.0;                // %, estimator slack as configured
    std::optional<double> matched_deviation; // %, rerun with slack = OLTC target
    MirrorStatus status = MirrorStatus::pass;
};

inline constexpr double kMirrorLimit = 0.1; // %

struct MirrorOptions {
    EstimatorConfig estimator{.uncertainty = false};
    double sigma = kSigmaReal; // weighting only; measurement values are exact
};

/// Deviation of a full-coverage, exact-measurement estimate from the truth:
/// the mean normalised voltage error over NCP buses, in %.
inline double mirror_deviation(const GridNetwork& net, const SnapshotState& st, double se_slack,
                               const MirrorOptions& opt = {}) {
    const auto meas = full_coverage_measurements(net, st, se_slack, opt.sigma);
    const auto est = estimate(net, meas, opt.estimator);
    return evaluate_period(net, st, est).eps_bar;
}

/// Mirror test over converged snapshots. A row exceeding the limit whose
/// estimator slack differs from the OLTC target is rerun with matched slack;
/// it is flagged (not failed) when the rerun passes.
inline std::vector<MirrorRow> run_mirror_test(const GridNetwork& net, const std::vector<std::pair<std::size_t, SnapshotState>>& snapshots,
                                              const MirrorOptions& opt = {}) {
    std::vector<MirrorRow> rows;
    const double se = net.transformer().se_slack_voltage;
    const double oltc = net.transformer().oltc_target;
    for (const auto& [step, st] : snapshots) {
        if (!st.converged) continue;
        MirrorRow r;
        r.step = step;
        r.deviation = mirror_deviation(net, st, se, opt);
        if (r.deviation < kMirrorLimit) {
            r.status = MirrorStatus::pass;
        } else if (se != oltc) {
            r.matched_deviation = mirror_deviation(net, st, oltc, opt);
            r.status = *r.matched_deviation < kMirrorLimit ? MirrorStatus::flagged : MirrorStatus::fail;
        } else {
            r.status = MirrorStatus::fail;
        }
        rows.push_back(r);
    }
    return rows;
}

} // namespace lvse
