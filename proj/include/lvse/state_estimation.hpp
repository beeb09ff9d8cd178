#pragma once

// Branch-current weighted-least-squares state estimation for radial LV grids.
//
// State: real and imaginary parts of every branch current for three phases,
// x = [phase a: Re I(0..M-1), Im I(0..M-1) | phase b: ... | phase c: ...].
// Power measurements are turned into bus current injections at the latest
// voltage estimate, so H is the (constant) radial incidence structure:
// injection row of bus b = I(parent branch of b) - sum I(child branches of b).
// Voltages follow from a forward sweep, and measured voltage magnitudes are
// propagated back to the slack to refine its estimate.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "lvse/error.hpp"
#include "lvse/grid_model.hpp"
#include "lvse/measurements.hpp"
#include "lvse/power_flow.hpp"

namespace lvse {

inline constexpr int kPhases = 3;

struct EstimatorConfig {
    int max_iterations = 20;
    double tolerance = 1e-10; // max bus-voltage change between sweeps, p.u.
    bool uncertainty = true;
    bool fuse_slack_prior = true;
    /// Fault injection: corrupt one Jacobian coefficient (verification only).
    bool perturb_jacobian = false;
};

struct MeasurementModel {
    Eigen::SparseMatrix<double> H;
    Eigen::VectorXd z;
    Eigen::VectorXd w; // diagonal of W
    std::vector<std::size_t> row_bus; // bus of each per-phase component row
    std::size_t branches = 0;
};

/// Column of branch k's current component (0 = real, 1 = imaginary) in phase p.
inline std::size_t state_index(std::size_t branches, int phase, int component, std::size_t k) {
    return static_cast<std::size_t>(phase) * 2 * branches + static_cast<std::size_t>(component) * branches + k;
}

/// Incidence-structured Jacobian for the given power-measurement buses.
/// Rows: phase-major, then component, then measurement order.
inline Eigen::SparseMatrix<double> build_jacobian(const GridNetwork& net, const std::vector<std::size_t>& buses,
                                                  bool perturb = false) {
    const auto M = net.branch_count();
    const auto m = buses.size();
    std::vector<Eigen::Triplet<double>> t;
    for (int ph = 0; ph < kPhases; ++ph)
        for (int c = 0; c < 2; ++c)
            for (std::size_t r = 0; r < m; ++r) {
                const auto row = static_cast<int>(static_cast<std::size_t>(ph) * 2 * m + static_cast<std::size_t>(c) * m + r);
                const auto b = buses[r];
                if (auto pb = net.parent_branch(b))
                    t.emplace_back(row, static_cast<int>(state_index(M, ph, c, *pb)), 1.0);
                for (auto k : net.child_branches(b)) t.emplace_back(row, static_cast<int>(state_index(M, ph, c, k)), -1.0);
            }
    if (perturb && !t.empty()) t.front() = Eigen::Triplet<double>(t.front().row(), t.front().col(), -1.0);
    Eigen::SparseMatrix<double> H(static_cast<int>(6 * m), static_cast<int>(6 * M));
    H.setFromTriplets(t.begin(), t.end());
    H.makeCompressed();
    return H;
}

/// Measurement vector and weights: P/Q converted to the bus current drawn
/// (A) at the voltage estimate `v` (p.u.), with first-order variances.
inline MeasurementModel build_model(const GridNetwork& net, const MeasurementSet& meas, const std::vector<cplx>& v,
                                    bool perturb = false) {
    const auto n = net.bus_count();
    if (2 * meas.power.size() + 1 < 2 * n - 1) {
        throw ObservabilityError("measurement count " + std::to_string(2 * meas.power.size() + 1) +
                                 " per phase is below 2n-1 = " + std::to_string(2 * n - 1));
    }
    MeasurementModel mod;
    mod.branches = net.branch_count();
    std::vector<std::size_t> buses;
    for (const auto& p : meas.power) {
        if (p.bus == net.slack()) throw DomainError("power measurement at the slack bus");
        buses.push_back(p.bus);
    }
    mod.row_bus = buses;
    mod.H = build_jacobian(net, buses, perturb);
    const auto m = buses.size();
    mod.z.resize(static_cast<Eigen::Index>(6 * m));
    mod.w.resize(static_cast<Eigen::Index>(6 * m));
    for (std::size_t r = 0; r < m; ++r) {
        const auto& pm = meas.power[r];
        const double vn = net.buses()[pm.bus].nominal_voltage;
        const cplx vb = v[pm.bus] * vn;
        const double vm = std::abs(vb);
        const double d = std::arg(vb);
        const double c = std::cos(d), s = std::sin(d);
        // I = conj(S / V) = (P - jQ) e^{jd} / |V|
        const double ire = (pm.p * c + pm.q * s) / vm;
        const double iim = (pm.p * s - pm.q * c) / vm;
        const double sp2 = pm.sigma_p * pm.sigma_p, sq2 = pm.sigma_q * pm.sigma_q;
        const double var_re = (sp2 * c * c + sq2 * s * s) / (vm * vm);
        const double var_im = (sp2 * s * s + sq2 * c * c) / (vm * vm);
        for (int ph = 0; ph < kPhases; ++ph) {
            const auto base = static_cast<Eigen::Index>(static_cast<std::size_t>(ph) * 2 * m);
            mod.z[base + static_cast<Eigen::Index>(r)] = ire;
            mod.z[base + static_cast<Eigen::Index>(m + r)] = iim;
            mod.w[base + static_cast<Eigen::Index>(r)] = 1.0 / var_re;
            mod.w[base + static_cast<Eigen::Index>(m + r)] = 1.0 / var_im;
        }
    }
    return mod;
}

struct WlsSolution {
    Eigen::VectorXd x;
    double objective = 0.0;
    double condition = 0.0; // ratio of extreme LDL^T pivots of the gain matrix
};

/// Factorised gain matrix G = H^T W H.
class GainMatrix {
public:
    explicit GainMatrix(const MeasurementModel& mod) {
        if (mod.H.rows() < mod.H.cols())
            throw ObservabilityError("fewer measurement rows than state variables");
        G_ = Eigen::SparseMatrix<double>(mod.H.transpose() * mod.w.asDiagonal() * mod.H);
        ldlt_.compute(G_);
        if (ldlt_.info() != Eigen::Success) throw ObservabilityError("gain matrix factorisation failed");
        const auto& D = ldlt_.vectorD();
        const double dmax = D.cwiseAbs().maxCoeff();
        const double dmin = D.minCoeff();
        if (!(dmin > 1e-13 * dmax)) throw ObservabilityError("gain matrix is singular: state not observable");
        condition_ = dmax / dmin;
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return ldlt_.solve(rhs); }
    double condition() const { return condition_; }
    const Eigen::SparseMatrix<double>& matrix() const { return G_; }

    /// Dense block of G^-1 for the state indices [first, first + count).
    Eigen::MatrixXd inverse_block(Eigen::Index first, Eigen::Index count) const {
        Eigen::MatrixXd out(count, count);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(G_.rows());
        for (Eigen::Index j = 0; j < count; ++j) {
            e.setZero();
            e[first + j] = 1.0;
            const Eigen::VectorXd col = ldlt_.solve(e);
            out.col(j) = col.segment(first, count);
        }
        return out;
    }

private:
    Eigen::SparseMatrix<double> G_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    double condition_ = 0.0;
};

/// x = (H^T W H)^-1 H^T W z.
inline WlsSolution solve_wls(const MeasurementModel& mod, const GainMatrix& gain) {
    WlsSolution s;
    const Eigen::VectorXd rhs = mod.H.transpose() * (mod.w.asDiagonal() * mod.z);
    s.x = gain.solve(rhs);
    const Eigen::VectorXd r = mod.z - mod.H * s.x;
    s.objective = r.dot(mod.w.asDiagonal() * r);
    s.condition = gain.condition();
    return s;
}

inline WlsSolution solve_wls(const MeasurementModel& mod) { return solve_wls(mod, GainMatrix(mod)); }

/// Complex branch currents of one phase from the state vector.
inline std::vector<cplx> phase_currents(const Eigen::VectorXd& x, std::size_t branches, int phase = 0) {
    std::vector<cplx> i(branches);
    for (std::size_t k = 0; k < branches; ++k)
        i[k] = cplx(x[static_cast<Eigen::Index>(state_index(branches, phase, 0, k))],
                    x[static_cast<Eigen::Index>(state_index(branches, phase, 1, k))]);
    return i;
}

/// v_down = v_up - Z i, from the slack outwards (p.u.).
inline std::vector<cplx> forward_sweep(const GridNetwork& net, const std::vector<cplx>& branch_current, cplx slack_voltage) {
    std::vector<cplx> v(net.bus_count());
    v[net.slack()] = slack_voltage;
    for (auto b : net.bfs_order()) {
        if (b == net.slack()) continue;
        const auto k = *net.parent_branch(b);
        const auto& br = net.branches()[k];
        v[b] = v[net.upstream(k)] - cplx(br.resistance, br.reactance) * branch_current[k] / net.buses()[b].nominal_voltage;
    }
    return v;
}

/// Drop from the slack to `bus` in p.u.: sum over the path of Z i / V_n.
inline cplx path_drop(const GridNetwork& net, const std::vector<cplx>& branch_current, std::size_t bus) {
    cplx d{};
    for (auto k : net.path_to(bus)) {
        const auto& br = net.branches()[k];
        d += cplx(br.resistance, br.reactance) * branch_current[k] / net.buses()[net.downstream(k)].nominal_voltage;
    }
    return d;
}

/// Mean slack-voltage magnitude implied by the measured voltages: each
/// measurement, at the estimated angle, plus the drop along its path.
/// Returns `current_slack` when there are no voltage measurements.
inline double backward_sweep(const GridNetwork& net, const std::vector<cplx>& branch_current,
                             const std::vector<cplx>& voltage_estimate, const std::vector<VoltageMeasurement>& vm,
                             double current_slack) {
    if (vm.empty()) return current_slack;
    double sum = 0.0;
    for (const auto& m : vm) {
        const cplx vb = std::polar(m.magnitude, std::arg(voltage_estimate[m.bus]));
        sum += std::abs(vb + path_drop(net, branch_current, m.bus));
    }
    return sum / double(vm.size());
}

struct EstimationResult {
    Eigen::VectorXd x;
    std::vector<cplx> branch_current; // phase a, A
    std::vector<cplx> voltage;        // p.u.
    double slack_voltage = 1.0;
    Eigen::VectorXd residual;
    double objective = 0.0;
    double condition = 0.0;
    std::vector<double> current_ci;   // 95 % half-width of |I|, A
    std::vector<double> current_sigma_re;
    std::vector<double> current_sigma_im;
    std::vector<double> voltage_ci;   // 95 % half-width of |V|, p.u.
    int iterations = 0;
    bool converged = false;
};

struct Uncertainty {
    std::vector<double> sigma_re, sigma_im; // per branch, A
    std::vector<double> current_ci;         // per branch, |I| half-width
    std::vector<double> voltage_sigma;      // per bus, p.u.
    std::vector<double> voltage_ci;
};

inline constexpr double kZ95 = 1.959963984540054;

/// Current covariance from the gain matrix; voltage variance propagated
/// along each bus path (drop equations) plus the slack-estimate variance.
inline Uncertainty quantify_uncertainty(const MeasurementModel& mod, const GainMatrix& gain, const GridNetwork& net,
                                        const std::vector<cplx>& branch_current, const std::vector<cplx>& voltage,
                                        double slack_variance) {
    const auto M = static_cast<Eigen::Index>(mod.branches);
    const Eigen::MatrixXd Cr = gain.inverse_block(0, M);
    const Eigen::MatrixXd Ci = gain.inverse_block(M, M);
    Uncertainty u;
    for (Eigen::Index k = 0; k < M; ++k) {
        const double vr = Cr(k, k), vi = Ci(k, k);
        u.sigma_re.push_back(std::sqrt(std::max(0.0, vr)));
        u.sigma_im.push_back(std::sqrt(std::max(0.0, vi)));
        const cplx i = branch_current[static_cast<std::size_t>(k)];
        const double mag = std::abs(i);
        const double var_mag = mag > 0.0 ? (i.real() * i.real() * vr + i.imag() * i.imag() * vi) / (mag * mag)
                                         : std::max(vr, vi);
        u.current_ci.push_back(kZ95 * std::sqrt(std::max(0.0, var_mag)));
    }
    u.voltage_sigma.assign(net.bus_count(), 0.0);
    u.voltage_ci.assign(net.bus_count(), 0.0);
    Eigen::VectorXd a(M), b(M);
    for (std::size_t bus = 0; bus < net.bus_count(); ++bus) {
        double var = slack_variance;
        if (bus != net.slack()) {
            const cplx dir = voltage[bus] / std::abs(voltage[bus]);
            a.setZero();
            b.setZero();
            for (auto k : net.path_to(bus)) {
                const auto& br = net.branches()[k];
                const double vn = net.buses()[net.downstream(k)].nominal_voltage;
                const auto kk = static_cast<Eigen::Index>(k);
                a[kk] = (dir.real() * br.resistance + dir.imag() * br.reactance) / vn;
                b[kk] = (dir.imag() * br.resistance - dir.real() * br.reactance) / vn;
            }
            var += a.dot(Cr * a) + b.dot(Ci * b);
        }
        u.voltage_sigma[bus] = std::sqrt(var);
        u.voltage_ci[bus] = kZ95 * u.voltage_sigma[bus];
    }
    return u;
}

/// Iterates model build, WLS solve, forward sweep and backward sweep until
/// the bus voltages settle.
inline EstimationResult estimate(const GridNetwork& net, const MeasurementSet& meas, const EstimatorConfig& cfg = {}) {
    const double prior = meas.slack_voltage;
    const double prior_var = meas.slack_sigma * meas.slack_sigma;
    double slack = prior;
    double slack_var = prior_var;
    std::vector<cplx> v(net.bus_count(), cplx(slack, 0.0));
    EstimationResult res;
    std::optional<MeasurementModel> mod;
    std::optional<GainMatrix> gain;
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        mod = build_model(net, meas, v, cfg.perturb_jacobian);
        gain.emplace(*mod);
        auto sol = solve_wls(*mod, *gain);
        const auto cur = phase_currents(sol.x, net.branch_count());
        auto nv = forward_sweep(net, cur, cplx(slack, 0.0));
        if (!meas.voltage.empty()) {
            const double bs = backward_sweep(net, cur, nv, meas.voltage, slack);
            if (cfg.fuse_slack_prior) {
                // Inverse-variance fusion of the reference prior with the
                // back-propagated mean.
                double var_bs = 0.0;
                for (const auto& m : meas.voltage) var_bs += m.sigma * m.sigma;
                var_bs /= double(meas.voltage.size()) * double(meas.voltage.size());
                slack_var = 1.0 / (1.0 / prior_var + 1.0 / var_bs);
                slack = slack_var * (prior / prior_var + bs / var_bs);
            } else {
                slack = bs;
                slack_var = 0.0;
                for (const auto& m : meas.voltage) slack_var += m.sigma * m.sigma;
                slack_var /= double(meas.voltage.size()) * double(meas.voltage.size());
            }
            nv = forward_sweep(net, cur, cplx(slack, 0.0));
        }
        double change = 0.0;
        for (std::size_t b = 0; b < nv.size(); ++b) change = std::max(change, std::abs(nv[b] - v[b]));
        v = std::move(nv);
        res.x = std::move(sol.x);
        res.objective = sol.objective;
        res.condition = sol.condition;
        res.iterations = it;
        if (change < cfg.tolerance) {
            res.converged = true;
            break;
        }
    }
    res.branch_current = phase_currents(res.x, net.branch_count());
    res.voltage = v;
    res.slack_voltage = slack;
    res.residual = mod->z - mod->H * res.x;
    if (cfg.uncertainty) {
        auto u = quantify_uncertainty(*mod, *gain, net, res.branch_current, res.voltage, slack_var);
        res.current_ci = std::move(u.current_ci);
        res.current_sigma_re = std::move(u.sigma_re);
        res.current_sigma_im = std::move(u.sigma_im);
        res.voltage_ci = std::move(u.voltage_ci);
    }
    return res;
}

inline nlohmann::json estimation_to_json(const GridNetwork& net, const EstimationResult& r) {
    nlohmann::json j;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["objective"] = r.objective;
    j["gain_condition"] = r.condition;
    j["slack_voltage_pu"] = r.slack_voltage;
    auto& jb = j["buses"] = nlohmann::json::array();
    for (std::size_t b = 0; b < net.bus_count(); ++b) {
        nlohmann::json e{{"id", net.buses()[b].id},
                         {"v_re_pu", r.voltage[b].real()},
                         {"v_im_pu", r.voltage[b].imag()},
                         {"v_abs_pu", std::abs(r.voltage[b])}};
        if (!r.voltage_ci.empty()) e["v_ci95_pu"] = r.voltage_ci[b];
        jb.push_back(e);
    }
    auto& jl = j["branches"] = nlohmann::json::array();
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        nlohmann::json e{{"id", net.branches()[k].id},
                         {"i_re_a", r.branch_current[k].real()},
                         {"i_im_a", r.branch_current[k].imag()},
                         {"i_abs_a", std::abs(r.branch_current[k])}};
        if (!r.current_ci.empty()) e["i_ci95_a"] = r.current_ci[k];
        jl.push_back(e);
    }
    j["residuals"] = std::vector<double>(r.residual.data(), r.residual.data() + r.residual.size());
    return j;
}

} // namespace lvse
