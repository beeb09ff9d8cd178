#pragma once

// Balanced single-phase-equivalent AC power flow with ZIP loads.
//
// Per unit system: V_base = bus nominal voltage (231 V line-to-neutral),
// S_base = 100 kVA per phase. Injections are per phase; a device drawing
// P kW three-phase contributes P/3 kW to each phase.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "lvse/error.hpp"
#include "lvse/grid_model.hpp"
#include "lvse/profiles.hpp"
#include "lvse/scenario.hpp"

namespace lvse {

using cplx = std::complex<double>;

inline constexpr double kPhaseBaseVA = 1.0e5;
inline constexpr int kMaxNewtonIterations = 50;
inline constexpr double kMismatchTolerance = 1e-8; // p.u.

inline constexpr std::size_t kDeviceClassCount = 5;

inline ZipParams zip_of(std::size_t cls) { return builtin_zip(static_cast<DeviceClass>(cls)); }

/// S(v) = S_n (z v^2 + i v + p).
inline cplx evaluate_zip(cplx s_nominal, const ZipParams& zip, double v) {
    if (!(v > 0.0)) throw DomainError("ZIP evaluation needs a positive voltage");
    return s_nominal * (zip.z_share * v * v + zip.i_share * v + zip.p_share);
}

/// Reactive power of a device with active power p at power factor cos_phi;
/// inductive (Q >= 0) for consumption, sign follows P.
inline double reactive_from_pf(double p, double cos_phi) {
    if (cos_phi >= 1.0) return 0.0;
    return p * std::tan(std::acos(cos_phi));
}

/// Per-bus nominal consumption per device class (W and var per phase,
/// consumption positive, PV negative).
struct InjectionSet {
    std::vector<std::array<cplx, kDeviceClassCount>> load;
    double pv_generation_w = 0.0; // total PV magnitude, per phase
    double demand_w = 0.0;        // total consumption, per phase

    InjectionSet() = default;
    explicit InjectionSet(std::size_t buses) : load(buses) {
        for (auto& a : load) a.fill(cplx{});
    }

    void add(std::size_t bus, DeviceClass cls, double p_w) {
        const auto zip = builtin_zip(cls);
        load[bus][static_cast<std::size_t>(cls)] += cplx(p_w, reactive_from_pf(p_w, zip.cos_phi));
        if (cls == DeviceClass::pv)
            pv_generation_w += -p_w;
        else
            demand_w += p_w;
    }

    /// Nominal (v = 1) complex load at a bus.
    cplx nominal(std::size_t bus) const {
        cplx s{};
        for (auto c : load[bus]) s += c;
        return s;
    }

    /// Load at voltage magnitude v (p.u.).
    cplx at_voltage(std::size_t bus, double v) const {
        cplx s{};
        for (std::size_t c = 0; c < kDeviceClassCount; ++c)
            if (load[bus][c] != cplx{}) s += evaluate_zip(load[bus][c], zip_of(c), v);
        return s;
    }

    /// d|S|/dv of the load at voltage v (complex, per p.u. voltage).
    cplx dv_at_voltage(std::size_t bus, double v) const {
        cplx s{};
        for (std::size_t c = 0; c < kDeviceClassCount; ++c) {
            const auto zip = zip_of(c);
            s += load[bus][c] * (2.0 * zip.z_share * v + zip.i_share);
        }
        return s;
    }

    InjectionSet scaled(double f) const {
        InjectionSet out = *this;
        for (auto& a : out.load)
            for (auto& c : a) c *= f;
        out.pv_generation_w *= f;
        out.demand_w *= f;
        return out;
    }
};

/// Nominal injections of a scenario at one time step.
inline InjectionSet build_injections(const GridNetwork& net, const ScenarioSpec& scenario, const ProfileSet& profiles,
                                     std::size_t step) {
    InjectionSet inj(net.bus_count());
    for (const auto& a : scenario.assignments) {
        const auto b = net.bus_index(a.ncp_id);
        for (const auto& d : a.devices) {
            const double kw = d.scale * profiles.get(d.kind, d.variant).values.at(step);
            inj.add(b, d.cls, kw * 1000.0 / 3.0);
        }
    }
    return inj;
}

struct SnapshotState {
    std::vector<cplx> voltage;        // p.u.
    std::vector<cplx> branch_current; // A, upstream to downstream
    std::vector<cplx> load;           // W/var per phase actually drawn at the solved voltage
    double trafo_loading = 0.0;       // % of rating
    bool converged = false;
    int iterations = 0;

    /// Branch loading in % of the thermal limit.
    double line_loading(const GridNetwork& net, std::size_t k) const {
        return 100.0 * std::abs(branch_current[k]) / net.branches()[k].thermal_limit;
    }
};

namespace detail {

/// Transformer loading: three-phase apparent power leaving the slack.
inline double trafo_loading(const GridNetwork& net, const std::vector<cplx>& v, const std::vector<cplx>& i_branch) {
    cplx i_slack{};
    for (auto k : net.child_branches(net.slack())) i_slack += i_branch[k];
    const double vn = net.buses()[net.slack()].nominal_voltage;
    const cplx s = v[net.slack()] * vn * std::conj(i_slack);
    return 100.0 * 3.0 * std::abs(s) / (net.transformer().rating_kva * 1000.0);
}

inline void finish_state(const GridNetwork& net, const InjectionSet& inj, SnapshotState& st) {
    const auto nb = net.branch_count();
    st.branch_current.assign(nb, cplx{});
    for (std::size_t k = 0; k < nb; ++k) {
        const auto& br = net.branches()[k];
        const double vn = net.buses()[net.upstream(k)].nominal_voltage;
        const cplx z(br.resistance, br.reactance);
        st.branch_current[k] = (st.voltage[net.upstream(k)] - st.voltage[net.downstream(k)]) * vn / z;
    }
    st.load.assign(net.bus_count(), cplx{});
    for (std::size_t b = 0; b < net.bus_count(); ++b)
        if (b != net.slack()) st.load[b] = inj.at_voltage(b, std::abs(st.voltage[b]));
    st.trafo_loading = trafo_loading(net, st.voltage, st.branch_current);
}

inline SnapshotState failed_state(int iterations) {
    SnapshotState st;
    st.converged = false;
    st.iterations = iterations;
    return st;
}

} // namespace detail

/// Newton-Raphson solver in polar coordinates with a sparse Jacobian. The
/// Jacobian pattern is analysed once per network; an instance is not
/// thread-safe, use one per worker.
class NewtonRaphsonSolver {
public:
    explicit NewtonRaphsonSolver(const GridNetwork& net) : net_(&net) {
        const auto n = net.bus_count();
        pos_.assign(n, -1);
        int k = 0;
        for (std::size_t b = 0; b < n; ++b)
            if (b != net.slack()) pos_[b] = k++;
        m_ = k;
        ydiag_.assign(n, cplx{});
        yline_.resize(net.branch_count());
        for (std::size_t l = 0; l < net.branch_count(); ++l) {
            const auto& br = net.branches()[l];
            const double zb = net.buses()[net.upstream(l)].nominal_voltage *
                              net.buses()[net.upstream(l)].nominal_voltage / kPhaseBaseVA;
            const cplx y = 1.0 / (cplx(br.resistance, br.reactance) / zb);
            yline_[l] = y;
            ydiag_[net.upstream(l)] += y;
            ydiag_[net.downstream(l)] += y;
        }
        // Sparsity pattern: each bus couples to itself and its tree neighbours.
        std::vector<Eigen::Triplet<double>> t;
        auto couple = [&](int i, int j) {
            if (i < 0 || j < 0) return;
            t.emplace_back(i, j, 1.0);
            t.emplace_back(i, j + m_, 1.0);
            t.emplace_back(i + m_, j, 1.0);
            t.emplace_back(i + m_, j + m_, 1.0);
        };
        for (std::size_t b = 0; b < n; ++b) couple(pos_[b], pos_[b]);
        for (std::size_t l = 0; l < net.branch_count(); ++l) {
            couple(pos_[net.upstream(l)], pos_[net.downstream(l)]);
            couple(pos_[net.downstream(l)], pos_[net.upstream(l)]);
        }
        jac_.resize(2 * m_, 2 * m_);
        jac_.setFromTriplets(t.begin(), t.end());
        jac_.makeCompressed();
        if (m_ > 0) lu_.analyzePattern(jac_);
    }

    SnapshotState solve(const InjectionSet& inj, std::optional<double> slack_voltage = std::nullopt) {
        const auto& net = *net_;
        const auto n = net.bus_count();
        const double vs = slack_voltage.value_or(net.transformer().oltc_target);
        std::vector<cplx> v(n, cplx(vs, 0.0));
        std::vector<cplx> ibus(n);
        std::vector<cplx> mis(n);
        SnapshotState st;
        Eigen::VectorXd f(2 * m_), dx(2 * m_);

        auto evaluate = [&]() {
            std::fill(ibus.begin(), ibus.end(), cplx{});
            for (std::size_t b = 0; b < n; ++b) ibus[b] = ydiag_[b] * v[b];
            for (std::size_t l = 0; l < net.branch_count(); ++l) {
                const auto u = net.upstream(l), d = net.downstream(l);
                ibus[u] -= yline_[l] * v[d];
                ibus[d] -= yline_[l] * v[u];
            }
            double worst = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                if (pos_[b] < 0) continue;
                const cplx s_load = inj.at_voltage(b, std::abs(v[b])) / kPhaseBaseVA;
                mis[b] = v[b] * std::conj(ibus[b]) + s_load;
                f[pos_[b]] = mis[b].real();
                f[pos_[b] + m_] = mis[b].imag();
                worst = std::max({worst, std::abs(mis[b].real()), std::abs(mis[b].imag())});
            }
            return worst;
        };

        // One Newton update in place; false on a singular or unphysical step.
        auto step = [&]() {
            assemble(inj, v, ibus);
            lu_.factorize(jac_);
            if (lu_.info() != Eigen::Success) return false;
            dx = lu_.solve(f);
            if (lu_.info() != Eigen::Success) return false;
            std::vector<cplx> next = v;
            for (std::size_t b = 0; b < n; ++b) {
                if (pos_[b] < 0) continue;
                const double va = std::arg(v[b]) - dx[pos_[b]];
                const double vm = std::abs(v[b]) - dx[pos_[b] + m_];
                if (!(vm > 1e-3) || !std::isfinite(va)) return false;
                next[b] = std::polar(vm, va);
            }
            v = std::move(next);
            return true;
        };

        int it = 0;
        for (;; ++it) {
            const double worst = evaluate();
            if (!std::isfinite(worst)) return detail::failed_state(it);
            if (worst < kMismatchTolerance) break;
            if (it >= kMaxNewtonIterations) return detail::failed_state(it);
            if (!step()) return detail::failed_state(it + 1);
        }
        // A final update past the tolerance costs one solve and brings the
        // state to round-off accuracy; v is untouched if it fails.
        if (it > 0) step();
        st.voltage = std::move(v);
        st.converged = true;
        st.iterations = it;
        detail::finish_state(net, inj, st);
        return st;
    }

private:
    void set(int r, int c, double val) { jac_.coeffRef(r, c) = val; }

    // Partial derivatives of the mismatch S_calc + S_load(|V|) w.r.t. angle
    // and magnitude of the non-slack buses.
    void assemble(const InjectionSet& inj, const std::vector<cplx>& v, const std::vector<cplx>& ibus) {
        const auto& net = *net_;
        const cplx j(0.0, 1.0);
        for (int k = 0; k < jac_.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator itr(jac_, k); itr; ++itr) itr.valueRef() = 0.0;
        auto put = [&](int r, int c, cplx d_va, cplx d_vm) {
            set(r, c, d_va.real());
            set(r, c + m_, d_vm.real());
            set(r + m_, c, d_va.imag());
            set(r + m_, c + m_, d_vm.imag());
        };
        for (std::size_t b = 0; b < net.bus_count(); ++b) {
            const int r = pos_[b];
            if (r < 0) continue;
            const double vm = std::abs(v[b]);
            const cplx vnorm = v[b] / vm;
            const cplx d_va = j * v[b] * std::conj(ibus[b] - ydiag_[b] * v[b]);
            const cplx d_vm = v[b] * std::conj(ydiag_[b] * vnorm) + std::conj(ibus[b]) * vnorm +
                              inj.dv_at_voltage(b, vm) / kPhaseBaseVA;
            put(r, r, d_va, d_vm);
        }
        for (std::size_t l = 0; l < net.branch_count(); ++l) {
            const auto u = net.upstream(l), d = net.downstream(l);
            const cplx y = -yline_[l];
            for (auto [a, b] : {std::pair{u, d}, std::pair{d, u}}) {
                const int r = pos_[a], c = pos_[b];
                if (r < 0 || c < 0) continue;
                const cplx d_va = -j * v[a] * std::conj(y * v[b]);
                const cplx d_vm = v[a] * std::conj(y * v[b] / std::abs(v[b]));
                put(r, c, d_va, d_vm);
            }
        }
    }

    const GridNetwork* net_;
    std::vector<int> pos_;
    int m_ = 0;
    std::vector<cplx> ydiag_, yline_;
    Eigen::SparseMatrix<double> jac_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

inline SnapshotState solve_newton_raphson(const GridNetwork& net, const InjectionSet& inj) {
    NewtonRaphsonSolver solver(net);
    return solver.solve(inj);
}

/// Backward/forward sweep: accumulate load currents towards the slack, then
/// update voltages outward, until the voltage update falls below 1e-13 p.u.
/// and the power mismatch below the Newton tolerance.
inline SnapshotState solve_sweep_oracle(const GridNetwork& net, const InjectionSet& inj, int max_iterations = 2000) {
    const auto n = net.bus_count();
    const double vs = net.transformer().oltc_target;
    std::vector<cplx> v(n, cplx(vs, 0.0));
    std::vector<cplx> ib(net.branch_count());
    const auto& order = net.bfs_order();
    for (int it = 1; it <= max_iterations; ++it) {
        // Backward: bus load currents in amperes, summed up the tree.
        std::vector<cplx> acc(n, cplx{});
        for (std::size_t b = 0; b < n; ++b) {
            if (b == net.slack()) continue;
            const double vn = net.buses()[b].nominal_voltage;
            acc[b] = std::conj(inj.at_voltage(b, std::abs(v[b])) / (v[b] * vn));
        }
        for (auto r = order.rbegin(); r != order.rend(); ++r) {
            const auto b = *r;
            if (b == net.slack()) continue;
            const auto k = *net.parent_branch(b);
            ib[k] = acc[b];
            acc[net.upstream(k)] += acc[b];
        }
        // Forward.
        double dv = 0.0;
        for (auto b : order) {
            if (b == net.slack()) continue;
            const auto k = *net.parent_branch(b);
            const auto& br = net.branches()[k];
            const double vn = net.buses()[b].nominal_voltage;
            const cplx nv = v[net.upstream(k)] - cplx(br.resistance, br.reactance) * ib[k] / vn;
            dv = std::max(dv, std::abs(nv - v[b]));
            v[b] = nv;
        }
        if (!std::isfinite(dv)) return detail::failed_state(it);
        if (dv < 1e-13) {
            SnapshotState st;
            st.voltage = v;
            st.converged = true;
            st.iterations = it;
            detail::finish_state(net, inj, st);
            return st;
        }
    }
    return detail::failed_state(max_iterations);
}

/// Per-step summary kept for every step of a run.
struct StepSummary {
    std::size_t step = 0;
    bool converged = false;
    double trafo_loading = 0.0;
    double min_v = 0.0;
    double max_v = 0.0;
    double max_line_loading = 0.0;
    std::size_t max_line = 0;
    double pv_generation_w = 0.0;
    double demand_w = 0.0;
};

inline StepSummary summarize(const GridNetwork& net, const SnapshotState& st, std::size_t step, const InjectionSet& inj) {
    StepSummary s;
    s.step = step;
    s.converged = st.converged;
    s.pv_generation_w = inj.pv_generation_w;
    s.demand_w = inj.demand_w;
    if (!st.converged) return s;
    s.trafo_loading = st.trafo_loading;
    s.min_v = std::numeric_limits<double>::infinity();
    s.max_v = -s.min_v;
    for (std::size_t b = 0; b < net.bus_count(); ++b) {
        const double m = std::abs(st.voltage[b]);
        s.min_v = std::min(s.min_v, m);
        s.max_v = std::max(s.max_v, m);
    }
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        const double l = st.line_loading(net, k);
        if (l > s.max_line_loading) {
            s.max_line_loading = l;
            s.max_line = k;
        }
    }
    return s;
}

struct RetainedStep {
    std::size_t step = 0;
    SnapshotState state;
    InjectionSet injections;
};

struct TimeseriesResult {
    std::vector<StepSummary> summaries;
    std::vector<RetainedStep> retained; // ascending step order
};

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs `fn(i)` for i in [0, n) over `threads` workers in contiguous blocks.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, 0u);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    constexpr std::size_t chunk = 64;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (;;) {
                    const auto begin = next.fetch_add(chunk);
                    if (begin >= n) break;
                    for (auto i = begin; i < std::min(n, begin + chunk); ++i) fn(i, t);
                }
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

using InjectionSource = std::function<InjectionSet(std::size_t step)>;
using RetainPredicate = std::function<bool(const StepSummary&)>;

/// Solves `steps` power flows; keeps the full state only where `retain` holds.
inline TimeseriesResult run_timeseries(const GridNetwork& net, const InjectionSource& injections, std::size_t steps,
                                       const RetainPredicate& retain, unsigned threads = default_threads()) {
    TimeseriesResult out;
    out.summaries.resize(steps);
    std::vector<std::optional<RetainedStep>> kept(steps);
    threads = std::max(1u, threads);
    std::vector<std::unique_ptr<NewtonRaphsonSolver>> solvers;
    for (unsigned t = 0; t < threads; ++t) solvers.push_back(std::make_unique<NewtonRaphsonSolver>(net));
    parallel_for(steps, threads, [&](std::size_t s, unsigned t) {
        auto inj = injections(s);
        auto st = solvers[t]->solve(inj);
        out.summaries[s] = summarize(net, st, s, inj);
        if (retain(out.summaries[s])) kept[s] = RetainedStep{s, std::move(st), std::move(inj)};
    });
    for (auto& k : kept)
        if (k) out.retained.push_back(std::move(*k));
    return out;
}

inline TimeseriesResult run_timeseries(const GridNetwork& net, const ScenarioSpec& scenario, const ProfileSet& profiles,
                                       const RetainPredicate& retain, unsigned threads = default_threads(),
                                       std::size_t steps = kStepsPerYear) {
    return run_timeseries(
        net, [&](std::size_t s) { return build_injections(net, scenario, profiles, s); }, steps, retain, threads);
}

} // namespace lvse
