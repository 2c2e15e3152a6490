#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pwlab/functionals.hpp"
#include "pwlab/mesh.hpp"
#include "pwlab/nehari.hpp"
#include "pwlab/solve.hpp"

namespace pwlab {

/// Configuration of one evolution run of u_t - Lap u + delta u = |u|^{p-1} u.
/// delta = 0 gives the undamped equation. step_tol is the target for the
/// step-doubling error estimate (relative to the solution norm); with
/// adaptive = false the run integrates at fixed dt_init, which keeps the
/// identity-residual convergence studies interpretable.
struct FlowConfig {
    Params params;
    double dt_init = 1e-3;
    double dt_min = 1e-10;
    double t_max = 10.0;
    double blowup_sup_threshold = 1e6;
    double decay_h1_threshold = 1e-8;
    int snapshot_stride = 100;
    double safety = 0.9;
    double step_tol = 1e-7;
    bool adaptive = true;

    void validate() const {
        params.validate();
        if (!(dt_min > 0.0 && dt_min <= dt_init))
            throw std::invalid_argument("FlowConfig: need 0 < dt_min <= dt_init");
        if (!(t_max > 0.0)) throw std::invalid_argument("FlowConfig: t_max must be > 0");
        if (!(blowup_sup_threshold > 0.0 && decay_h1_threshold > 0.0))
            throw std::invalid_argument("FlowConfig: thresholds must be positive");
        if (snapshot_stride < 1) throw std::invalid_argument("FlowConfig: snapshot_stride >= 1");
        if (!(safety > 0.0 && safety <= 1.0))
            throw std::invalid_argument("FlowConfig: safety must be in (0, 1]");
        if (!(step_tol > 0.0)) throw std::invalid_argument("FlowConfig: step_tol must be > 0");
    }
};

/// Time series of functional reports along one run. Row n was produced by an
/// accepted step of size dts[n] ending at times[n]; ut_norm_sq[n] is the
/// squared L2 norm of (u_n - u_{n-1}) / dts[n] (row 0 carries zeros).
/// min_values records the nodewise minimum of each stored state.
struct Trajectory {
    FlowConfig config;
    std::vector<double> times;
    std::vector<FunctionalReport> reports;
    std::vector<double> ut_norm_sq;
    std::vector<double> dts;
    std::vector<double> min_values;
    std::vector<std::pair<double, GridFunction>> snapshots;

    std::size_t size() const { return times.size(); }
};

enum class OutcomeKind { GlobalDecay, BlowUp, Inconclusive };

inline const char* to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::GlobalDecay: return "GlobalDecay";
        case OutcomeKind::BlowUp: return "BlowUp";
        default: return "Inconclusive";
    }
}

/// Terminal classification of a run. BlowUp requires both the sup-norm
/// threshold crossing and the step controller pinned at dt_min with
/// continued growth; GlobalDecay requires the H1 seminorm to fall below
/// decay_h1_threshold before t_max.
struct FlowOutcome {
    OutcomeKind kind = OutcomeKind::Inconclusive;
    double t_reached = std::numeric_limits<double>::quiet_NaN();   ///< GlobalDecay
    double t_estimate = std::numeric_limits<double>::quiet_NaN();  ///< fitted blow-up time
    double last_finite_time = std::numeric_limits<double>::quiet_NaN();
    std::string reason;  ///< Inconclusive: "horizon" or "stall"
    bool final_membership_consistent = true;
};

namespace detail {

/// Thrown internally when the explicit reaction term overflows; the step
/// controller treats it as blow-up pressure.
struct OverflowSignal {};

inline GridFunction imex_step_unchecked(const GridFunction& u, double dt, const Params& params) {
    const Mesh& m = u.mesh();
    std::vector<double> rhs(u.size());
    const auto& v = u.values();
    for (std::size_t i = 0; i < rhs.size(); ++i) {
        rhs[i] = v[i] + dt * signed_power(v[i], params.p);
        if (!std::isfinite(rhs[i])) throw OverflowSignal{};
    }
    GridFunction b(u.mesh_ptr(), std::move(rhs));
    GridFunction next = solve_shifted_poisson(m, b, 1.0 + dt * params.delta, dt, 1e-12, &u);
    for (double x : next.values())
        if (!std::isfinite(x)) throw OverflowSignal{};
    return next;
}

/// Least-squares fit of the self-similar tail M(t) ~ c (T - t)^{-2/(p-1)}
/// over the last decade of mass growth: y = M^{-(p-1)/2} is linear in t.
inline double fit_blowup_time(const std::vector<double>& times, const std::vector<double>& mass,
                              double p, double fallback) {
    if (times.size() < 3) return fallback;
    const double m_last = mass.back();
    std::size_t start = times.size();
    while (start > 0 && mass[start - 1] >= 0.1 * m_last && mass[start - 1] > 0.0) --start;
    if (times.size() - start < 3) start = times.size() >= 5 ? times.size() - 5 : 0;

    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    std::size_t n = 0;
    const double expo = -0.5 * (p - 1.0);
    for (std::size_t i = start; i < times.size(); ++i) {
        if (!(mass[i] > 0.0)) continue;
        const double y = std::pow(mass[i], expo);
        st += times[i];
        sy += y;
        stt += times[i] * times[i];
        sty += times[i] * y;
        ++n;
    }
    if (n < 3) return fallback;
    const double denom = static_cast<double>(n) * stt - st * st;
    if (denom == 0.0) return fallback;
    const double slope = (static_cast<double>(n) * sty - st * sy) / denom;  // y ~ a + slope t
    const double intercept = (sy - slope * st) / static_cast<double>(n);
    if (!(slope < 0.0)) return fallback;
    const double T = -intercept / slope;  // zero crossing of y
    return std::max(T, fallback);
}

}  // namespace detail

/// One implicit-diffusion / explicit-reaction step:
///   (1 + dt delta) u+ - dt Lap u+ = u + dt |u|^{p-1} u.
/// The linear system is symmetric positive definite; overflow in the
/// reaction term is reported as blow-up pressure.
inline GridFunction step_imex(const GridFunction& u, double dt, const Params& params) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_imex: dt must be > 0");
    require_finite(u, "step_imex");
    try {
        return detail::imex_step_unchecked(u, dt, params);
    } catch (const detail::OverflowSignal&) {
        throw std::overflow_error("step_imex: reaction term overflowed (blow-up pressure)");
    }
}

/// Integrates the flow from phi with adaptive step doubling until the decay
/// threshold, blow-up detection, or t_max. The controller accepts the
/// two-half-steps composite and rescales dt by
/// clamp(safety * sqrt(step_tol / est), 0.2, 5) with est the step-doubling
/// discrepancy relative to the solution norm.
inline std::pair<Trajectory, FlowOutcome> run_flow(const GridFunction& phi, const FlowConfig& cfg) {
    cfg.validate();
    require_finite(phi, "run_flow");

    Trajectory traj;
    traj.config = cfg;
    FlowOutcome outcome;

    auto record = [&](double t, const GridFunction& u, double ut_sq, double dt_used) {
        traj.times.push_back(t);
        traj.reports.push_back(report(u, cfg.params));
        traj.ut_norm_sq.push_back(ut_sq);
        traj.dts.push_back(dt_used);
        traj.min_values.push_back(min_value(u));
    };

    record(0.0, phi, 0.0, 0.0);
    traj.snapshots.emplace_back(0.0, phi);

    if (is_zero(phi)) {
        outcome.kind = OutcomeKind::GlobalDecay;
        outcome.t_reached = 0.0;
        outcome.last_finite_time = 0.0;
        return {std::move(traj), std::move(outcome)};
    }

    GridFunction u = phi;
    double t = 0.0;
    double dt = cfg.dt_init;
    double prev_sup = sup_norm(phi);
    bool sup_exceeded = false;
    int stall_steps = 0;
    long step_index = 0;
    const double dt_floor = cfg.dt_min * (1.0 + 1e-12);

    auto classify_blowup = [&]() {
        outcome.kind = OutcomeKind::BlowUp;
        outcome.last_finite_time = traj.times.back();
        std::vector<double> mass(traj.reports.size());
        for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = traj.reports[i].M;
        outcome.t_estimate =
            detail::fit_blowup_time(traj.times, mass, cfg.params.p, traj.times.back());
    };

    while (t < cfg.t_max * (1.0 - 1e-14)) {
        dt = std::min(dt, cfg.t_max - t);
        dt = std::max(dt, cfg.dt_min);

        GridFunction candidate = GridFunction::zero(u.mesh_ptr());
        double est = 0.0;
        bool have_candidate = false;
        int rejections = 0;
        while (!have_candidate) {
            try {
                if (cfg.adaptive) {
                    GridFunction full = detail::imex_step_unchecked(u, dt, cfg.params);
                    GridFunction half = detail::imex_step_unchecked(u, 0.5 * dt, cfg.params);
                    GridFunction half2 = detail::imex_step_unchecked(half, 0.5 * dt, cfg.params);
                    const double diff = l2_norm(axpy(-1.0, full, half2));
                    const double scale_norm = std::max(l2_norm(half2), 1e-300);
                    est = diff / scale_norm;
                    if (est > cfg.step_tol && dt > dt_floor && rejections < 200) {
                        ++rejections;
                        dt = std::max(dt * std::clamp(cfg.safety * std::sqrt(cfg.step_tol / est),
                                                      0.2, 5.0),
                                      cfg.dt_min);
                        continue;
                    }
                    candidate = std::move(half2);
                } else {
                    candidate = detail::imex_step_unchecked(u, dt, cfg.params);
                    est = 0.0;
                }
                have_candidate = true;
            } catch (const detail::OverflowSignal&) {
                if (dt <= dt_floor || rejections >= 200) {
                    // Cannot advance at the floor: growth beyond representable range.
                    if (sup_exceeded || prev_sup > cfg.blowup_sup_threshold) {
                        classify_blowup();
                    } else {
                        outcome.kind = OutcomeKind::Inconclusive;
                        outcome.reason = "overflow";
                        outcome.last_finite_time = traj.times.back();
                    }
                    return {std::move(traj), std::move(outcome)};
                }
                ++rejections;
                dt = std::max(0.2 * dt, cfg.dt_min);
            }
        }

        const double dt_used = dt;
        t += dt_used;
        ++step_index;
        GridFunction diff = axpy(-1.0, u, candidate);
        const double ut_sq = inner_l2(diff, diff) / (dt_used * dt_used);
        u = std::move(candidate);
        record(t, u, ut_sq, dt_used);
        if (step_index % cfg.snapshot_stride == 0) traj.snapshots.emplace_back(t, u);

        const auto& rep = traj.reports.back();
        const double sup = rep.sup_norm;
        const bool growing = sup > prev_sup;

        if (std::sqrt(rep.h1_seminorm_sq) <= cfg.decay_h1_threshold) {
            outcome.kind = OutcomeKind::GlobalDecay;
            outcome.t_reached = t;
            outcome.last_finite_time = t;
            break;
        }

        if (sup > cfg.blowup_sup_threshold) sup_exceeded = true;
        const bool at_floor = dt_used <= dt_floor;
        if (sup_exceeded && at_floor && growing) {
            classify_blowup();
            break;
        }

        if (at_floor && !growing && !sup_exceeded) {
            if (++stall_steps >= 50) {
                outcome.kind = OutcomeKind::Inconclusive;
                outcome.reason = "stall";
                outcome.last_finite_time = t;
                break;
            }
        } else {
            stall_steps = 0;
        }

        if (cfg.adaptive) {
            const double factor =
                std::clamp(cfg.safety * std::sqrt(cfg.step_tol / std::max(est, 1e-300)), 0.2, 5.0);
            dt = std::max(dt_used * factor, cfg.dt_min);
        }
        prev_sup = sup;
    }

    if (outcome.kind == OutcomeKind::Inconclusive && outcome.reason.empty()) {
        outcome.reason = "horizon";
        outcome.last_finite_time = traj.times.back();
    }

    // Terminal-state consistency: decay should end with nonnegative Nehari
    // value (the origin is approached from inside {I > 0}); blow-up should
    // end with I_delta < 0.
    if (outcome.kind == OutcomeKind::GlobalDecay)
        outcome.final_membership_consistent = traj.reports.back().I >= -1e-12;
    else if (outcome.kind == OutcomeKind::BlowUp)
        outcome.final_membership_consistent = traj.reports.back().I_delta < 0.0;

    return {std::move(traj), std::move(outcome)};
}

/// Residuals of a trajectory identity check.
struct ResidualReport {
    double max_abs = 0.0;
    double median_abs = 0.0;
    double scale = 0.0;  ///< magnitude of the identity's right-hand side
    std::vector<double> residuals;
};

namespace detail {

/// Three-point derivative on a possibly nonuniform time grid.
inline double centered_derivative(double fm, double f0, double fp, double h_minus, double h_plus) {
    const double hm2 = h_minus * h_minus;
    const double hp2 = h_plus * h_plus;
    return (fp * hm2 - fm * hp2 + f0 * (hp2 - hm2)) / (h_plus * h_minus * (h_plus + h_minus));
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Mass identity dM/dt = -I_delta along the recorded trajectory (delta = 0
/// reduces to dM/dt = -I). Centered differences of M are compared with the
/// recorded Nehari values at interior times.
inline ResidualReport verify_mass_identity(const Trajectory& traj) {
    if (traj.size() < 3) throw std::invalid_argument("verify_mass_identity: need >= 3 steps");
    ResidualReport out;
    std::vector<double> abs_res;
    for (std::size_t n = 1; n + 1 < traj.size(); ++n) {
        const double hm = traj.times[n] - traj.times[n - 1];
        const double hp = traj.times[n + 1] - traj.times[n];
        const double dMdt = detail::centered_derivative(
            traj.reports[n - 1].M, traj.reports[n].M, traj.reports[n + 1].M, hm, hp);
        const double r = dMdt + traj.reports[n].I_delta;
        out.residuals.push_back(r);
        abs_res.push_back(std::abs(r));
        out.scale = std::max(out.scale, std::abs(traj.reports[n].I_delta));
        out.max_abs = std::max(out.max_abs, std::abs(r));
    }
    out.median_abs = detail::median_of(std::move(abs_res));
    return out;
}

/// Dissipation identity dE_lambda/dt = -|u_t|^2 - lambda I at the given
/// lambda (E_lambda is rebuilt from the recorded J and M). The |u_t|^2 value
/// at an interior time is the average of the two adjacent per-step
/// estimates. monotone_ok asserts E_lambda is nonincreasing while I > 0.
struct DissipationReport : ResidualReport {
    bool monotone_ok = true;
};

inline DissipationReport verify_dissipation_identity(const Trajectory& traj, double lambda) {
    if (traj.size() < 3)
        throw std::invalid_argument("verify_dissipation_identity: need >= 3 steps");
    DissipationReport out;
    std::vector<double> abs_res;
    auto E = [&](std::size_t n) { return traj.reports[n].J + lambda * traj.reports[n].M; };
    for (std::size_t n = 1; n + 1 < traj.size(); ++n) {
        const double hm = traj.times[n] - traj.times[n - 1];
        const double hp = traj.times[n + 1] - traj.times[n];
        const double dEdt = detail::centered_derivative(E(n - 1), E(n), E(n + 1), hm, hp);
        const double ut_sq = 0.5 * (traj.ut_norm_sq[n] + traj.ut_norm_sq[n + 1]);
        const double rhs = ut_sq + lambda * traj.reports[n].I;
        const double r = dEdt + rhs;
        out.residuals.push_back(r);
        abs_res.push_back(std::abs(r));
        out.scale = std::max(out.scale, std::abs(rhs));
        out.max_abs = std::max(out.max_abs, std::abs(r));
    }
    out.median_abs = detail::median_of(std::move(abs_res));
    for (std::size_t n = 0; n + 1 < traj.size(); ++n) {
        if (traj.reports[n].I > 0.0) {
            const double slack = 1e-12 * std::max(1.0, std::abs(E(n)));
            if (E(n + 1) > E(n) + slack) {
                out.monotone_ok = false;
                break;
            }
        }
    }
    return out;
}

/// Checks of the blow-up differential inequality along a BlowUp trajectory:
///  (a) the deficit -I_delta(v(t)) stays >= eps at every recorded time,
///  (b) the mass is strictly increasing and convex in its final phase,
///  (c) the embedding bound int v^2 <= |Omega|^{(p-1)/(p+1)} (int |v|^{p+1})^{2/(p+1)}
///      holds at every recorded time,
/// plus the composite bound dM/dt >= -2 d_eps + C(p,|Omega|) M^{(p+1)/2} with
/// C = (p-1)/(p+1) * 2^{(p+1)/2} / |Omega|^{(p-1)/2}, which is flagged
/// (counted) rather than failed on small-factor discrepancies.
struct BlowupOdeReport {
    bool deficit_ok = true;
    double deficit_min_margin = std::numeric_limits<double>::infinity();
    bool mass_increasing = true;
    bool convex_tail = true;
    bool embedding_ok = true;
    int composite_violations = 0;
    int composite_checked = 0;
};

inline BlowupOdeReport verify_blowup_ode(const Trajectory& traj, const FlowOutcome& outcome,
                                         double eps, double d_del_eps_lb, const Params& params) {
    if (outcome.kind != OutcomeKind::BlowUp)
        throw std::invalid_argument("verify_blowup_ode: trajectory was not classified BlowUp");
    if (traj.size() < 3) throw std::invalid_argument("verify_blowup_ode: trajectory too short");

    BlowupOdeReport out;
    const double p = params.p;
    const double measure = traj.snapshots.empty()
                               ? 0.0
                               : traj.snapshots.front().second.mesh().domain_measure();
    if (!(measure > 0.0))
        throw std::invalid_argument("verify_blowup_ode: trajectory carries no snapshot mesh");

    for (std::size_t n = 0; n < traj.size(); ++n) {
        const auto& r = traj.reports[n];
        const double margin = -r.I_delta - eps;
        out.deficit_min_margin = std::min(out.deficit_min_margin, margin);
        if (margin < -1e-12 * std::max(1.0, std::abs(r.I_delta))) out.deficit_ok = false;

        // Discrete Hoelder: int v^2 <= |Omega|^{(p-1)/(p+1)} (int |v|^{p+1})^{2/(p+1)}.
        const double lhs = 2.0 * r.M;
        const double rhs = std::pow(measure, (p - 1.0) / (p + 1.0)) *
                           std::pow(r.lp1_norm_pow, 2.0 / (p + 1.0));
        if (lhs > rhs * (1.0 + 1e-12)) out.embedding_ok = false;

        if (n > 0 && !(traj.reports[n].M > traj.reports[n - 1].M)) out.mass_increasing = false;
    }

    // Convexity of M over the last decade of growth.
    const double m_last = traj.reports.back().M;
    std::size_t start = traj.size();
    while (start > 0 && traj.reports[start - 1].M >= 0.1 * m_last) --start;
    for (std::size_t n = std::max<std::size_t>(start, 1); n + 1 < traj.size(); ++n) {
        const double hm = traj.times[n] - traj.times[n - 1];
        const double hp = traj.times[n + 1] - traj.times[n];
        const double second = 2.0 *
                              (traj.reports[n + 1].M * hm - traj.reports[n].M * (hm + hp) +
                               traj.reports[n - 1].M * hp) /
                              (hm * hp * (hm + hp));
        if (second < -1e-8 * std::max(1.0, traj.reports[n].M)) out.convex_tail = false;
    }

    // Composite bound with the explicit embedding constant.
    const double C = (p - 1.0) / (p + 1.0) * std::pow(2.0, 0.5 * (p + 1.0)) /
                     std::pow(measure, 0.5 * (p - 1.0));
    for (std::size_t n = 1; n + 1 < traj.size(); ++n) {
        const double hm = traj.times[n] - traj.times[n - 1];
        const double hp = traj.times[n + 1] - traj.times[n];
        const double dMdt = detail::centered_derivative(
            traj.reports[n - 1].M, traj.reports[n].M, traj.reports[n + 1].M, hm, hp);
        const double bound = -2.0 * d_del_eps_lb + C * std::pow(traj.reports[n].M, 0.5 * (p + 1.0));
        ++out.composite_checked;
        if (dMdt < bound - 1e-9 * std::max(1.0, std::abs(bound))) ++out.composite_violations;
    }
    return out;
}

/// True iff the run has settled onto the zero equilibrium: terminal H1
/// seminorm and sup-norm below the decay threshold and a monotone
/// nonincreasing H1 tail over the last 10 records.
inline bool omega_limit_check(const Trajectory& traj) {
    if (traj.size() == 0) return false;
    const auto& last = traj.reports.back();
    const double thr = traj.config.decay_h1_threshold;
    if (std::sqrt(last.h1_seminorm_sq) > thr || last.sup_norm > thr) return false;
    const std::size_t n = traj.size();
    if (n < 10) return n == 1;  // immediate equilibrium (zero datum) passes
    for (std::size_t k = n - 10; k + 1 < n; ++k) {
        if (traj.reports[k + 1].h1_seminorm_sq >
            traj.reports[k].h1_seminorm_sq * (1.0 + 1e-12))
            return false;
    }
    return true;
}

}  // namespace pwlab
