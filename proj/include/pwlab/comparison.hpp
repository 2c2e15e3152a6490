#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pwlab/flow.hpp"
#include "pwlab/functionals.hpp"
#include "pwlab/mesh.hpp"

namespace pwlab {

/// Synchronized twin-run record of the undamped flow u and the
/// delta-damped flow v from shared initial data. Gap statistics are
/// recorded while both flows are advancing; recording stops at the earlier
/// blow-up detection. ordering_holds certifies u >= v nodewise up to a
/// tolerance of tol_cmp_factor times the running sup-norm scale.
struct ComparisonReport {
    std::vector<double> times;
    std::vector<double> min_gap;        ///< per time: min over nodes of u - v
    std::vector<double> neg_part_mass;  ///< per time: int |(u - v)_-|^2
    std::vector<double> u_sup;
    std::vector<double> v_sup;
    bool ordering_holds = true;
    std::optional<double> u_blowup_time;  ///< detection time (last finite recorded time)
    std::optional<double> v_blowup_time;
    double tol_cmp_factor = 1e-8;
};

namespace detail {

struct LockstepFlow {
    GridFunction state;
    Params params;
    bool alive = true;
    bool sup_exceeded = false;
    double prev_sup = 0.0;
    std::optional<double> detection_time;
};

inline double comparison_gap_min(const GridFunction& u, const GridFunction& v) {
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u.size(); ++i) g = std::min(g, u[i] - v[i]);
    return g;
}

inline double negative_part_mass(const GridFunction& u, const GridFunction& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double w = u[i] - v[i];
        if (w < 0.0) s += w * w;
    }
    return u.mesh().quad_weight() * s;
}

}  // namespace detail

/// Twin-run driver with independent initial data for the two flows. This is
/// the fault-injection entry point; run_comparison is the public front that
/// enforces shared nonnegative data.
inline ComparisonReport run_comparison_pair(const GridFunction& phi_u, const GridFunction& phi_v,
                                            const FlowConfig& cfg, double delta) {
    cfg.validate();
    require_finite(phi_u, "run_comparison");
    require_finite(phi_v, "run_comparison");
    require_same_mesh(phi_u, phi_v, "run_comparison");
    if (!(delta >= 0.0)) throw std::invalid_argument("run_comparison: delta must be >= 0");

    ComparisonReport rep;

    detail::LockstepFlow u{phi_u, Params{cfg.params.p, cfg.params.lambda, 0.0}, true, false,
                           sup_norm(phi_u), std::nullopt};
    detail::LockstepFlow v{phi_v, Params{cfg.params.p, cfg.params.lambda, delta}, true, false,
                           sup_norm(phi_v), std::nullopt};

    auto record_gap = [&](double t) {
        rep.times.push_back(t);
        rep.min_gap.push_back(detail::comparison_gap_min(u.state, v.state));
        rep.neg_part_mass.push_back(detail::negative_part_mass(u.state, v.state));
        rep.u_sup.push_back(sup_norm(u.state));
        rep.v_sup.push_back(sup_norm(v.state));
    };
    record_gap(0.0);

    double t = 0.0;
    double dt = cfg.dt_init;
    const double dt_floor = cfg.dt_min * (1.0 + 1e-12);

    while (t < cfg.t_max * (1.0 - 1e-14) && (u.alive || v.alive)) {
        dt = std::min(dt, cfg.t_max - t);
        dt = std::max(dt, cfg.dt_min);

        bool accepted = false;
        double est = 0.0;
        GridFunction next_u = u.state;
        GridFunction next_v = v.state;
        int rejections = 0;
        while (!accepted) {
            bool overflowed = false;
            est = 0.0;
            for (detail::LockstepFlow* f : {&u, &v}) {
                if (!f->alive) continue;
                try {
                    GridFunction full = detail::imex_step_unchecked(f->state, dt, f->params);
                    GridFunction half = detail::imex_step_unchecked(f->state, 0.5 * dt, f->params);
                    GridFunction half2 = detail::imex_step_unchecked(half, 0.5 * dt, f->params);
                    const double diff = l2_norm(axpy(-1.0, full, half2));
                    est = std::max(est, diff / std::max(l2_norm(half2), 1e-300));
                    (f == &u ? next_u : next_v) = std::move(half2);
                } catch (const detail::OverflowSignal&) {
                    overflowed = true;
                    if (dt <= dt_floor || rejections >= 200) {
                        // Pinned at the floor and still overflowing: freeze
                        // this flow; detection requires the sup condition.
                        f->alive = false;
                        if (f->sup_exceeded || f->prev_sup > cfg.blowup_sup_threshold)
                            f->detection_time = rep.times.empty() ? t : t;
                    }
                }
            }
            if (!u.alive && !v.alive) break;
            if (overflowed) {
                if (dt <= dt_floor || rejections >= 200) break;  // frozen flows handled above
                ++rejections;
                dt = std::max(0.2 * dt, cfg.dt_min);
                continue;
            }
            if (cfg.adaptive && est > cfg.step_tol && dt > dt_floor && rejections < 200) {
                ++rejections;
                dt = std::max(dt * std::clamp(cfg.safety * std::sqrt(cfg.step_tol / est), 0.2, 5.0),
                              cfg.dt_min);
                continue;
            }
            accepted = true;
        }
        if (!accepted) {
            if (!u.alive && !v.alive) break;
            continue;
        }

        const double dt_used = dt;
        t += dt_used;
        const bool both_alive_before = u.alive && v.alive;
        const bool at_floor = dt_used <= dt_floor;

        for (detail::LockstepFlow* f : {&u, &v}) {
            if (!f->alive) continue;
            f->state = (f == &u) ? std::move(next_u) : std::move(next_v);
            const double sup = sup_norm(f->state);
            const bool growing = sup > f->prev_sup;
            if (sup > cfg.blowup_sup_threshold) f->sup_exceeded = true;
            if (f->sup_exceeded && at_floor && growing) {
                f->alive = false;
                f->detection_time = t;
            }
            f->prev_sup = sup;
        }

        if (both_alive_before && u.alive && v.alive) record_gap(t);

        if (cfg.adaptive) {
            const double factor =
                std::clamp(cfg.safety * std::sqrt(cfg.step_tol / std::max(est, 1e-300)), 0.2, 5.0);
            dt = std::max(dt_used * factor, cfg.dt_min);
        }
    }

    rep.u_blowup_time = u.detection_time;
    rep.v_blowup_time = v.detection_time;

    for (std::size_t n = 0; n < rep.times.size(); ++n) {
        const double scale_t = std::max(rep.u_sup[n], rep.v_sup[n]);
        if (rep.min_gap[n] < -rep.tol_cmp_factor * scale_t) {
            rep.ordering_holds = false;
            break;
        }
    }
    return rep;
}

/// Runs the undamped flow u and the delta-damped flow v from the same
/// nonnegative initial data on a shared time grid (the controller takes the
/// smaller of the two proposed steps) and records the nodewise ordering
/// statistics at every accepted step.
inline ComparisonReport run_comparison(const GridFunction& phi, const FlowConfig& cfg,
                                       double delta) {
    require_finite(phi, "run_comparison");
    if (is_zero(phi) || min_value(phi) < 0.0)
        throw std::invalid_argument("run_comparison: phi must be nonnegative and nonzero");
    return run_comparison_pair(phi, phi, cfg, delta);
}

/// Largest observed growth rate of the negative-part mass relative to its
/// size: max over recorded intervals of [d(npm)/dt] / max(npm, floor), with
/// floor the squared comparison tolerance. Values near zero certify that the
/// negative part never grows from zero beyond tolerance.
inline double gronwall_diagnostic(const ComparisonReport& rep) {
    if (rep.times.size() < 2) return 0.0;
    double floor = 0.0;
    for (std::size_t n = 0; n < rep.times.size(); ++n) {
        const double s = rep.tol_cmp_factor * std::max(rep.u_sup[n], rep.v_sup[n]);
        floor = std::max(floor, s * s);
    }
    if (floor == 0.0) floor = std::numeric_limits<double>::min();
    double diag = 0.0;
    for (std::size_t n = 0; n + 1 < rep.times.size(); ++n) {
        const double dt = rep.times[n + 1] - rep.times[n];
        if (!(dt > 0.0)) continue;
        const double rate = (rep.neg_part_mass[n + 1] - rep.neg_part_mass[n]) / dt;
        diag = std::max(diag, rate / std::max(rep.neg_part_mass[n], floor));
    }
    return diag;
}

}  // namespace pwlab
