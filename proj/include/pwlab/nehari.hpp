#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pwlab/functionals.hpp"
#include "pwlab/mesh.hpp"
#include "pwlab/solve.hpp"

namespace pwlab {

/// |x|^{p-1} x, defined for all real x and real p > 1.
inline double signed_power(double x, double p) {
    if (p == 3.0) return x * x * x;
    if (x == 0.0) return 0.0;
    return std::pow(std::abs(x), p - 1.0) * x;
}

struct SolverOptions {
    double tol_stationarity = 1e-8;  ///< L2 norm of the Euler-Lagrange residual
    double tol_nehari = 1e-10;       ///< relative tolerance for on-manifold certificates
    int max_iters = 50000;
};

/// Thrown when a depth solver fails to reach tol_stationarity; carries the
/// last iterate and its residual so the failure is diagnosable.
class ConvergenceFailure : public std::runtime_error {
public:
    ConvergenceFailure(const std::string& what, GridFunction last_iterate, int iterations,
                       double residual)
        : std::runtime_error(what + " (iterations=" + std::to_string(iterations) +
                             ", residual=" + std::to_string(residual) + ")"),
          last_iterate_(std::move(last_iterate)),
          iterations_(iterations),
          residual_(residual) {}

    const GridFunction& last_iterate() const { return last_iterate_; }
    int iterations() const { return iterations_; }
    double residual() const { return residual_; }

private:
    GridFunction last_iterate_;
    int iterations_;
    double residual_;
};

struct NehariScale {
    double t_star = 0.0;
    GridFunction scaled;
};

/// Unique positive root of I_delta(t u) = 0 along the ray t u:
///   t* = [(|grad u|^2 + delta |u|^2) / int |u|^{p+1}]^{1/(p-1)}.
/// With delta = 0 this is the projection onto the Nehari set {I = 0}.
inline NehariScale nehari_scale(const GridFunction& u, const Params& params) {
    require_finite(u, "nehari_scale");
    if (is_zero(u)) throw std::invalid_argument("nehari_scale: u must be nonzero");
    const double Q = grad_norm_sq(u) + params.delta * inner_l2(u, u);
    const double P = integrate_power(u, params.p + 1.0);
    const double t_star = std::pow(Q / P, 1.0 / (params.p - 1.0));
    return NehariScale{t_star, scale(t_star, u)};
}

/// Scales u along its ray so that I_delta(t u) = -eps (the unique root above
/// the Nehari scaling t*). Used to construct test data with a prescribed
/// Nehari deficit.
inline GridFunction scale_to_prescribed_deficit(const GridFunction& u, const Params& params,
                                                double eps) {
    require_finite(u, "scale_to_prescribed_deficit");
    if (is_zero(u)) throw std::invalid_argument("scale_to_prescribed_deficit: u must be nonzero");
    if (!(eps > 0.0)) throw std::invalid_argument("scale_to_prescribed_deficit: eps must be > 0");
    const double Q = grad_norm_sq(u) + params.delta * inner_l2(u, u);
    const double P = integrate_power(u, params.p + 1.0);
    auto I_of = [&](double t) { return t * t * Q - std::pow(t, params.p + 1.0) * P; };
    double lo = std::pow(Q / P, 1.0 / (params.p - 1.0));  // I_delta = 0 here
    double hi = lo;
    while (I_of(hi) > -eps) hi *= 2.0;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (I_of(mid) > -eps)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-16 * hi) break;
    }
    return scale(0.5 * (lo + hi), u);
}

namespace detail {

/// Rescales u so int |u|^{p+1} = 1.
inline GridFunction normalize_lp1(const GridFunction& u, double p) {
    const double P = integrate_power(u, p + 1.0);
    return scale(std::pow(P, -1.0 / (p + 1.0)), u);
}

/// Minimizes a scale-free functional over nonzero grid functions by
/// gradient descent in the H1 metric induced by (-Lap + shift I):
/// the descent direction solves (-Lap + shift) g = residual, a backtracking
/// line search enforces Armijo decrease of the (scale-invariant) value, the
/// iterate is folded into the nonnegative cone and renormalized to
/// int |u|^{p+1} = 1 after every accepted step. Convergence is declared on
/// the L2 norm of the Euler-Lagrange residual.
struct ScaleFreeProblem {
    // value(u): the scale-invariant objective.
    std::function<double(const GridFunction&)> value;
    // residual(u): nodal L2-gradient, valid for int |u|^{p+1} = 1 iterates.
    std::function<GridFunction(const GridFunction&)> residual;
    double metric_shift = 0.0;
    double p = 3.0;
};

struct MinimizeResult {
    GridFunction minimizer;
    double value = 0.0;
    int iterations = 0;
    double residual = 0.0;
};

inline MinimizeResult minimize_scale_free(const Mesh& mesh, const ScaleFreeProblem& prob,
                                          const GridFunction& init, const SolverOptions& opts,
                                          const char* label) {
    GridFunction u = normalize_lp1(abs_values(init), prob.p);
    double step = 1.0;
    double res_norm = std::numeric_limits<double>::infinity();
    int iter = 0;

    for (; iter < opts.max_iters; ++iter) {
        GridFunction r = prob.residual(u);
        res_norm = l2_norm(r);
        if (res_norm <= opts.tol_stationarity)
            return MinimizeResult{u, prob.value(u), iter, res_norm};

        GridFunction g = solve_shifted_poisson(mesh, r, prob.metric_shift, 1.0, 1e-12, &r);
        const double slope = 2.0 * inner_l2(r, g);  // descent rate along -g

        const double f0 = prob.value(u);
        // Once the certified Armijo decrease falls below the round-off floor
        // of the value, progress is validated on the residual norm instead.
        const double value_noise = 1e-13 * std::max(1.0, std::abs(f0));
        bool accepted = false;
        double t = step;
        for (int ls = 0; ls < 60; ++ls) {
            GridFunction trial = abs_values(axpy(-t, g, u));
            if (is_zero(trial)) {
                t *= 0.5;
                continue;
            }
            trial = normalize_lp1(trial, prob.p);
            const double ft = prob.value(trial);
            if (ft <= f0 - 1e-4 * t * slope) {
                u = std::move(trial);
                step = std::min(t * 1.3, 4.0);
                accepted = true;
                break;
            }
            if (ft <= f0 + value_noise &&
                l2_norm(prob.residual(trial)) <= 0.9999 * res_norm) {
                u = std::move(trial);
                step = std::min(t * 1.3, 4.0);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;  // no certifiable progress left at this residual
    }

    GridFunction r = prob.residual(u);
    res_norm = l2_norm(r);
    if (res_norm <= opts.tol_stationarity)
        return MinimizeResult{u, prob.value(u), iter, res_norm};
    throw ConvergenceFailure(std::string(label) + ": did not reach stationarity tolerance", u, iter,
                             res_norm);
}

}  // namespace detail

struct GroundState {
    double A_min = 0.0;      ///< minimized quotient value
    GridFunction ustar;      ///< nonnegative minimizer with int |u|^{p+1} = 1
    int iterations = 0;
    double residual = 0.0;   ///< L2 norm of (-Lap + delta) u - A_min * u^p
};

/// Minimizes the quotient (|grad u|^2 + delta |u|^2) / |u|_{p+1}^2 over
/// nonnegative nonzero grid functions. Initialization from the first
/// discrete Dirichlet eigenvector; the minimizer solves the discrete
/// Euler-Lagrange equation (-Lap + delta) u = A_min u^p.
inline GroundState ground_state(const MeshPtr& mesh, const Params& params,
                                const SolverOptions& opts = {}) {
    params.validate();
    const Mesh& m = *mesh;
    const double p = params.p;
    const double delta = params.delta;

    detail::ScaleFreeProblem prob;
    prob.p = p;
    prob.metric_shift = delta;
    prob.value = [&m, p, delta](const GridFunction& u) {
        const double num = grad_norm_sq(m, u) + delta * inner_l2(m, u, u);
        return num / std::pow(integrate_power(m, u, p + 1.0), 2.0 / (p + 1.0));
    };
    prob.residual = [&m, p, delta](const GridFunction& u) {
        const double Q = grad_norm_sq(m, u) + delta * inner_l2(m, u, u);
        GridFunction lap = apply_laplacian(m, u);
        std::vector<double> r(u.size());
        for (std::size_t i = 0; i < r.size(); ++i)
            r[i] = -lap[i] + delta * u[i] - Q * signed_power(u[i], p);
        return GridFunction(u.mesh_ptr(), std::move(r));
    };

    GridFunction init = first_dirichlet_mode(mesh).eigfn;
    auto res = detail::minimize_scale_free(m, prob, init, opts, "ground_state");
    return GroundState{res.value, std::move(res.minimizer), res.iterations, res.residual};
}

/// Well depth from the minimized quotient:
///   d_delta = (p-1)/(2(p+1)) * A^{(p+1)/(p-1)}.
inline double depth_from_A(double A_min, const Params& params) {
    if (!(A_min > 0.0)) throw std::invalid_argument("depth_from_A: A_min must be > 0");
    const double p = params.p;
    return (p - 1.0) / (2.0 * (p + 1.0)) * std::pow(A_min, (p + 1.0) / (p - 1.0));
}

enum class DepthMethod { formula, direct };

inline const char* to_string(DepthMethod m) {
    return m == DepthMethod::formula ? "formula" : "direct";
}

/// Well depths at one (p, lambda, delta) triple.
///  - d: depth at lambda = delta = 0 (quotient-formula route)
///  - d_lambda: infimum of E_lambda over the Nehari set {I = 0} (direct route)
///  - d_delta: quotient-formula depth at the given delta
/// The minimizer is the direct-route direction projected onto {I = 0}, so
/// E_lambda(minimizer) = d_lambda and |I(minimizer)| is at certificate level.
struct WellDepths {
    double d = 0.0;
    double d_lambda = 0.0;
    double d_delta = 0.0;
    GridFunction minimizer;
    DepthMethod method = DepthMethod::direct;
    int iterations = 0;
    double residual = 0.0;
};

namespace detail {

/// Direct minimization of w -> E_lambda(t*(w) w) with t*(w) the {I = 0}
/// projection. The composite is scale-free in w; its value at the root is
///   F(w) = tau * (alpha_c G + (lambda/2) S),  tau = (G/P)^{2/(p-1)},
/// with G = |grad w|^2, S = int w^2, P = int |w|^{p+1},
/// alpha_c = (p-1)/(2(p+1)).
inline MinimizeResult minimize_d_lambda(const MeshPtr& mesh, const Params& params,
                                        const SolverOptions& opts) {
    const Mesh& m = *mesh;
    const double p = params.p;
    const double lambda = params.lambda;
    const double alpha_c = (p - 1.0) / (2.0 * (p + 1.0));

    ScaleFreeProblem prob;
    prob.p = p;
    prob.metric_shift = lambda;
    prob.value = [&m, p, lambda, alpha_c](const GridFunction& w) {
        const double G = grad_norm_sq(m, w);
        const double S = inner_l2(m, w, w);
        const double P = integrate_power(m, w, p + 1.0);
        const double tau = std::pow(G / P, 2.0 / (p - 1.0));
        return tau * (alpha_c * G + 0.5 * lambda * S);
    };
    prob.residual = [&m, p, lambda, alpha_c](const GridFunction& w) {
        const double G = grad_norm_sq(m, w);
        const double S = inner_l2(m, w, w);
        const double P = integrate_power(m, w, p + 1.0);
        const double tau = std::pow(G / P, 2.0 / (p - 1.0));
        const double B = alpha_c * G + 0.5 * lambda * S;
        const double two_over = 2.0 / (p - 1.0);
        const double fG = two_over * tau / G * B + tau * alpha_c;
        const double fP = -two_over * tau / P * B;
        const double fS = 0.5 * tau * lambda;
        GridFunction lap = apply_laplacian(m, w);
        std::vector<double> r(w.size());
        const double p_half = 0.5 * (p + 1.0);
        for (std::size_t i = 0; i < r.size(); ++i)
            r[i] = fG * (-lap[i]) + fP * p_half * signed_power(w[i], p) + fS * w[i];
        return GridFunction(w.mesh_ptr(), std::move(r));
    };

    GridFunction init = first_dirichlet_mode(mesh).eigfn;
    return minimize_scale_free(m, prob, init, opts, "depth_d_lambda");
}

}  // namespace detail

/// Computes d, d_lambda and d_delta on one mesh. The lambda depth is found
/// by direct minimization over directions; the delta depth (and d itself)
/// through the quotient formula. For lambda = 0 the two routes compute the
/// same infimum by independent paths and must agree to solver accuracy.
inline WellDepths depth_d_lambda(const MeshPtr& mesh, const Params& params,
                                 const SolverOptions& opts = {}) {
    params.validate();

    Params base{params.p, 0.0, 0.0};
    GroundState gs0 = ground_state(mesh, base, opts);
    const double d = depth_from_A(gs0.A_min, base);

    double d_delta = d;
    if (params.delta > 0.0) {
        Params pd{params.p, 0.0, params.delta};
        GroundState gsd = ground_state(mesh, pd, opts);
        d_delta = depth_from_A(gsd.A_min, pd);
    }

    auto direct = detail::minimize_d_lambda(mesh, params, opts);
    Params proj{params.p, 0.0, 0.0};
    GridFunction minimizer = nehari_scale(direct.minimizer, proj).scaled;

    WellDepths out{d, direct.value, d_delta, std::move(minimizer), DepthMethod::direct,
                   direct.iterations, direct.residual};
    return out;
}

/// One row of the depth table CSV: lambda rows carry direct-route depths of
/// E_lambda on {I = 0}; delta rows carry formula-route depths.
struct DepthEntry {
    double p = 0.0;
    double lambda = 0.0;
    double delta = 0.0;
    double depth = 0.0;
    DepthMethod method = DepthMethod::formula;
    int iterations = 0;
    double residual = 0.0;
    bool is_lambda_row = false;
    std::optional<GridFunction> minimizer;
};

struct DepthTable {
    double p = 0.0;
    double d = 0.0;  ///< depth at lambda = delta = 0
    double solver_tol = 1e-8;
    std::vector<DepthEntry> rows;

    std::optional<double> find_lambda(double lambda) const {
        for (const auto& r : rows)
            if (r.is_lambda_row && r.lambda == lambda) return r.depth;
        return std::nullopt;
    }
    std::optional<double> find_delta(double delta) const {
        for (const auto& r : rows)
            if (!r.is_lambda_row && r.delta == delta) return r.depth;
        return std::nullopt;
    }
};

/// Computes depths for every queried lambda and delta. A delta = 0 formula
/// row is always included; it defines the base depth d.
inline DepthTable compute_depth_table(const MeshPtr& mesh, double p,
                                      const std::vector<double>& lambdas,
                                      const std::vector<double>& deltas,
                                      const SolverOptions& opts = {}) {
    DepthTable table;
    table.p = p;
    table.solver_tol = opts.tol_stationarity;

    std::vector<double> all_deltas = deltas;
    if (std::find(all_deltas.begin(), all_deltas.end(), 0.0) == all_deltas.end())
        all_deltas.insert(all_deltas.begin(), 0.0);

    for (double delta : all_deltas) {
        Params pd{p, 0.0, delta};
        GroundState gs = ground_state(mesh, pd, opts);
        DepthEntry e;
        e.p = p;
        e.delta = delta;
        e.depth = depth_from_A(gs.A_min, pd);
        e.method = DepthMethod::formula;
        e.iterations = gs.iterations;
        e.residual = gs.residual;
        e.is_lambda_row = false;
        e.minimizer = gs.ustar;
        if (delta == 0.0) table.d = e.depth;
        table.rows.push_back(std::move(e));
    }
    for (double lambda : lambdas) {
        Params pl{p, lambda, 0.0};
        auto direct = detail::minimize_d_lambda(mesh, pl, opts);
        DepthEntry e;
        e.p = p;
        e.lambda = lambda;
        e.depth = direct.value;
        e.method = DepthMethod::direct;
        e.iterations = direct.iterations;
        e.residual = direct.residual;
        e.is_lambda_row = true;
        e.minimizer = nehari_scale(direct.minimizer, Params{p, 0.0, 0.0}).scaled;
        table.rows.push_back(std::move(e));
    }
    return table;
}

enum class Membership { Yes, No, Borderline };

inline const char* to_string(Membership s) {
    switch (s) {
        case Membership::Yes: return "yes";
        case Membership::No: return "no";
        default: return "borderline";
    }
}

struct WLambdaWitness {
    double lambda = 0.0;
    double depth = 0.0;      ///< d_lambda used for the comparison
    double E_lambda = 0.0;
    double I = 0.0;
    Membership state = Membership::No;
    std::string reason;
};

struct ZDeltaWitness {
    double delta = 0.0;
    double depth = 0.0;      ///< d_delta used for the comparison
    double J_delta = 0.0;
    double I_delta = 0.0;
    Membership state = Membership::No;
    std::string reason;
};

/// Memberships with the witnesses that justify each answer.
/// in_W_tilde / in_Z_tilde are unions over the queried parameter lists.
struct SetMembership {
    std::vector<WLambdaWitness> w_lambda;
    std::vector<ZDeltaWitness> z_delta;
    bool in_W_tilde = false;
    bool in_Z_tilde = false;
};

/// Classifies initial data against the invariant sets. The defining strict
/// inequalities are open, so memberships are asserted only when they hold by
/// a guard margin of max(1e-8, 10 x depth-solver tolerance); boundary-
/// ambiguous data come back Borderline instead of misclassified. The zero
/// datum belongs to every W_lambda and to no Z_delta.
inline SetMembership classify(const GridFunction& phi, const std::vector<double>& lambdas,
                              const std::vector<double>& deltas, const Params& params,
                              const DepthTable& table) {
    require_finite(phi, "classify");
    const double guard = std::max(1e-8, 10.0 * table.solver_tol);
    SetMembership out;

    const bool zero = is_zero(phi);
    double J = 0.0, M = 0.0, I = 0.0;
    double phi_min = 0.0;
    if (!zero) {
        FunctionalReport r = report(phi, params);
        J = r.J;
        M = r.M;
        I = r.I;
        phi_min = min_value(phi);
    }

    for (double lambda : lambdas) {
        auto depth = table.find_lambda(lambda);
        if (!depth)
            throw std::invalid_argument("classify: depths table does not cover lambda=" +
                                        std::to_string(lambda));
        WLambdaWitness w;
        w.lambda = lambda;
        w.depth = *depth;
        if (zero) {
            w.state = Membership::Yes;
            w.reason = "zero datum (member by definition)";
        } else {
            w.E_lambda = J + lambda * M;
            w.I = I;
            if (w.E_lambda <= *depth - guard && I >= guard) {
                w.state = Membership::Yes;
                w.reason = "E_lambda < d_lambda and I > 0 with guard margin";
            } else if (w.E_lambda >= *depth + guard || I <= -guard) {
                w.state = Membership::No;
                w.reason = (w.E_lambda >= *depth + guard) ? "E_lambda >= d_lambda" : "I <= 0";
            } else {
                w.state = Membership::Borderline;
                w.reason = "within guard band of the set boundary";
            }
        }
        if (w.state == Membership::Yes) out.in_W_tilde = true;
        out.w_lambda.push_back(std::move(w));
    }

    for (double delta : deltas) {
        auto depth = table.find_delta(delta);
        if (!depth)
            throw std::invalid_argument("classify: depths table does not cover delta=" +
                                        std::to_string(delta));
        ZDeltaWitness z;
        z.delta = delta;
        z.depth = *depth;
        if (zero) {
            z.state = Membership::No;
            z.reason = "zero datum is not admissible";
        } else if (phi_min < 0.0) {
            z.state = Membership::No;
            z.reason = "fails the nonnegative cone requirement";
        } else {
            z.J_delta = J + delta * M;
            z.I_delta = I + 2.0 * delta * M;
            if (z.J_delta <= *depth - guard && z.I_delta <= -guard) {
                z.state = Membership::Yes;
                z.reason = "J_delta < d_delta and I_delta < 0 with guard margin";
            } else if (z.J_delta >= *depth + guard || z.I_delta >= guard) {
                z.state = Membership::No;
                z.reason = (z.J_delta >= *depth + guard) ? "J_delta >= d_delta" : "I_delta >= 0";
            } else {
                z.state = Membership::Borderline;
                z.reason = "within guard band of the set boundary";
            }
        }
        if (z.state == Membership::Yes) out.in_Z_tilde = true;
        out.z_delta.push_back(std::move(z));
    }
    return out;
}

struct EpsilonBudget {
    double epsilon = 0.0;
    double d_delta_eps_lower_bound = 0.0;  ///< d_delta - epsilon/(p+1)
};

/// Admissible deficit budget for blow-up certification from data in Z_delta:
///   epsilon = 1/2 min(-I_delta(phi), d_delta - J_delta(phi)),
/// strictly inside the admissible range, together with the depth lower bound
/// on the deficit manifold {I_delta = -epsilon}.
inline EpsilonBudget epsilon_budget(const GridFunction& phi, const Params& params,
                                    double d_delta) {
    require_finite(phi, "epsilon_budget");
    if (is_zero(phi) || min_value(phi) < 0.0)
        throw std::invalid_argument("epsilon_budget: phi must be nonnegative and nonzero");
    DeltaFunctionals f = delta_functionals(phi, params);
    if (!(f.I_delta < 0.0) || !(f.J_delta < d_delta))
        throw std::invalid_argument("epsilon_budget: phi is not in Z_delta");
    const double eps = 0.5 * std::min(-f.I_delta, d_delta - f.J_delta);
    return EpsilonBudget{eps, d_delta - eps / (params.p + 1.0)};
}

}  // namespace pwlab
