#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "pwlab/mesh.hpp"

namespace pwlab {

/// Exponent and penalty parameters shared by the scalar functionals.
/// p > 1 always; lambda and delta are nonnegative. In one and two dimensions
/// every finite p is subcritical, so no Sobolev cap applies; a cap
/// p <= (n+2)/(n-2) would be required if a 3D build were ever made.
struct Params {
    double p = 3.0;
    double lambda = 0.0;
    double delta = 0.0;

    void validate() const {
        if (!(p > 1.0)) throw std::invalid_argument("Params: p must be > 1");
        if (!(lambda >= 0.0)) throw std::invalid_argument("Params: lambda must be >= 0");
        if (!(delta >= 0.0)) throw std::invalid_argument("Params: delta must be >= 0");
    }
};

/// Every scalar functional of one grid function at fixed (p, lambda, delta).
/// Cross-identities that hold by construction:
///   E_lambda = J + lambda * M          (exact arithmetic identity)
///   I_delta  = 2 J_delta - (1 - 2/(p+1)) * lp1_norm_pow   (to round-off)
struct FunctionalReport {
    double J = 0.0;               ///< energy: 1/2 |grad u|^2 - 1/(p+1) int |u|^{p+1}
    double M = 0.0;               ///< half squared L2 mass
    double I = 0.0;               ///< Nehari value: |grad u|^2 - int |u|^{p+1}
    double E_lambda = 0.0;        ///< J + lambda M
    double J_delta = 0.0;         ///< J + delta M
    double I_delta = 0.0;         ///< I + 2 delta M
    double sup_norm = 0.0;        ///< max_i |u_i|
    double h1_seminorm_sq = 0.0;  ///< int |grad u|^2 (discrete Dirichlet form)
    double lp1_norm_pow = 0.0;    ///< int |u|^{p+1}
};

/// J(u) = 1/2 int |grad u|^2 - 1/(p+1) int |u|^{p+1}.
/// The |u| power keeps J even and consistent with the Nehari value for
/// sign-changing data; for nonnegative data it coincides with u^{p+1}.
inline double energy_J(const GridFunction& u, const Params& params) {
    require_finite(u, "energy_J");
    return 0.5 * grad_norm_sq(u) - integrate_power(u, params.p + 1.0) / (params.p + 1.0);
}

/// M(u) = 1/2 int u^2.
inline double mass_M(const GridFunction& u) {
    require_finite(u, "mass_M");
    return 0.5 * inner_l2(u, u);
}

/// I(u) = int |grad u|^2 - int |u|^{p+1}.
inline double nehari_I(const GridFunction& u, const Params& params) {
    require_finite(u, "nehari_I");
    return grad_norm_sq(u) - integrate_power(u, params.p + 1.0);
}

/// E_lambda(u) = J(u) + lambda M(u).
inline double energy_E_lambda(const GridFunction& u, const Params& params) {
    return energy_J(u, params) + params.lambda * mass_M(u);
}

struct DeltaFunctionals {
    double J_delta = 0.0;
    double I_delta = 0.0;
};

/// J_delta = J + delta M and I_delta = I + 2 delta M.
inline DeltaFunctionals delta_functionals(const GridFunction& u, const Params& params) {
    require_finite(u, "delta_functionals");
    const double G = grad_norm_sq(u);
    const double P = integrate_power(u, params.p + 1.0);
    const double m2 = inner_l2(u, u);
    return DeltaFunctionals{0.5 * G - P / (params.p + 1.0) + 0.5 * params.delta * m2,
                            G - P + params.delta * m2};
}

/// Scale-free Sobolev-type quotient
///   (|grad u|_2^2 + delta |u|_2^2) / |u|_{p+1}^2.
/// Rejects u = 0 (excluded from the infimum).
inline double quotient_A(const GridFunction& u, const Params& params) {
    require_finite(u, "quotient_A");
    if (is_zero(u)) throw std::invalid_argument("quotient_A: u must be nonzero");
    const double num = grad_norm_sq(u) + params.delta * inner_l2(u, u);
    const double P = integrate_power(u, params.p + 1.0);
    return num / std::pow(P, 2.0 / (params.p + 1.0));
}

/// All functionals of u in one pass over the primitive sums.
inline FunctionalReport report(const GridFunction& u, const Params& params) {
    require_finite(u, "report");
    params.validate();
    FunctionalReport r;
    r.h1_seminorm_sq = grad_norm_sq(u);
    r.lp1_norm_pow = integrate_power(u, params.p + 1.0);
    r.M = 0.5 * inner_l2(u, u);
    r.sup_norm = sup_norm(u);
    r.J = 0.5 * r.h1_seminorm_sq - r.lp1_norm_pow / (params.p + 1.0);
    r.I = r.h1_seminorm_sq - r.lp1_norm_pow;
    r.E_lambda = r.J + params.lambda * r.M;
    r.J_delta = r.J + params.delta * r.M;
    r.I_delta = r.I + 2.0 * params.delta * r.M;
    return r;
}

}  // namespace pwlab
