#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwlab/mesh.hpp"

namespace pwlab {

/// Applies the shifted operator alpha*I - beta*Lap_h to nodal values.
inline GridFunction apply_shifted_operator(const Mesh& m, const GridFunction& u, double alpha,
                                           double beta) {
    GridFunction lap = apply_laplacian(m, u);
    std::vector<double> out(u.size());
    const auto& uv = u.values();
    const auto& lv = lap.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * uv[i] - beta * lv[i];
    return GridFunction(u.mesh_ptr(), std::move(out));
}

namespace detail {

/// Tridiagonal solve for (alpha*I - beta*Lap_h)x = b on a 1D mesh.
/// The system is SPD for alpha > 0, beta >= 0 (and for alpha = 0, beta > 0).
inline std::vector<double> tridiagonal_solve(const Mesh& m, const std::vector<double>& b,
                                             double alpha, double beta) {
    const int n = m.n_interior(0);
    const double h2 = m.spacing(0) * m.spacing(0);
    const double diag = alpha + 2.0 * beta / h2;
    const double off = -beta / h2;

    std::vector<double> c(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
    double denom = diag;
    c[0] = off / denom;
    d[0] = b[0] / denom;
    for (int i = 1; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        denom = diag - off * c[k - 1];
        c[k] = off / denom;
        d[k] = (b[k] - off * d[k - 1]) / denom;
    }
    std::vector<double> x(static_cast<std::size_t>(n));
    x[static_cast<std::size_t>(n - 1)] = d[static_cast<std::size_t>(n - 1)];
    for (int i = n - 2; i >= 0; --i) {
        const std::size_t k = static_cast<std::size_t>(i);
        x[k] = d[k] - c[k] * x[k + 1];
    }
    return x;
}

}  // namespace detail

/// Solves (alpha*I - beta*Lap_h) x = rhs with homogeneous Dirichlet boundary.
/// 1D meshes use direct tridiagonal elimination; 2D meshes use conjugate
/// gradients to relative residual <= rel_tol. Both paths are deterministic.
inline GridFunction solve_shifted_poisson(const Mesh& m, const GridFunction& rhs, double alpha,
                                          double beta, double rel_tol = 1e-12,
                                          const GridFunction* initial_guess = nullptr) {
    require_same_mesh(m, rhs, "solve_shifted_poisson");
    if (!(alpha > 0.0 || beta > 0.0))
        throw std::invalid_argument("solve_shifted_poisson: operator is not positive definite");

    if (m.dim() == 1)
        return GridFunction(rhs.mesh_ptr(), detail::tridiagonal_solve(m, rhs.values(), alpha, beta));

    const std::size_t n = rhs.size();
    std::vector<double> x = initial_guess ? initial_guess->values() : std::vector<double>(n, 0.0);
    GridFunction xg(rhs.mesh_ptr(), std::move(x));

    auto apply = [&](const GridFunction& v) { return apply_shifted_operator(m, v, alpha, beta); };

    const double b_norm = l2_norm(rhs);
    if (b_norm == 0.0) return GridFunction::zero(rhs.mesh_ptr());

    GridFunction r = axpy(-1.0, apply(xg), rhs);
    GridFunction p = r;
    double rho = inner_l2(r, r);
    const double stop = rel_tol * b_norm;
    const int max_iters = 20 * static_cast<int>(n) + 200;
    for (int iter = 0; iter < max_iters; ++iter) {
        if (std::sqrt(rho) <= stop) return xg;
        GridFunction ap = apply(p);
        const double denom = inner_l2(p, ap);
        if (!(denom > 0.0))
            throw std::runtime_error("solve_shifted_poisson: CG breakdown on SPD system");
        const double gamma = rho / denom;
        xg = axpy(gamma, p, xg);
        r = axpy(-gamma, ap, r);
        const double rho_new = inner_l2(r, r);
        p = axpy(rho_new / rho, p, r);
        rho = rho_new;
    }
    if (std::sqrt(rho) <= stop) return xg;
    throw std::runtime_error("solve_shifted_poisson: CG did not converge to relative residual " +
                             std::to_string(rel_tol));
}

struct DirichletMode {
    double lambda1 = 0.0;   ///< smallest discrete Dirichlet eigenvalue of -Lap_h
    GridFunction eigfn;     ///< nonnegative eigenvector, sup-normalized to 1
};

/// First discrete Dirichlet eigenpair of -Lap_h via inverse power iteration.
/// Deterministic all-ones start; the Rayleigh quotient is converged to
/// relative increments below rel_tol.
inline DirichletMode first_dirichlet_mode(const MeshPtr& mesh, double rel_tol = 1e-13,
                                          int max_iters = 500) {
    const Mesh& m = *mesh;
    GridFunction u(mesh, std::vector<double>(m.node_count(), 1.0));
    double lambda_prev = 0.0;
    double lambda = 0.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        GridFunction w = solve_shifted_poisson(m, u, 0.0, 1.0, 1e-13, &u);
        const double nrm = l2_norm(w);
        if (!(nrm > 0.0)) throw std::runtime_error("first_dirichlet_mode: iteration collapsed");
        u = scale(1.0 / nrm, w);
        lambda = grad_norm_sq(m, u) / inner_l2(u, u);
        if (iter > 2 && std::abs(lambda - lambda_prev) <= rel_tol * lambda) break;
        lambda_prev = lambda;
    }
    // Inverse iteration from a positive start stays positive; normalize the
    // sign just in case and rescale so the sup-norm is exactly 1.
    double smax = 0.0;
    for (double x : u.values()) smax = std::max(smax, std::abs(x));
    double sign = 1.0;
    for (double x : u.values())
        if (std::abs(x) == smax && x < 0.0) sign = -1.0;
    GridFunction phi1 = scale(sign / smax, u);
    return DirichletMode{lambda, std::move(phi1)};
}

}  // namespace pwlab
