#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace pwlab {

/// Closed interval [a, b] on one axis.
struct Interval {
    double a = 0.0;
    double b = 0.0;
};

/// Uniform Cartesian grid over an interval (1D) or axis-aligned rectangle (2D)
/// with homogeneous Dirichlet boundary. Only interior nodes are represented;
/// the boundary value is identically zero by construction.
///
/// Node ordering is lexicographic by axis index, axis 0 major: in 2D the
/// linear index of interior node (i0, i1) is i0 * n1 + i1. The ordering is
/// fixed so snapshots are reproducible byte-for-byte.
class Mesh {
public:
    Mesh(int dim, std::vector<Interval> extents, std::vector<int> n_interior)
        : dim_(dim), extents_(std::move(extents)), n_(std::move(n_interior)) {
        if (dim_ != 1 && dim_ != 2)
            throw std::invalid_argument("Mesh: dim must be 1 or 2, got " + std::to_string(dim_));
        if (static_cast<int>(extents_.size()) != dim_ || static_cast<int>(n_.size()) != dim_)
            throw std::invalid_argument("Mesh: extents/n_interior size must match dim");
        quad_weight_ = 1.0;
        node_count_ = 1;
        for (int ax = 0; ax < dim_; ++ax) {
            const auto [a, b] = extents_[ax];
            if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
                throw std::invalid_argument("Mesh: degenerate interval on axis " + std::to_string(ax));
            if (n_[ax] < 3)
                throw std::invalid_argument("Mesh: need at least 3 interior nodes per axis, got " +
                                            std::to_string(n_[ax]));
            h_[ax] = (b - a) / static_cast<double>(n_[ax] + 1);
            quad_weight_ *= h_[ax];
            node_count_ *= static_cast<std::size_t>(n_[ax]);
        }
    }

    int dim() const { return dim_; }
    Interval extent(int axis) const { return extents_.at(static_cast<std::size_t>(axis)); }
    int n_interior(int axis) const { return n_.at(static_cast<std::size_t>(axis)); }
    double spacing(int axis) const { return h_.at(static_cast<std::size_t>(axis)); }

    /// Cell measure of the rectangle quadrature rule, prod_i h_i.
    double quad_weight() const { return quad_weight_; }
    std::size_t node_count() const { return node_count_; }

    double domain_measure() const {
        double m = 1.0;
        for (int ax = 0; ax < dim_; ++ax) m *= extents_[static_cast<std::size_t>(ax)].b -
                                               extents_[static_cast<std::size_t>(ax)].a;
        return m;
    }

    /// Coordinate of interior node i (0-based) along `axis`.
    double coord(int axis, int i) const {
        return extents_[static_cast<std::size_t>(axis)].a +
               (static_cast<double>(i) + 1.0) * h_[static_cast<std::size_t>(axis)];
    }

    friend bool operator==(const Mesh& lhs, const Mesh& rhs) {
        if (lhs.dim_ != rhs.dim_) return false;
        for (int ax = 0; ax < lhs.dim_; ++ax) {
            const auto s = static_cast<std::size_t>(ax);
            if (lhs.extents_[s].a != rhs.extents_[s].a || lhs.extents_[s].b != rhs.extents_[s].b ||
                lhs.n_[s] != rhs.n_[s])
                return false;
        }
        return true;
    }
    friend bool operator!=(const Mesh& lhs, const Mesh& rhs) { return !(lhs == rhs); }

private:
    int dim_;
    std::vector<Interval> extents_;
    std::vector<int> n_;
    std::array<double, 2> h_{0.0, 0.0};
    double quad_weight_ = 0.0;
    std::size_t node_count_ = 0;
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// Builds a mesh; rejects dim outside {1,2}, degenerate intervals and
/// interior counts below 3.
inline MeshPtr build_mesh(int dim, const std::vector<Interval>& extents,
                          const std::vector<int>& n_interior) {
    return std::make_shared<Mesh>(dim, extents, n_interior);
}

inline MeshPtr build_interval_mesh(double a, double b, int n_interior) {
    return build_mesh(1, {{a, b}}, {n_interior});
}

inline MeshPtr build_rectangle_mesh(double ax, double bx, double ay, double by, int nx, int ny) {
    return build_mesh(2, {{ax, bx}, {ay, by}}, {nx, ny});
}

/// Interior nodal values of a function vanishing on the boundary.
/// Immutable by convention: operations return new GridFunctions.
class GridFunction {
public:
    GridFunction(MeshPtr mesh, std::vector<double> values)
        : mesh_(std::move(mesh)), values_(std::move(values)) {
        if (!mesh_) throw std::invalid_argument("GridFunction: null mesh");
        if (values_.size() != mesh_->node_count())
            throw std::invalid_argument("GridFunction: value count does not match mesh");
    }

    static GridFunction zero(MeshPtr mesh) {
        std::vector<double> v(mesh->node_count(), 0.0);
        return GridFunction(std::move(mesh), std::move(v));
    }

    /// Builds from a callable of the node coordinates: f(x) in 1D, f(x,y) in 2D.
    template <class F>
    static GridFunction sample(MeshPtr mesh, F&& f) {
        std::vector<double> v(mesh->node_count());
        if constexpr (std::is_invocable_r_v<double, F, double>) {
            if (mesh->dim() != 1)
                throw std::invalid_argument("GridFunction::sample: 1D callable on a 2D mesh");
            for (int i = 0; i < mesh->n_interior(0); ++i)
                v[static_cast<std::size_t>(i)] = f(mesh->coord(0, i));
        } else {
            if (mesh->dim() != 2)
                throw std::invalid_argument("GridFunction::sample: 2D callable on a 1D mesh");
            const int n1 = mesh->n_interior(1);
            for (int i0 = 0; i0 < mesh->n_interior(0); ++i0)
                for (int i1 = 0; i1 < n1; ++i1)
                    v[static_cast<std::size_t>(i0 * n1 + i1)] =
                        f(mesh->coord(0, i0), mesh->coord(1, i1));
        }
        return GridFunction(std::move(mesh), std::move(v));
    }

    const MeshPtr& mesh_ptr() const { return mesh_; }
    const Mesh& mesh() const { return *mesh_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& mutable_values() { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    bool lives_on(const Mesh& m) const { return mesh_.get() == &m || *mesh_ == m; }

private:
    MeshPtr mesh_;
    std::vector<double> values_;
};

inline bool same_mesh(const GridFunction& u, const GridFunction& v) {
    return u.mesh_ptr() == v.mesh_ptr() || u.mesh() == v.mesh();
}

inline void require_same_mesh(const Mesh& m, const GridFunction& u, const char* op) {
    if (!u.lives_on(m)) throw std::invalid_argument(std::string(op) + ": grid function is on a different mesh");
}

inline void require_same_mesh(const GridFunction& u, const GridFunction& v, const char* op) {
    if (!same_mesh(u, v)) throw std::invalid_argument(std::string(op) + ": operands live on different meshes");
}

inline bool all_finite(const GridFunction& u) {
    for (double x : u.values())
        if (!std::isfinite(x)) return false;
    return true;
}

inline void require_finite(const GridFunction& u, const char* op) {
    if (!all_finite(u)) throw std::invalid_argument(std::string(op) + ": grid function has NaN/Inf values");
}

inline double sup_norm(const GridFunction& u) {
    double s = 0.0;
    for (double x : u.values()) s = std::max(s, std::abs(x));
    return s;
}

inline double min_value(const GridFunction& u) {
    double m = std::numeric_limits<double>::infinity();
    for (double x : u.values()) m = std::min(m, x);
    return m;
}

inline bool is_zero(const GridFunction& u) { return sup_norm(u) == 0.0; }

/// Second-order central-difference Laplacian with zero Dirichlet ghost values.
inline GridFunction apply_laplacian(const Mesh& m, const GridFunction& u) {
    require_same_mesh(m, u, "apply_laplacian");
    const auto& v = u.values();
    std::vector<double> out(v.size());
    if (m.dim() == 1) {
        const int n = m.n_interior(0);
        const double ih2 = 1.0 / (m.spacing(0) * m.spacing(0));
        for (int i = 0; i < n; ++i) {
            const double left = (i > 0) ? v[static_cast<std::size_t>(i - 1)] : 0.0;
            const double right = (i + 1 < n) ? v[static_cast<std::size_t>(i + 1)] : 0.0;
            out[static_cast<std::size_t>(i)] = (left - 2.0 * v[static_cast<std::size_t>(i)] + right) * ih2;
        }
    } else {
        const int n0 = m.n_interior(0), n1 = m.n_interior(1);
        const double ih0 = 1.0 / (m.spacing(0) * m.spacing(0));
        const double ih1 = 1.0 / (m.spacing(1) * m.spacing(1));
        for (int i0 = 0; i0 < n0; ++i0) {
            for (int i1 = 0; i1 < n1; ++i1) {
                const std::size_t k = static_cast<std::size_t>(i0 * n1 + i1);
                const double c = v[k];
                const double xm = (i0 > 0) ? v[k - static_cast<std::size_t>(n1)] : 0.0;
                const double xp = (i0 + 1 < n0) ? v[k + static_cast<std::size_t>(n1)] : 0.0;
                const double ym = (i1 > 0) ? v[k - 1] : 0.0;
                const double yp = (i1 + 1 < n1) ? v[k + 1] : 0.0;
                out[k] = (xm - 2.0 * c + xp) * ih0 + (ym - 2.0 * c + yp) * ih1;
            }
        }
    }
    return GridFunction(u.mesh_ptr(), std::move(out));
}

/// Rectangle-rule inner product over interior nodes.
inline double inner_l2(const Mesh& m, const GridFunction& u, const GridFunction& v) {
    require_same_mesh(m, u, "inner_l2");
    require_same_mesh(u, v, "inner_l2");
    double s = 0.0;
    const auto& a = u.values();
    const auto& b = v.values();
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return m.quad_weight() * s;
}

inline double inner_l2(const GridFunction& u, const GridFunction& v) {
    return inner_l2(u.mesh(), u, v);
}

inline double l2_norm(const GridFunction& u) { return std::sqrt(inner_l2(u.mesh(), u, u)); }

/// Rectangle-rule integral of |u|^q; q >= 1 required.
inline double integrate_power(const Mesh& m, const GridFunction& u, double q) {
    require_same_mesh(m, u, "integrate_power");
    if (!(q >= 1.0)) throw std::invalid_argument("integrate_power: exponent q must be >= 1");
    double s = 0.0;
    if (q == 2.0) {
        for (double x : u.values()) s += x * x;
    } else {
        for (double x : u.values()) s += std::pow(std::abs(x), q);
    }
    return m.quad_weight() * s;
}

inline double integrate_power(const GridFunction& u, double q) {
    return integrate_power(u.mesh(), u, q);
}

/// Discrete Dirichlet form: sum of squared forward differences (including the
/// one-sided differences against the zero boundary) times the cell measure.
/// Equals inner_l2(u, -apply_laplacian(u)) up to round-off.
inline double grad_norm_sq(const Mesh& m, const GridFunction& u) {
    require_same_mesh(m, u, "grad_norm_sq");
    const auto& v = u.values();
    double total = 0.0;
    if (m.dim() == 1) {
        const int n = m.n_interior(0);
        const double h = m.spacing(0);
        double s = 0.0;
        double prev = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = v[static_cast<std::size_t>(i)] - prev;
            s += d * d;
            prev = v[static_cast<std::size_t>(i)];
        }
        s += prev * prev;  // difference against the right boundary
        total = s / (h * h) * m.quad_weight();
    } else {
        const int n0 = m.n_interior(0), n1 = m.n_interior(1);
        const double h0 = m.spacing(0), h1 = m.spacing(1);
        double s0 = 0.0, s1 = 0.0;
        for (int i1 = 0; i1 < n1; ++i1) {
            double prev = 0.0;
            for (int i0 = 0; i0 < n0; ++i0) {
                const double cur = v[static_cast<std::size_t>(i0 * n1 + i1)];
                const double d = cur - prev;
                s0 += d * d;
                prev = cur;
            }
            s0 += prev * prev;
        }
        for (int i0 = 0; i0 < n0; ++i0) {
            double prev = 0.0;
            for (int i1 = 0; i1 < n1; ++i1) {
                const double cur = v[static_cast<std::size_t>(i0 * n1 + i1)];
                const double d = cur - prev;
                s1 += d * d;
                prev = cur;
            }
            s1 += prev * prev;
        }
        total = (s0 / (h0 * h0) + s1 / (h1 * h1)) * m.quad_weight();
    }
    return total;
}

inline double grad_norm_sq(const GridFunction& u) { return grad_norm_sq(u.mesh(), u); }

// Elementwise helpers; all return functions on the same mesh.

inline GridFunction axpy(double alpha, const GridFunction& x, const GridFunction& y) {
    require_same_mesh(x, y, "axpy");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * x[i] + y[i];
    return GridFunction(x.mesh_ptr(), std::move(out));
}

inline GridFunction scale(double alpha, const GridFunction& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * x[i];
    return GridFunction(x.mesh_ptr(), std::move(out));
}

inline GridFunction abs_values(const GridFunction& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(x[i]);
    return GridFunction(x.mesh_ptr(), std::move(out));
}

}  // namespace pwlab
