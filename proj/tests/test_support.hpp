#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "pwlab/mesh.hpp"

namespace pwlab::testing {

inline constexpr double kPi = 3.14159265358979323846;

/// Random smooth field: a few low Fourier modes with coefficients in [-1, 1].
/// Smoothness keeps discrete functionals close to their continuum values.
inline GridFunction random_smooth_field(const MeshPtr& mesh, std::mt19937_64& rng, int modes = 5) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    const Mesh& m = *mesh;
    std::vector<double> c0(static_cast<std::size_t>(modes)), c1;
    for (auto& c : c0) c = coef(rng);
    if (m.dim() == 2) {
        c1.resize(static_cast<std::size_t>(modes));
        for (auto& c : c1) c = coef(rng);
    }
    const double L0 = m.extent(0).b - m.extent(0).a;
    if (m.dim() == 1) {
        return GridFunction::sample(mesh, [&](double x) {
            double s = 0.0;
            for (int k = 0; k < modes; ++k)
                s += c0[static_cast<std::size_t>(k)] *
                     std::sin((k + 1) * kPi * (x - m.extent(0).a) / L0);
            return s;
        });
    }
    const double L1 = m.extent(1).b - m.extent(1).a;
    return GridFunction::sample(mesh, [&](double x, double y) {
        double s = 0.0;
        for (int k = 0; k < modes; ++k)
            s += c0[static_cast<std::size_t>(k)] *
                 std::sin((k + 1) * kPi * (x - m.extent(0).a) / L0) *
                 (c1[static_cast<std::size_t>(k)] *
                  std::sin((k + 1) * kPi * (y - m.extent(1).a) / L1));
        return s;
    });
}

/// Random nodal noise, no smoothness: exercises pure algebraic identities.
inline GridFunction random_nodal_field(const MeshPtr& mesh, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> val(-2.0, 2.0);
    std::vector<double> v(mesh->node_count());
    for (auto& x : v) x = val(rng);
    return GridFunction(mesh, std::move(v));
}

inline GridFunction nonnegative_field(const GridFunction& u) { return abs_values(u); }

}  // namespace pwlab::testing
