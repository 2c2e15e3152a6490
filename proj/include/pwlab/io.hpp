#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwlab/comparison.hpp"
#include "pwlab/flow.hpp"
#include "pwlab/functionals.hpp"
#include "pwlab/mesh.hpp"
#include "pwlab/nehari.hpp"

namespace pwlab {

/// 17 significant digits: lossless for doubles, so file round-trips are exact.
inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
}

namespace detail {

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double(const std::string& tok, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
        if (pos != tok.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(context + ": cannot parse number '" + tok + "'");
    }
}

}  // namespace detail

/// Snapshot format: one row per node in lexicographic order, per-axis
/// coordinates then the value, with a header row naming the columns.
inline void save_grid_function(const std::filesystem::path& path, const GridFunction& u) {
    const Mesh& m = u.mesh();
    std::ostringstream out;
    out << (m.dim() == 1 ? "x,value\n" : "x,y,value\n");
    if (m.dim() == 1) {
        for (int i = 0; i < m.n_interior(0); ++i)
            out << format_g17(m.coord(0, i)) << ',' << format_g17(u[static_cast<std::size_t>(i)])
                << '\n';
    } else {
        const int n1 = m.n_interior(1);
        for (int i0 = 0; i0 < m.n_interior(0); ++i0)
            for (int i1 = 0; i1 < n1; ++i1)
                out << format_g17(m.coord(0, i0)) << ',' << format_g17(m.coord(1, i1)) << ','
                    << format_g17(u[static_cast<std::size_t>(i0 * n1 + i1)]) << '\n';
    }
    detail::atomic_write(path, out.str());
}

/// Loads a snapshot onto the given mesh; node count and coordinates must
/// match the mesh (coordinates to within 1e-12 relative).
inline GridFunction load_grid_function(const std::filesystem::path& path, const MeshPtr& mesh) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const Mesh& m = *mesh;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");

    std::vector<double> values;
    values.reserve(m.node_count());
    std::size_t row = 0;
    const int ncols = m.dim() + 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (static_cast<int>(fields.size()) != ncols)
            throw std::runtime_error(path.string() + ": expected " + std::to_string(ncols) +
                                     " columns");
        if (row >= m.node_count()) throw std::runtime_error(path.string() + ": too many rows");
        // Validate coordinates against the mesh ordering.
        const int n1 = (m.dim() == 2) ? m.n_interior(1) : 1;
        const int i0 = (m.dim() == 2) ? static_cast<int>(row) / n1 : static_cast<int>(row);
        const int i1 = (m.dim() == 2) ? static_cast<int>(row) % n1 : 0;
        for (int ax = 0; ax < m.dim(); ++ax) {
            const double want = m.coord(ax, ax == 0 ? i0 : i1);
            const double got = detail::parse_double(fields[static_cast<std::size_t>(ax)],
                                                    path.string());
            if (std::abs(got - want) > 1e-12 * std::max(1.0, std::abs(want)))
                throw std::runtime_error(path.string() + ": node coordinates do not match mesh");
        }
        values.push_back(
            detail::parse_double(fields[static_cast<std::size_t>(m.dim())], path.string()));
        ++row;
    }
    if (row != m.node_count())
        throw std::runtime_error(path.string() + ": expected " + std::to_string(m.node_count()) +
                                 " rows, got " + std::to_string(row));
    return GridFunction(mesh, std::move(values));
}

inline const char* functional_report_header() {
    return "J,M,I,E_lambda,J_delta,I_delta,sup_norm,h1_seminorm_sq,lp1_norm_pow";
}

inline std::string functional_report_row(const FunctionalReport& r) {
    std::ostringstream out;
    out << format_g17(r.J) << ',' << format_g17(r.M) << ',' << format_g17(r.I) << ','
        << format_g17(r.E_lambda) << ',' << format_g17(r.J_delta) << ',' << format_g17(r.I_delta)
        << ',' << format_g17(r.sup_norm) << ',' << format_g17(r.h1_seminorm_sq) << ','
        << format_g17(r.lp1_norm_pow);
    return out.str();
}

inline void save_functional_report(const std::filesystem::path& path, const FunctionalReport& r) {
    detail::atomic_write(path,
                         std::string(functional_report_header()) + "\n" + functional_report_row(r) +
                             "\n");
}

/// Trajectory CSV: t,J,M,I,E_lambda,I_delta,sup_norm,h1_seminorm_sq,ut_norm_sq,dt.
inline void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    std::ostringstream out;
    out << "t,J,M,I,E_lambda,I_delta,sup_norm,h1_seminorm_sq,ut_norm_sq,dt\n";
    for (std::size_t n = 0; n < traj.size(); ++n) {
        const auto& r = traj.reports[n];
        out << format_g17(traj.times[n]) << ',' << format_g17(r.J) << ',' << format_g17(r.M) << ','
            << format_g17(r.I) << ',' << format_g17(r.E_lambda) << ',' << format_g17(r.I_delta)
            << ',' << format_g17(r.sup_norm) << ',' << format_g17(r.h1_seminorm_sq) << ','
            << format_g17(traj.ut_norm_sq[n]) << ',' << format_g17(traj.dts[n]) << '\n';
    }
    detail::atomic_write(path, out.str());
}

/// Recorded trajectory columns as read back from CSV (no grid states).
struct TrajectoryRecord {
    std::vector<double> t, J, M, I, E_lambda, I_delta, sup_norm, h1_seminorm_sq, ut_norm_sq, dt;
    std::size_t size() const { return t.size(); }
};

inline TrajectoryRecord load_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
    if (detail::split_csv_line(line).size() != 10)
        throw std::runtime_error(path.string() + ": not a trajectory file (expected 10 columns)");
    TrajectoryRecord rec;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 10)
            throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
        const std::string& ctx = path.string();
        rec.t.push_back(detail::parse_double(f[0], ctx));
        rec.J.push_back(detail::parse_double(f[1], ctx));
        rec.M.push_back(detail::parse_double(f[2], ctx));
        rec.I.push_back(detail::parse_double(f[3], ctx));
        rec.E_lambda.push_back(detail::parse_double(f[4], ctx));
        rec.I_delta.push_back(detail::parse_double(f[5], ctx));
        rec.sup_norm.push_back(detail::parse_double(f[6], ctx));
        rec.h1_seminorm_sq.push_back(detail::parse_double(f[7], ctx));
        rec.ut_norm_sq.push_back(detail::parse_double(f[8], ctx));
        rec.dt.push_back(detail::parse_double(f[9], ctx));
    }
    return rec;
}

/// Depth table CSV: p,lambda,delta,depth,method,iterations,residual.
inline void save_depth_table(const std::filesystem::path& path, const DepthTable& table) {
    std::ostringstream out;
    out << "p,lambda,delta,depth,method,iterations,residual\n";
    for (const auto& r : table.rows)
        out << format_g17(r.p) << ',' << format_g17(r.lambda) << ',' << format_g17(r.delta) << ','
            << format_g17(r.depth) << ',' << to_string(r.method) << ','
            << std::to_string(r.iterations) << ',' << format_g17(r.residual) << '\n';
    detail::atomic_write(path, out.str());
}

/// Comparison CSV: t,min_gap,neg_part_mass,u_sup,v_sup.
inline void save_comparison(const std::filesystem::path& path, const ComparisonReport& rep) {
    std::ostringstream out;
    out << "t,min_gap,neg_part_mass,u_sup,v_sup\n";
    for (std::size_t n = 0; n < rep.times.size(); ++n)
        out << format_g17(rep.times[n]) << ',' << format_g17(rep.min_gap[n]) << ','
            << format_g17(rep.neg_part_mass[n]) << ',' << format_g17(rep.u_sup[n]) << ','
            << format_g17(rep.v_sup[n]) << '\n';
    detail::atomic_write(path, out.str());
}

/// One-line outcome summary: kind, terminal time, thresholds used.
inline std::string outcome_summary_line(const FlowOutcome& o, const FlowConfig& cfg) {
    std::ostringstream out;
    out << to_string(o.kind) << ',';
    if (o.kind == OutcomeKind::BlowUp)
        out << format_g17(o.t_estimate);
    else if (o.kind == OutcomeKind::GlobalDecay)
        out << format_g17(o.t_reached);
    else
        out << o.reason;
    out << ",blowup_sup_threshold=" << format_g17(cfg.blowup_sup_threshold)
        << ",decay_h1_threshold=" << format_g17(cfg.decay_h1_threshold);
    return out.str();
}

}  // namespace pwlab
