#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pwlab/comparison.hpp"
#include "pwlab/flow.hpp"
#include "pwlab/io.hpp"
#include "pwlab/nehari.hpp"
#include "pwlab/solve.hpp"

namespace pwlab {

enum class Task { Depths, Classify, Evolve, Compare, Verify };

enum class DataFamily { EigenfunctionMultiple, GaussianBump, FromFile };

/// One batch experiment: mesh, parameters, initial-data family and the
/// tasks to execute. Parsed from a line-oriented "key = value" document.
struct Scenario {
    std::string name;
    int dim = 1;
    std::vector<Interval> extents;
    std::vector<int> n_interior;
    double p = 3.0;
    std::vector<double> lambdas{0.0};
    std::vector<double> deltas{0.0};
    DataFamily family = DataFamily::EigenfunctionMultiple;
    std::vector<double> amplitudes{1.0};
    std::vector<double> center;  // defaults to the domain midpoint
    double width = 0.0;          // defaults to 10% of the shortest side
    std::string file;            // from_file source
    std::set<Task> tasks;
    FlowConfig flow;             // params filled in per run
    unsigned long long seed = 0;
};

namespace detail {

inline double parse_number(const std::string& raw, const std::string& key) {
    std::string tok;
    for (char c : raw)
        if (!std::isspace(static_cast<unsigned char>(c))) tok += c;
    if (tok == "pi") return M_PI;
    if (tok == "-pi") return -M_PI;
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("scenario: key '" + key + "': cannot parse number '" + raw +
                                    "'");
    }
}

inline std::vector<double> parse_number_list(const std::string& raw, const std::string& key) {
    std::vector<double> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(parse_number(cur, key));
            cur.clear();
        }
    };
    for (char c : raw) {
        if (c == ',')
            flush();
        else
            cur += c;
    }
    flush();
    if (out.empty()) throw std::invalid_argument("scenario: key '" + key + "' has an empty list");
    return out;
}

inline bool parse_bool(const std::string& raw, const std::string& key) {
    std::string tok;
    for (char c : raw)
        if (!std::isspace(static_cast<unsigned char>(c))) tok += static_cast<char>(std::tolower(c));
    if (tok == "true" || tok == "1") return true;
    if (tok == "false" || tok == "0") return false;
    throw std::invalid_argument("scenario: key '" + key + "': expected true/false, got '" + raw +
                                "'");
}

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline bool filesystem_safe(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    return true;
}

}  // namespace detail

/// Parses a scenario document. The format is strict: unknown keys are
/// errors (no silent defaults for misspellings), values are numbers,
/// comma-separated lists, or named tokens; '#' starts a comment.
inline Scenario parse_scenario(const std::string& text) {
    Scenario s;
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("scenario line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("scenario line " + std::to_string(lineno) +
                                        ": empty key or value");
        if (kv.count(key))
            throw std::invalid_argument("scenario: duplicate key '" + key + "'");
        kv[key] = value;
    }

    static const std::set<std::string> known = {
        "name",   "dim",        "extents", "n_interior", "p",
        "lambda", "delta",      "family",  "amplitude",  "center",
        "width",  "file",       "tasks",   "dt_init",    "dt_min",
        "t_max",  "blowup_sup_threshold",  "decay_h1_threshold",
        "snapshot_stride",      "safety",  "step_tol",   "adaptive",
        "seed"};
    for (const auto& [key, value] : kv)
        if (!known.count(key)) throw std::invalid_argument("scenario: unknown key '" + key + "'");

    auto require = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw std::invalid_argument("scenario: missing required key '" + std::string(key) +
                                        "'");
        return it->second;
    };

    s.name = require("name");
    if (!detail::filesystem_safe(s.name))
        throw std::invalid_argument("scenario: name must be nonempty and filesystem-safe "
                                    "(alphanumeric, '_', '-')");

    s.dim = static_cast<int>(detail::parse_number(require("dim"), "dim"));
    auto ext = detail::parse_number_list(require("extents"), "extents");
    if (static_cast<int>(ext.size()) != 2 * s.dim)
        throw std::invalid_argument("scenario: extents must list 2*dim numbers");
    for (int ax = 0; ax < s.dim; ++ax)
        s.extents.push_back(Interval{ext[static_cast<std::size_t>(2 * ax)],
                                     ext[static_cast<std::size_t>(2 * ax + 1)]});
    auto counts = detail::parse_number_list(require("n_interior"), "n_interior");
    if (static_cast<int>(counts.size()) != s.dim)
        throw std::invalid_argument("scenario: n_interior must list dim integers");
    for (double c : counts) s.n_interior.push_back(static_cast<int>(c));

    s.p = detail::parse_number(require("p"), "p");

    if (kv.count("lambda")) s.lambdas = detail::parse_number_list(kv["lambda"], "lambda");
    if (kv.count("delta")) s.deltas = detail::parse_number_list(kv["delta"], "delta");

    if (kv.count("family")) {
        const std::string& f = kv["family"];
        if (f == "eigenfunction_multiple")
            s.family = DataFamily::EigenfunctionMultiple;
        else if (f == "gaussian_bump")
            s.family = DataFamily::GaussianBump;
        else if (f == "from_file")
            s.family = DataFamily::FromFile;
        else
            throw std::invalid_argument("scenario: unknown family '" + f + "'");
    }
    if (kv.count("amplitude")) s.amplitudes = detail::parse_number_list(kv["amplitude"], "amplitude");
    if (kv.count("center")) s.center = detail::parse_number_list(kv["center"], "center");
    if (kv.count("width")) s.width = detail::parse_number(kv["width"], "width");
    if (kv.count("file")) s.file = kv["file"];
    if (s.family == DataFamily::FromFile) {
        if (s.file.empty())
            throw std::invalid_argument("scenario: family from_file requires key 'file'");
        if (!std::filesystem::exists(s.file))
            throw std::invalid_argument("scenario: file '" + s.file + "' does not exist");
    }

    for (const std::string& tok : [&] {
             std::vector<std::string> toks;
             std::string cur;
             for (char c : require("tasks")) {
                 if (c == ',') {
                     toks.push_back(detail::trim(cur));
                     cur.clear();
                 } else {
                     cur += c;
                 }
             }
             toks.push_back(detail::trim(cur));
             return toks;
         }()) {
        if (tok == "depths")
            s.tasks.insert(Task::Depths);
        else if (tok == "classify")
            s.tasks.insert(Task::Classify);
        else if (tok == "evolve")
            s.tasks.insert(Task::Evolve);
        else if (tok == "compare")
            s.tasks.insert(Task::Compare);
        else if (tok == "verify")
            s.tasks.insert(Task::Verify);
        else
            throw std::invalid_argument("scenario: unknown task '" + tok + "'");
    }
    if (s.tasks.empty()) throw std::invalid_argument("scenario: tasks must be nonempty");

    s.flow.params = Params{s.p, s.lambdas.front(), 0.0};
    if (kv.count("dt_init")) s.flow.dt_init = detail::parse_number(kv["dt_init"], "dt_init");
    if (kv.count("dt_min")) s.flow.dt_min = detail::parse_number(kv["dt_min"], "dt_min");
    if (kv.count("t_max")) s.flow.t_max = detail::parse_number(kv["t_max"], "t_max");
    if (kv.count("blowup_sup_threshold"))
        s.flow.blowup_sup_threshold =
            detail::parse_number(kv["blowup_sup_threshold"], "blowup_sup_threshold");
    if (kv.count("decay_h1_threshold"))
        s.flow.decay_h1_threshold =
            detail::parse_number(kv["decay_h1_threshold"], "decay_h1_threshold");
    if (kv.count("snapshot_stride"))
        s.flow.snapshot_stride =
            static_cast<int>(detail::parse_number(kv["snapshot_stride"], "snapshot_stride"));
    if (kv.count("safety")) s.flow.safety = detail::parse_number(kv["safety"], "safety");
    if (kv.count("step_tol")) s.flow.step_tol = detail::parse_number(kv["step_tol"], "step_tol");
    if (kv.count("adaptive")) s.flow.adaptive = detail::parse_bool(kv["adaptive"], "adaptive");
    if (kv.count("seed"))
        s.seed = static_cast<unsigned long long>(detail::parse_number(kv["seed"], "seed"));

    // Defaults that need the mesh geometry.
    if (s.center.empty())
        for (int ax = 0; ax < s.dim; ++ax)
            s.center.push_back(0.5 * (s.extents[static_cast<std::size_t>(ax)].a +
                                      s.extents[static_cast<std::size_t>(ax)].b));
    if (static_cast<int>(s.center.size()) != s.dim)
        throw std::invalid_argument("scenario: center must list dim numbers");
    if (s.width == 0.0) {
        double side = std::numeric_limits<double>::infinity();
        for (const auto& e : s.extents) side = std::min(side, e.b - e.a);
        s.width = 0.1 * side;
    }
    if (!(s.width > 0.0)) throw std::invalid_argument("scenario: width must be > 0");

    s.flow.validate();
    Params{s.p, 0.0, 0.0}.validate();
    for (double l : s.lambdas) Params{s.p, l, 0.0}.validate();
    for (double d : s.deltas) Params{s.p, 0.0, d}.validate();
    return s;
}

inline Scenario parse_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

/// One line of the run summary: membership states, the predicted behavior
/// (decay for the W union, blow-up for the Z union), the observed outcome
/// and whether they agree.
struct SummaryRow {
    std::string datum;
    double amplitude = std::numeric_limits<double>::quiet_NaN();
    double p = 0.0;
    double lambda_used = 0.0;
    double delta_used = 0.0;
    Membership w_state = Membership::No;
    Membership z_state = Membership::No;
    std::string predicted = "none";
    std::string outcome = "-";
    double t_value = std::numeric_limits<double>::quiet_NaN();
    std::string agreement = "n/a";
};

struct ScenarioRunResult {
    std::vector<SummaryRow> rows;
    int disagreements = 0;
    int failures = 0;
    std::filesystem::path out_root;
};

/// Phase table CSV: datum,p,lambda,delta,membership,outcome,t_estimate.
inline void emit_phase_table(const std::vector<SummaryRow>& rows,
                             const std::filesystem::path& path) {
    if (rows.empty()) throw std::invalid_argument("emit_phase_table: no results");
    std::ostringstream out;
    out << "datum,p,lambda,delta,membership,outcome,t_estimate\n";
    for (const auto& r : rows) {
        std::string membership = "none";
        if (r.w_state == Membership::Yes)
            membership = "W";
        else if (r.z_state == Membership::Yes)
            membership = "Z";
        else if (r.w_state == Membership::Borderline || r.z_state == Membership::Borderline)
            membership = "borderline";
        out << r.datum << ',' << format_g17(r.p) << ',' << format_g17(r.lambda_used) << ','
            << format_g17(r.delta_used) << ',' << membership << ',' << r.outcome << ','
            << format_g17(r.t_value) << '\n';
    }
    detail::atomic_write(path, out.str());
}

namespace detail {

inline std::string datum_label(std::size_t index) {
    std::ostringstream out;
    out << "datum_" << std::setw(2) << std::setfill('0') << index;
    return out.str();
}

inline std::vector<GridFunction> build_initial_data(const Scenario& s, const MeshPtr& mesh) {
    std::vector<GridFunction> data;
    switch (s.family) {
        case DataFamily::EigenfunctionMultiple: {
            GridFunction mode = first_dirichlet_mode(mesh).eigfn;  // sup-normalized
            for (double c : s.amplitudes) data.push_back(scale(c, mode));
            break;
        }
        case DataFamily::GaussianBump: {
            for (double amp : s.amplitudes) {
                const double w2 = 2.0 * s.width * s.width;
                if (s.dim == 1) {
                    const double c0 = s.center[0];
                    data.push_back(GridFunction::sample(mesh, [amp, c0, w2](double x) {
                        return amp * std::exp(-(x - c0) * (x - c0) / w2);
                    }));
                } else {
                    const double c0 = s.center[0], c1 = s.center[1];
                    data.push_back(GridFunction::sample(mesh, [amp, c0, c1, w2](double x, double y) {
                        return amp *
                               std::exp(-((x - c0) * (x - c0) + (y - c1) * (y - c1)) / w2);
                    }));
                }
            }
            break;
        }
        case DataFamily::FromFile:
            data.push_back(load_grid_function(s.file, mesh));
            break;
    }
    return data;
}

inline void append_verify_row(std::ostringstream& out, const std::string& datum,
                              const std::string& check, double max_abs, double aux, double scl,
                              bool ok) {
    out << datum << ',' << check << ',' << format_g17(max_abs) << ',' << format_g17(aux) << ','
        << format_g17(scl) << ',' << (ok ? "yes" : "no") << '\n';
}

/// Bounded parallel for over [0, n): deterministic output arrays, worker
/// count capped by jobs.
template <class Fn>
inline void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const int workers = std::min<int>(jobs, static_cast<int>(n));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Executes the scenario's tasks in dependency order
/// (depths -> classify -> evolve/compare -> verify), writing every module's
/// CSV artifacts under out_dir/<name>/. Task failures for one datum are
/// recorded and the run continues for independent data. Returns the summary
/// rows plus disagreement and failure counts.
inline ScenarioRunResult run_scenario(const Scenario& s, const std::filesystem::path& out_dir,
                                      int jobs = 1) {
    namespace fs = std::filesystem;
    ScenarioRunResult result;
    result.out_root = out_dir / s.name;
    fs::create_directories(result.out_root);

    MeshPtr mesh = build_mesh(s.dim, s.extents, s.n_interior);
    std::vector<GridFunction> data = detail::build_initial_data(s, mesh);

    const bool need_depths = s.tasks.count(Task::Depths) || s.tasks.count(Task::Classify) ||
                             s.tasks.count(Task::Evolve) || s.tasks.count(Task::Verify);
    std::optional<DepthTable> table;
    if (need_depths) {
        table = compute_depth_table(mesh, s.p, s.lambdas, s.deltas);
        if (s.tasks.count(Task::Depths)) {
            save_depth_table(result.out_root / "depths.csv", *table);
            for (std::size_t i = 0; i < table->rows.size(); ++i) {
                const auto& row = table->rows[i];
                if (!row.minimizer) continue;
                std::ostringstream name;
                name << "minimizer_" << (row.is_lambda_row ? "lambda_" : "delta_")
                     << format_g17(row.is_lambda_row ? row.lambda : row.delta) << ".csv";
                save_grid_function(result.out_root / name.str(), *row.minimizer);
            }
        }
    }

    const Params base_params{s.p, s.lambdas.front(), 0.0};
    std::vector<SetMembership> memberships(data.size());
    if (table) {
        std::ostringstream cls;
        cls << "datum,kind,parameter,depth,energy,nehari,state,reason\n";
        for (std::size_t i = 0; i < data.size(); ++i) {
            memberships[i] = classify(data[i], s.lambdas, s.deltas, base_params, *table);
            const std::string label = detail::datum_label(i);
            for (const auto& w : memberships[i].w_lambda)
                cls << label << ",W_lambda," << format_g17(w.lambda) << ',' << format_g17(w.depth)
                    << ',' << format_g17(w.E_lambda) << ',' << format_g17(w.I) << ','
                    << to_string(w.state) << ",\"" << w.reason << "\"\n";
            for (const auto& z : memberships[i].z_delta)
                cls << label << ",Z_delta," << format_g17(z.delta) << ',' << format_g17(z.depth)
                    << ',' << format_g17(z.J_delta) << ',' << format_g17(z.I_delta) << ','
                    << to_string(z.state) << ",\"" << z.reason << "\"\n";
        }
        if (s.tasks.count(Task::Classify))
            detail::atomic_write(result.out_root / "classification.csv", cls.str());
    }

    struct DatumWork {
        std::optional<Trajectory> traj;
        std::optional<FlowOutcome> outcome;
        std::string error;
        std::string verify_rows;
    };
    std::vector<DatumWork> work(data.size());

    const bool do_evolve = s.tasks.count(Task::Evolve) > 0;
    const bool do_compare = s.tasks.count(Task::Compare) > 0;
    const bool do_verify = s.tasks.count(Task::Verify) > 0;

    detail::parallel_for(data.size(), jobs, [&](std::size_t i) {
        DatumWork& wk = work[i];
        const std::string label = detail::datum_label(i);
        try {
            if (do_evolve || do_verify) {
                FlowConfig cfg = s.flow;
                cfg.params = Params{s.p, s.lambdas.front(), 0.0};
                auto [traj, outcome] = run_flow(data[i], cfg);
                if (do_evolve) {
                    save_trajectory(result.out_root / (label + "_trajectory.csv"), traj);
                    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
                        std::ostringstream name;
                        name << label << "_snapshot_" << std::setw(6) << std::setfill('0')
                             << k * static_cast<std::size_t>(cfg.snapshot_stride) << ".csv";
                        save_grid_function(result.out_root / name.str(),
                                           traj.snapshots[k].second);
                    }
                    detail::atomic_write(result.out_root / (label + "_outcome.txt"),
                                         outcome_summary_line(outcome, cfg) + "\n");
                }
                wk.traj = std::move(traj);
                wk.outcome = std::move(outcome);
            }

            if (do_compare) {
                if (min_value(data[i]) >= 0.0 && !is_zero(data[i])) {
                    for (std::size_t k = 0; k < s.deltas.size(); ++k) {
                        FlowConfig cfg = s.flow;
                        cfg.params = Params{s.p, s.lambdas.front(), 0.0};
                        ComparisonReport rep = run_comparison(data[i], cfg, s.deltas[k]);
                        std::ostringstream name;
                        name << label << "_comparison_delta_" << format_g17(s.deltas[k]) << ".csv";
                        save_comparison(result.out_root / name.str(), rep);
                    }
                }
            }

            if (do_verify && wk.traj && wk.traj->size() >= 3) {
                std::ostringstream vr;
                const auto mass = verify_mass_identity(*wk.traj);
                detail::append_verify_row(vr, label, "mass_identity", mass.max_abs,
                                          mass.median_abs, mass.scale,
                                          mass.max_abs <= 1e-2 * std::max(mass.scale, 1e-300));
                for (double lambda : s.lambdas) {
                    const auto dis = verify_dissipation_identity(*wk.traj, lambda);
                    detail::append_verify_row(
                        vr, label, "dissipation_lambda_" + format_g17(lambda), dis.max_abs,
                        dis.median_abs, dis.scale,
                        dis.monotone_ok && dis.max_abs <= 1e-2 * std::max(dis.scale, 1e-300));
                }
                // Positivity of nonnegative data along the run.
                if (min_value(data[i]) >= 0.0) {
                    double worst = 0.0;
                    for (std::size_t n = 0; n < wk.traj->size(); ++n)
                        worst = std::min(worst, wk.traj->min_values[n]);
                    double sup_scale = 0.0;
                    for (std::size_t n = 0; n < wk.traj->size(); ++n)
                        sup_scale = std::max(sup_scale, wk.traj->reports[n].sup_norm);
                    detail::append_verify_row(vr, label, "positivity", worst, 0.0, sup_scale,
                                              worst >= -1e-12 * sup_scale);
                }
                // Blow-up differential inequality for confident Z members.
                if (wk.outcome && wk.outcome->kind == OutcomeKind::BlowUp && table) {
                    for (const auto& z : memberships[i].z_delta) {
                        if (z.state != Membership::Yes || z.delta != 0.0) continue;
                        Params pz{s.p, 0.0, z.delta};
                        const auto budget = epsilon_budget(data[i], pz, z.depth);
                        const auto ode = verify_blowup_ode(*wk.traj, *wk.outcome, budget.epsilon,
                                                           budget.d_delta_eps_lower_bound, pz);
                        detail::append_verify_row(
                            vr, label, "blowup_ode_delta_" + format_g17(z.delta),
                            ode.deficit_min_margin,
                            static_cast<double>(ode.composite_violations), budget.epsilon,
                            ode.deficit_ok && ode.mass_increasing && ode.embedding_ok);
                    }
                }
                wk.verify_rows = vr.str();
            }
        } catch (const std::exception& ex) {
            wk.error = ex.what();
        }
    });

    if (do_verify) {
        std::ostringstream vr;
        vr << "datum,check,max_abs,aux,scale,ok\n";
        for (const auto& wk : work) vr << wk.verify_rows;
        detail::atomic_write(result.out_root / "verify.csv", vr.str());
    }

    // Summary assembly in datum order.
    for (std::size_t i = 0; i < data.size(); ++i) {
        SummaryRow row;
        row.datum = detail::datum_label(i);
        row.p = s.p;
        if (s.family != DataFamily::FromFile && i < s.amplitudes.size())
            row.amplitude = s.amplitudes[i];
        row.lambda_used = s.lambdas.front();
        row.delta_used = s.deltas.front();

        if (table) {
            const auto& mem = memberships[i];
            bool w_yes = false, w_border = false, z_yes = false, z_border = false;
            for (const auto& w : mem.w_lambda) {
                if (w.state == Membership::Yes && !w_yes) {
                    w_yes = true;
                    row.lambda_used = w.lambda;
                }
                if (w.state == Membership::Borderline) w_border = true;
            }
            for (const auto& z : mem.z_delta) {
                if (z.state == Membership::Yes && !z_yes) {
                    z_yes = true;
                    row.delta_used = z.delta;
                }
                if (z.state == Membership::Borderline) z_border = true;
            }
            row.w_state = w_yes ? Membership::Yes
                                : (w_border ? Membership::Borderline : Membership::No);
            row.z_state = z_yes ? Membership::Yes
                                : (z_border ? Membership::Borderline : Membership::No);
            if (w_yes && z_yes)
                row.predicted = "conflict";
            else if (w_yes)
                row.predicted = "decay";
            else if (z_yes)
                row.predicted = "blow-up";
            else if (w_border || z_border)
                row.predicted = "uncertain";
            else
                row.predicted = "none";
        }

        const DatumWork& wk = work[i];
        if (!wk.error.empty()) {
            row.outcome = "error: " + wk.error;
            ++result.failures;
        } else if (wk.outcome) {
            row.outcome = to_string(wk.outcome->kind);
            if (wk.outcome->kind == OutcomeKind::GlobalDecay)
                row.t_value = wk.outcome->t_reached;
            else if (wk.outcome->kind == OutcomeKind::BlowUp)
                row.t_value = wk.outcome->t_estimate;
        }

        if (wk.error.empty() && wk.outcome) {
            if (row.predicted == "decay")
                row.agreement = (wk.outcome->kind == OutcomeKind::GlobalDecay) ? "yes" : "no";
            else if (row.predicted == "blow-up")
                row.agreement = (wk.outcome->kind == OutcomeKind::BlowUp) ? "yes" : "no";
            else
                row.agreement = "n/a";
        }
        if (row.agreement == "no") ++result.disagreements;
        result.rows.push_back(std::move(row));
    }

    // Summary CSV + human-readable table.
    {
        std::ostringstream sum;
        sum << "datum,amplitude,W,Z,predicted,outcome,t,agreement\n";
        for (const auto& r : result.rows)
            sum << r.datum << ',' << format_g17(r.amplitude) << ',' << to_string(r.w_state) << ','
                << to_string(r.z_state) << ',' << r.predicted << ',' << r.outcome << ','
                << format_g17(r.t_value) << ',' << r.agreement << '\n';
        detail::atomic_write(result.out_root / "summary.csv", sum.str());

        std::ostringstream txt;
        txt << std::left << std::setw(10) << "datum" << std::setw(12) << "amplitude"
            << std::setw(12) << "W" << std::setw(12) << "Z" << std::setw(11) << "predicted"
            << std::setw(14) << "outcome" << std::setw(14) << "t" << "agreement\n";
        for (const auto& r : result.rows) {
            std::ostringstream amp, tv;
            amp << std::setprecision(4) << r.amplitude;
            tv << std::setprecision(6) << r.t_value;
            txt << std::left << std::setw(10) << r.datum << std::setw(12) << amp.str()
                << std::setw(12) << to_string(r.w_state) << std::setw(12) << to_string(r.z_state)
                << std::setw(11) << r.predicted << std::setw(14) << r.outcome << std::setw(14)
                << tv.str() << r.agreement << '\n';
        }
        txt << "disagreements=" << result.disagreements << " failures=" << result.failures
            << '\n';
        detail::atomic_write(result.out_root / "summary.txt", txt.str());
    }

    if (!result.rows.empty()) emit_phase_table(result.rows, result.out_root / "phase.csv");
    return result;
}

}  // namespace pwlab
