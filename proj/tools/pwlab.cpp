// pwlab: batch experiment runner for the potential-well laboratory.
//
// Subcommands:
//   pwlab run <scenario-file> --out <dir> [--jobs N] [--seed S]
//   pwlab depths --p <v> --lambda <list> --delta <list> --mesh <spec> --out <dir>
//   pwlab verify <trajectory.csv>
//
// Exit codes: 0 = success and all agreement flags yes; 2 = ran but with
// disagreements (or failed identity checks); 1 = configuration or runtime
// error.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pwlab/io.hpp"
#include "pwlab/scenario.hpp"

namespace {

// Mesh spec format "dim:extents:counts", e.g. "1:0,pi:1023" or
// "2:0,1,0,1:63,63".
pwlab::MeshPtr parse_mesh_spec(const std::string& spec) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : spec) {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    if (parts.size() != 3)
        throw std::invalid_argument("mesh spec must be 'dim:extents:counts', got '" + spec + "'");
    const int dim = static_cast<int>(pwlab::detail::parse_number(parts[0], "mesh dim"));
    auto ext = pwlab::detail::parse_number_list(parts[1], "mesh extents");
    if (static_cast<int>(ext.size()) != 2 * dim)
        throw std::invalid_argument("mesh spec: extents must list 2*dim numbers");
    std::vector<pwlab::Interval> extents;
    for (int ax = 0; ax < dim; ++ax)
        extents.push_back(pwlab::Interval{ext[static_cast<std::size_t>(2 * ax)],
                                          ext[static_cast<std::size_t>(2 * ax + 1)]});
    auto counts_d = pwlab::detail::parse_number_list(parts[2], "mesh counts");
    std::vector<int> counts;
    for (double c : counts_d) counts.push_back(static_cast<int>(c));
    return pwlab::build_mesh(dim, extents, counts);
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir, int jobs,
            unsigned long long seed, bool seed_given) {
    pwlab::Scenario s = pwlab::parse_scenario_file(scenario_path);
    if (seed_given) s.seed = seed;
    auto result = pwlab::run_scenario(s, out_dir, jobs);
    std::ifstream summary(result.out_root / "summary.txt");
    std::cout << summary.rdbuf();
    if (result.failures > 0) return 1;
    return result.disagreements > 0 ? 2 : 0;
}

int cmd_depths(double p, const std::vector<double>& lambdas, const std::vector<double>& deltas,
               const std::string& mesh_spec, const std::string& out_dir) {
    auto mesh = parse_mesh_spec(mesh_spec);
    auto table = pwlab::compute_depth_table(mesh, p, lambdas, deltas);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    pwlab::save_depth_table(fs::path(out_dir) / "depths.csv", table);
    for (const auto& row : table.rows) {
        if (!row.minimizer) continue;
        std::ostringstream name;
        name << "minimizer_" << (row.is_lambda_row ? "lambda_" : "delta_")
             << pwlab::format_g17(row.is_lambda_row ? row.lambda : row.delta) << ".csv";
        pwlab::save_grid_function(fs::path(out_dir) / name.str(), *row.minimizer);
    }
    std::cout << "p,lambda,delta,depth,method,iterations,residual\n";
    for (const auto& row : table.rows)
        std::cout << pwlab::format_g17(row.p) << ',' << pwlab::format_g17(row.lambda) << ','
                  << pwlab::format_g17(row.delta) << ',' << pwlab::format_g17(row.depth) << ','
                  << pwlab::to_string(row.method) << ',' << row.iterations << ','
                  << pwlab::format_g17(row.residual) << '\n';
    return 0;
}

// Re-runs the identity checks on a recorded trajectory file. The damped
// Nehari values are stored per row, so the mass identity needs no grid
// states; lambda is recovered from (E_lambda - J) / M at the heaviest row.
int cmd_verify(const std::string& path) {
    pwlab::TrajectoryRecord rec = pwlab::load_trajectory(path);
    if (rec.size() < 3) {
        std::cerr << "verify: trajectory has fewer than 3 rows\n";
        return 1;
    }

    double lambda = 0.0;
    std::size_t heaviest = 0;
    for (std::size_t n = 1; n < rec.size(); ++n)
        if (rec.M[n] > rec.M[heaviest]) heaviest = n;
    if (rec.M[heaviest] > 1e-300)
        lambda = (rec.E_lambda[heaviest] - rec.J[heaviest]) / rec.M[heaviest];
    if (std::abs(lambda) < 1e-10) lambda = 0.0;

    auto derivative = [&](const std::vector<double>& f, std::size_t n) {
        const double hm = rec.t[n] - rec.t[n - 1];
        const double hp = rec.t[n + 1] - rec.t[n];
        const double hm2 = hm * hm, hp2 = hp * hp;
        return (f[n + 1] * hm2 - f[n - 1] * hp2 + f[n] * (hp2 - hm2)) / (hp * hm * (hp + hm));
    };

    double mass_max = 0.0, mass_scale = 0.0;
    double dis_max = 0.0, dis_scale = 0.0;
    for (std::size_t n = 1; n + 1 < rec.size(); ++n) {
        mass_max = std::max(mass_max, std::abs(derivative(rec.M, n) + rec.I_delta[n]));
        mass_scale = std::max(mass_scale, std::abs(rec.I_delta[n]));

        std::vector<double>& E = rec.E_lambda;
        const double ut = 0.5 * (rec.ut_norm_sq[n] + rec.ut_norm_sq[n + 1]);
        const double rhs = ut + lambda * rec.I[n];
        dis_max = std::max(dis_max, std::abs(derivative(E, n) + rhs));
        dis_scale = std::max(dis_scale, std::abs(rhs));
    }

    const bool mass_ok = mass_max <= 1e-2 * std::max(mass_scale, 1e-300);
    const bool dis_ok = dis_max <= 1e-2 * std::max(dis_scale, 1e-300);
    std::cout << "rows: " << rec.size() << "\n";
    std::cout << "lambda (recovered): " << pwlab::format_g17(lambda) << "\n";
    std::cout << "mass identity   max|dM/dt + I_delta| = " << pwlab::format_g17(mass_max)
              << "  scale = " << pwlab::format_g17(mass_scale) << (mass_ok ? "  [ok]" : "  [FAIL]")
              << "\n";
    std::cout << "dissipation     max|dE/dt + |u_t|^2 + lambda I| = " << pwlab::format_g17(dis_max)
              << "  scale = " << pwlab::format_g17(dis_scale) << (dis_ok ? "  [ok]" : "  [FAIL]")
              << "\n";
    return (mass_ok && dis_ok) ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pwlab: invariant-set and blow-up experiments for the semilinear heat flow"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir = "out";
    int jobs = 1;
    unsigned long long seed = 0;
    auto* run = app.add_subcommand("run", "run a scenario file");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--jobs", jobs, "concurrent data runs")->check(CLI::PositiveNumber);
    auto* seed_opt = run->add_option("--seed", seed, "seed recorded with the run");

    double p = 3.0;
    std::vector<double> lambdas{0.0}, deltas{0.0};
    std::string mesh_spec = "1:0,pi:1023", depths_out = "out";
    auto* depths = app.add_subcommand("depths", "compute a well-depth table");
    depths->add_option("--p", p, "exponent p > 1")->required();
    depths->add_option("--lambda", lambdas, "lambda list")->delimiter(',');
    depths->add_option("--delta", deltas, "delta list")->delimiter(',');
    depths->add_option("--mesh", mesh_spec, "mesh spec dim:extents:counts");
    depths->add_option("--out", depths_out, "output directory");

    std::string traj_path;
    auto* verify = app.add_subcommand("verify", "re-run identity checks on a trajectory CSV");
    verify->add_option("trajectory", traj_path, "trajectory CSV file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(scenario_path, out_dir, jobs, seed, seed_opt->count() > 0);
        if (depths->parsed()) return cmd_depths(p, lambdas, deltas, mesh_spec, depths_out);
        if (verify->parsed()) return cmd_verify(traj_path);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}
