#include "ehsched/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ehsched/dp.hpp"
#include "ehsched/model_io.hpp"
#include "ehsched/policies.hpp"
#include "ehsched/sim.hpp"

namespace ehs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOutputSchemaVersion = 1;

/// Loads a model, mapping failures onto exit codes.
std::optional<Problem> load_model(const fs::path& path, std::ostream& log, int& code) {
  if (!fs::exists(path)) {
    log << "error: model file " << path << " does not exist\n";
    code = kNoInput;
    return std::nullopt;
  }
  try {
    Problem p = load_problem(path);
    if (p.harvest_rounding_error > 0.0) {
      log << "note: harvest states rounded to the energy grid, max error "
          << p.harvest_rounding_error << " mJ\n";
    }
    return p;
  } catch (const OffGridError& e) {
    log << "error: " << e.what() << '\n';
    code = kFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    code = kDataError;
  }
  return std::nullopt;
}

bool ensure_dir(const fs::path& dir, std::ostream& log) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    log << "error: cannot create output directory " << dir << '\n';
    return false;
  }
  return true;
}

/// E over the initial state distribution of V_N(e_N, h, gamma).
std::optional<double> dp_expected_bits(const ValueTable& table, int horizon, double energy) {
  const Problem& p = table.problem();
  if (horizon > table.horizon() || !p.grid.on_grid(energy) || energy > p.grid.max_energy()) {
    return std::nullopt;
  }
  const std::size_t k = p.grid.index_of(energy);
  const Vector pi = p.harvest.chain().stationary();
  const double uniform = 1.0 / static_cast<double>(p.channel.size());
  double v = 0.0;
  for (std::size_t h = 0; h < p.harvest.size(); ++h) {
    for (std::size_t u = 0; u < p.channel.size(); ++u) {
      v += pi(static_cast<Eigen::Index>(h)) * uniform * table.value(horizon, k, h, u);
    }
  }
  return v;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t master, std::size_t index) {
  std::uint64_t x = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

int cmd_solve(const SolveConfig& config, std::ostream& log) {
  if (config.horizon < 1) {
    log << "error: --horizon must be at least 1\n";
    return kUsage;
  }
  int code = kOk;
  const auto problem = load_model(config.model, log, code);
  if (!problem) return code;
  if (!ensure_dir(config.out, log)) return kCantCreate;

  ValueTable table = backward_induct(*problem, config.horizon);
  const StructureReport report = check_structure(table);
  save_table(table, config.out / "value_table.bin");
  json doc = report_to_json(report);
  doc["horizon"] = config.horizon;
  doc["clamped_cells"] = table.clamped_cells();
  std::ofstream(config.out / "structure_report.json") << doc.dump(2) << '\n';

  log << "solved N=" << config.horizon << " over " << problem->grid.points()
      << " energy points; theorem1_ok=" << report.theorem1_ok
      << " threshold_ok=" << report.threshold_ok << " assumption1_ok=" << report.assumption1_ok
      << " (" << report.assumption1_violations.size() << " violations)"
      << " lemma_bounds_ok=" << report.lemma_bounds_ok << '\n';
  if (table.clamped_cells() > 0) {
    log << "warning: " << table.clamped_cells()
        << " cells can reach the grid ceiling; consider raising grid.max_mJ\n";
  }
  if (config.strict && !report.all_ok()) return kStructureViolation;
  return kOk;
}

int cmd_simulate(const SimulateConfig& config, std::ostream& log) {
  std::vector<int> horizons = config.sweep_horizons;
  if (horizons.empty() && config.horizon > 0) horizons.push_back(config.horizon);
  if (horizons.empty()) {
    log << "error: give --horizon or --sweep-horizons\n";
    return kUsage;
  }
  for (int n : horizons) {
    if (n < 1) {
      log << "error: horizons must be at least 1\n";
      return kUsage;
    }
  }
  if (config.reps < 1) {
    log << "error: --reps must be at least 1\n";
    return kUsage;
  }
  if (config.policies.empty() || (config.require_multiple_policies && config.policies.size() < 2)) {
    log << "error: compare needs at least two policies\n";
    return kUsage;
  }
  for (const std::string& name : config.policies) {
    const auto& valid = policy_names();
    if (std::find(valid.begin(), valid.end(), name) == valid.end()) {
      log << "error: unknown policy '" << name << "'; valid names:";
      for (const auto& v : valid) log << ' ' << v;
      log << '\n';
      return kUsage;
    }
  }

  int code = kOk;
  const auto problem = load_model(config.model, log, code);
  if (!problem) return code;
  const int max_horizon = *std::max_element(horizons.begin(), horizons.end());

  std::shared_ptr<const ValueTable> table;
  const bool wants_dp =
      std::find(config.policies.begin(), config.policies.end(), "optimal-dp") != config.policies.end();
  if (wants_dp) {
    if (config.table) {
      if (!fs::exists(*config.table)) {
        log << "error: table file " << *config.table << " does not exist\n";
        return kNoInput;
      }
      try {
        auto loaded = std::make_shared<const ValueTable>(load_table(*config.table));
        if (problem_hash(loaded->problem()) != problem_hash(*problem)) {
          log << "error: table was solved for a different model\n";
          return kDataError;
        }
        if (loaded->horizon() < max_horizon) {
          log << "error: table horizon " << loaded->horizon() << " is shorter than N=" << max_horizon
              << '\n';
          return kUsage;
        }
        table = std::move(loaded);
      } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kDataError;
      }
    } else {
      table = std::make_shared<const ValueTable>(backward_induct(*problem, max_horizon));
    }
  }

  std::vector<PolicyPtr> policies;
  for (const std::string& name : config.policies) {
    policies.push_back(make_policy(name, *problem, max_horizon, table));
  }
  if (!ensure_dir(config.out, log)) return kCantCreate;

  std::ostringstream csv;
  csv << "# ehsched aggregate schema " << kOutputSchemaVersion << '\n';
  write_aggregate_header(csv);
  json cells = json::array();
  for (std::size_t cell = 0; cell < horizons.size(); ++cell) {
    ExperimentSpec spec;
    spec.horizon = horizons[cell];
    spec.replications = config.reps;
    spec.seed = horizons.size() == 1 ? config.seed : cell_seed(config.seed, cell);
    spec.initial_energy = config.initial_energy;
    spec.policies = policies;
    spec.threads = config.threads;
    spec.dump_trajectories = config.dump_trajectories;

    SimOutcome outcome;
    try {
      outcome = compare(*problem, spec);
    } catch (const DominanceViolation& e) {
      log << "error: offline dominance violated: " << e.what() << '\n';
      return kDominanceViolation;
    }
    write_aggregate_rows(csv, outcome);

    json entry = {{"N", spec.horizon},
                  {"seed", spec.seed},
                  {"replications", spec.replications},
                  {"oracle_mean_bps", outcome.oracle_mean_bps}};
    if (table) {
      if (const auto v = dp_expected_bits(*table, spec.horizon, spec.initial_energy)) {
        entry["dp_expected_bits"] = *v;
      }
    }
    json rows = json::array();
    for (const PolicySummary& s : outcome.policies) {
      rows.push_back({{"policy", s.policy},
                      {"mean_bits_per_slot", s.mean_bits_per_slot},
                      {"mean_throughput_bps", s.mean_throughput_bps},
                      {"se_throughput_bps", s.se_throughput_bps},
                      {"mean_delay_slots", s.mean_delay_slots},
                      {"se_delay_slots", s.se_delay_slots},
                      {"delay_undefined", s.delay_undefined},
                      {"oracle_gap_mean_bps", s.oracle_gap_mean_bps},
                      {"oracle_gap_se_bps", s.oracle_gap_se_bps},
                      {"clamps", s.clamps}});
      if (!s.dumped.empty()) {
        std::ofstream traj(config.out /
                           ("trajectories_" + s.policy + "_N" + std::to_string(spec.horizon) + ".csv"));
        write_trajectories(traj, s, outcome.slot_duration);
      }
      log << std::setw(22) << std::left << s.policy << " N=" << std::setw(4) << spec.horizon
          << std::right << " throughput " << std::setprecision(6) << s.mean_throughput_bps
          << " bps (se " << s.se_throughput_bps << "), mean delay " << s.mean_delay_slots
          << " slots\n";
    }
    entry["policies"] = rows;
    cells.push_back(entry);
  }
  std::ofstream(config.out / "aggregate.csv") << csv.str();
  json summary = {{"schema_version", kOutputSchemaVersion},
                  {"seed", config.seed},
                  {"initial_energy_mJ", config.initial_energy},
                  {"cells", cells}};
  std::ofstream(config.out / "summary.json") << summary.dump(2) << '\n';
  return kOk;
}

int cmd_ingest(const IngestConfig& config, std::ostream& log) {
  if (!fs::exists(config.trace)) {
    log << "error: trace file " << config.trace << " does not exist\n";
    return kNoInput;
  }
  if (config.spec.bins < 1) {
    log << "error: --bins must be at least 1\n";
    return kUsage;
  }
  try {
    const TraceModel tm = trace_to_markov(config.trace, config.spec);
    const std::vector<double> levels =
        config.levels_mw.empty() ? wifi_power_levels_mw() : config.levels_mw;
    const PowerRateSet set = build_power_rate_set(levels, config.bandwidth_hz,
                                                  config.noise_psd_w_per_hz, config.spec.slot_s);
    double ceiling = 4096.0;
    if (config.max_mj) {
      ceiling = *config.max_mj;
    } else {
      const double peak = std::max(set.max_drain(), tm.model.states().maxCoeff());
      ceiling = std::max(ceiling, std::ceil(4.0 * peak / config.quantum_mj) * config.quantum_mj);
    }
    json q = json::array();
    for (Eigen::Index i = 0; i < tm.model.transitions().rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < tm.model.transitions().cols(); ++j) {
        row.push_back(tm.model.transitions()(i, j));
      }
      q.push_back(row);
    }
    json states = json::array();
    for (Eigen::Index i = 0; i < tm.model.states().size(); ++i) states.push_back(tm.model.states()(i));
    json doc = {
        {"schema_version", kModelSchemaVersion},
        {"harvest", {{"states_mJ", states}, {"transitions", q}, {"slot_s", config.spec.slot_s}}},
        {"channel", {{"gains", {1.0}}, {"transitions", {{1.0}}}}},
        {"power_set", {{"levels_mW", levels}, {"idle", false}}},
        {"grid", {{"quantum_mJ", config.quantum_mj}, {"max_mJ", ceiling}}},
        {"rate",
         {{"form", "shannon"},
          {"bandwidth_hz", config.bandwidth_hz},
          {"noise_psd_w_per_hz", config.noise_psd_w_per_hz}}},
        {"trace",
         {{"slots", tm.slot_energies.size()},
          {"row_counts", tm.row_counts},
          {"panel_area_cm2", config.spec.panel_area_cm2},
          {"efficiency", config.spec.efficiency}}},
    };
    // Validate the document as a model before writing it.
    problem_from_json(doc);
    if (config.out.has_parent_path() && !ensure_dir(config.out.parent_path(), log)) return kCantCreate;
    std::ofstream out(config.out);
    if (!out) {
      log << "error: cannot write " << config.out << '\n';
      return kCantCreate;
    }
    out << doc.dump(2) << '\n';
    log << "wrote " << tm.model.size() << "-state harvest model from " << tm.slot_energies.size()
        << " slots to " << config.out << '\n';
    return kOk;
  } catch (const TraceParseError& e) {
    log << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const OffGridError& e) {
    log << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kDataError;
  }
}

int run(int argc, const char* const* argv, std::ostream& log) {
  CLI::App app{"Energy-harvesting link scheduling: DP solver, online policies, Monte Carlo"};
  app.require_subcommand(1);

  SolveConfig solve;
  auto* solve_cmd = app.add_subcommand("solve-dp", "Solve the finite-horizon DP and check its structure");
  solve_cmd->add_option("--model", solve.model, "Model definition file")->required();
  solve_cmd->add_option("--horizon", solve.horizon, "Horizon N in slots")->required();
  solve_cmd->add_option("--out", solve.out, "Output directory");
  solve_cmd->add_flag("--strict", solve.strict, "Exit 2 on structural violations");

  SimulateConfig sim;
  std::string policies = "optimal-dp,expected-threshold,greedy,single-power,to";
  std::vector<std::string> sweep;
  auto add_sim_options = [&](CLI::App* cmd) {
    cmd->add_option("--model", sim.model, "Model definition file")->required();
    cmd->add_option("--table", sim.table, "Solved value table for optimal-dp");
    cmd->add_option("--horizon", sim.horizon, "Horizon N in slots");
    cmd->add_option("--sweep-horizons", sweep, "Comma-separated horizons")->delimiter(',');
    cmd->add_option("--reps", sim.reps, "Replications per horizon");
    cmd->add_option("--seed", sim.seed, "Master seed");
    cmd->add_option("--policies", policies, "Comma-separated policy names");
    cmd->add_option("--out", sim.out, "Output directory");
    cmd->add_option("--dump-trajectories", sim.dump_trajectories, "Trajectories to dump per policy");
    cmd->add_option("--threads", sim.threads, "Worker threads");
    cmd->add_option("--initial-energy", sim.initial_energy, "Initial stored energy, mJ");
  };
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo evaluation of online policies");
  add_sim_options(sim_cmd);
  auto* cmp_cmd = app.add_subcommand("compare", "simulate with at least two policies");
  add_sim_options(cmp_cmd);

  IngestConfig ingest;
  double max_mj = 0.0;
  auto* ingest_cmd = app.add_subcommand("ingest-trace", "Build a harvest model from an irradiance trace");
  ingest_cmd->add_option("--trace", ingest.trace, "CSV with timestamp_s,irradiance_w_m2")->required();
  ingest_cmd->add_option("--out", ingest.out, "Model file to write")->required();
  ingest_cmd->add_option("--bins", ingest.spec.bins, "Quantization bins");
  ingest_cmd->add_option("--area-cm2", ingest.spec.panel_area_cm2, "Panel area");
  ingest_cmd->add_option("--efficiency", ingest.spec.efficiency, "Conversion efficiency");
  ingest_cmd->add_option("--slot-s", ingest.spec.slot_s, "Slot length, seconds");
  ingest_cmd->add_option("--levels-mw", ingest.levels_mw, "Power levels, mW")->delimiter(',');
  ingest_cmd->add_option("--quantum", ingest.quantum_mj, "Energy quantum, mJ");
  auto* max_opt = ingest_cmd->add_option("--max-energy", max_mj, "Grid ceiling, mJ");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    log << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    log << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*solve_cmd) return cmd_solve(solve, log);
    if (*sim_cmd || *cmp_cmd) {
      sim.require_multiple_policies = static_cast<bool>(*cmp_cmd);
      std::stringstream ss(policies);
      for (std::string name; std::getline(ss, name, ',');) {
        if (!name.empty()) sim.policies.push_back(name);
      }
      for (const std::string& s : sweep) {
        try {
          sim.sweep_horizons.push_back(std::stoi(s));
        } catch (const std::exception&) {
          log << "error: bad horizon '" << s << "'\n";
          return kUsage;
        }
      }
      return cmd_simulate(sim, log);
    }
    if (*ingest_cmd) {
      if (*max_opt) ingest.max_mj = max_mj;
      return cmd_ingest(ingest, log);
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace ehs::cli
