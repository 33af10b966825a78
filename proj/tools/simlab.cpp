// simlab: command-line front end for the randomization simulation library.
//
//   simlab run --scenario model2.json --procedure cara1 --reps 5000 --seed 42 --out t.csv
//   simlab reproduce t7-2 --seed 7
//   simlab reproduce s7-rules
//   simlab fixed-design --p-a 0.95,0.7 --p-b 0.7,0.95 --sizes 100,100
//   simlab defaults

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "simlab/engine.hpp"
#include "simlab/procedure.hpp"
#include "simlab/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simlab;

namespace {

enum ExitCode { kOk = 0, kRuntime = 1, kConfig = 2 };

void report_error(const char* kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

ScenarioSpec resolve_scenario(const std::string& path) {
  if (fs::exists(path)) return load_scenario(path);
  const fs::path bundled = fs::path(SIMLAB_DATA_DIR) / "scenarios" / fs::path(path).filename();
  if (fs::exists(bundled)) return load_scenario(bundled);
  throw ConfigError("scenario file not found: " + path);
}

ParameterMap parse_params(const std::vector<std::string>& raw) {
  ParameterMap out;
  for (const auto& kv : raw) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--param expects key=value, got '" + kv + "'");
    out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

// Writes to the named file, or stdout for "-".
void emit(const std::string& out, const std::string& text) {
  if (out == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error("cannot write " + out);
  f << text;
}

std::string render(const std::vector<StudySummary>& rows, const std::string& format) {
  std::ostringstream s;
  if (format == "json")
    write_json(s, rows);
  else
    write_csv(s, rows);
  return s.str();
}

std::function<void(int, int)> progress_printer(bool quiet) {
  if (quiet) return {};
  return [](int done, int total) {
    if (done == total || done % 500 == 0) std::cerr << "\r  " << done << "/" << total << (done == total ? "\n" : "");
  };
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number list: '" + s + "'");
    }
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simlab: sequential treatment allocation and Monte-Carlo trial simulation"};
  app.set_config("--config", "", "TOML/INI file supplying any flag")->configurable(false);
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int reps = 5000, workers = 1;
  std::string out = "-", format = "csv";
  bool quiet = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Master seed")->envname("SIMLAB_SEED");
    cmd->add_option("--reps", reps, "Monte-Carlo replications")->check(CLI::PositiveNumber);
    cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", out, "Output path, '-' for stdout");
    cmd->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_flag("--quiet", quiet, "No progress on stderr");
  };

  auto* run = app.add_subcommand("run", "Run one procedure on one scenario");
  std::string scenario_path, procedure_id;
  std::vector<std::string> raw_params;
  run->add_option("--scenario", scenario_path, "Scenario JSON (bundled: model1.json, model2.json, model3.json)")
      ->required();
  run->add_option("--procedure", procedure_id, "Procedure id")->required();
  run->add_option("--param", raw_params, "Procedure parameter key=value (repeatable)");
  add_common(run);

  auto* reproduce = app.add_subcommand("reproduce", "Reproduce a simulation table or the fixed-design example");
  std::string table;
  reproduce->add_option("table", table, "t7-1, t7-2, t7-3 or s7-rules")->required();
  add_common(reproduce);

  auto* fixed = app.add_subcommand("fixed-design", "Target allocations and expected failures for known probabilities");
  std::string p_a_list = "0.95,0.70", p_b_list = "0.70,0.95", sizes_list = "100,100";
  std::vector<std::string> rule_names{"balanced", "neyman", "failure-optimal"};
  fixed->add_option("--p-a", p_a_list, "Success probabilities on A per stratum");
  fixed->add_option("--p-b", p_b_list, "Success probabilities on B per stratum");
  fixed->add_option("--sizes", sizes_list, "Stratum sizes");
  fixed->add_option("--rules", rule_names, "Target rules");
  fixed->add_option("--out", out, "Output path, '-' for stdout");

  auto* defaults = app.add_subcommand("defaults", "Print default settings as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("config", e.what());
    return kConfig;
  }

  const auto seed_given = [](CLI::App* cmd) { return cmd->count("--seed") > 0 || std::getenv("SIMLAB_SEED"); };

  try {
    if (*run) {
      const ScenarioSpec scenario = resolve_scenario(scenario_path);
      const auto proc = make_procedure(procedure_id, parse_params(raw_params), scenario.burn_in);
      StudyOptions opt;
      opt.reps = reps;
      opt.workers = workers;
      opt.seed = seed_given(run) ? seed : scenario.seed;
      opt.progress = progress_printer(quiet);
      const std::vector<StudySummary> rows{run_study(scenario, *proc, opt)};
      emit(out, render(rows, format));
    } else if (*reproduce) {
      if (table == "s7-rules") {
        emit(out, to_json(gender_interaction_report()).dump(2) + "\n");
        return kOk;
      }
      const int model = table_model(table);
      StudyOptions opt;
      opt.reps = reps;
      opt.workers = workers;
      opt.seed = seed_given(reproduce) ? seed : builtin_model(model).seed;
      opt.progress = progress_printer(quiet);
      const auto rows = reproduce_table(model, opt, [&](const std::string& label) {
        if (!quiet) std::cerr << label << '\n';
      });
      emit(out, render(rows, format));
    } else if (*fixed) {
      std::vector<TargetKind> kinds;
      for (const auto& r : rule_names) kinds.push_back(target_kind_from_string(r));
      const auto report = fixed_design_report(parse_list(p_a_list), parse_list(p_b_list), parse_list(sizes_list), kinds);
      emit(out, to_json(report).dump(2) + "\n");
    } else if (*defaults) {
      std::cout << default_settings().dump(2) << '\n';
    }
  } catch (const ConfigError& e) {
    report_error("config", e.what());
    return kConfig;
  } catch (const InvalidParameter& e) {
    report_error("config", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
    return kRuntime;
  }
  return kOk;
}
