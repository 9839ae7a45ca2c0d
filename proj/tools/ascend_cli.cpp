// Copyright 2026 The Ascend Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ascend: scaffold configs, simulate, serve, run the oracle, rebuild reports.

#include <fmt/format.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ascend/codec.hpp"
#include "ascend/persistence.hpp"
#include "ascend/report.hpp"
#include "ascend/service.hpp"
#include "ascend/simulator.hpp"
#include "httplib.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ascend;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

constexpr const char* kTemplate = R"(// Ascend experiment config.
//
// "space" lists the page elements and the values each may take. The first
// value of every element is the current design (Control).
{
  "experiment_id": "toy",
  "name": "Toy landing page",
  "space": {
    "elements": [
      { "name": "headline", "values": ["Welcome", "Start today", "Save time"] },
      { "name": "button_color", "values": ["blue", "orange", "green"] },
      { "name": "layout", "values": ["single", "split"] }
    ]
  },
  "evolution": {
    "population_size": 4,        // candidates kept and bred per generation
    "maturity_age": 1000,        // impressions each candidate needs per generation
    "mutation_probability": 0.2,
    "max_generations": 3,
    "rng_seed": 42,
    "control_holdout_fraction": 0.1,
    "crossover": "single_point"  // or "uniform"
  },
  "allocation": {
    "sticky_ttl_ms": 86400000,   // a returning user keeps their design for a day
    "auto_advance": true
  },
  // Used by `ascend simulate` and `ascend oracle` only. The model is the
  // hidden conversion function the simulated users follow.
  //
  // For the nine-element landing-page study (381,024 designs, 599,008
  // interactions) replace this section with: { "preset": "case_study" }
  "scenario": {
    "budget": 40000,
    "users_per_day": 2000,
    "fitness": "observed",
    "model": {
      "base_rate": 0.05,
      "main_effects": [
        { "element": "headline", "value": "Start today", "delta": 0.35 },
        { "element": "button_color", "value": "orange", "delta": 0.3 },
        { "element": "layout", "value": "split", "delta": -0.2 }
      ],
      "interactions": [
        { "pairs": [ { "element": "headline", "value": "Start today" },
                     { "element": "button_color", "value": "orange" } ],
          "delta": 0.25 }
      ]
    }
  }
}
)";

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
}

std::string rate_field(const std::optional<stats::FitnessEstimate>& e, double stats::FitnessEstimate::*field) {
  return e ? fmt::format("{:.6f}", (*e).*field) : std::string();
}

std::string generations_csv(const sim::SimulationTrace& trace) {
  std::string out =
      "generation,evaluated,retained,discarded,bred,best_id,best_impressions,best_rate,"
      "best_ci_low,best_ci_high,best_true_rate\n";
  for (std::size_t k = 0; k < trace.generations.size(); ++k) {
    const auto& g = trace.generations[k];
    std::optional<stats::FitnessEstimate> est;
    for (const auto& e : g.evaluated) {
      if (g.best_id && e.id == *g.best_id) est = e.estimate;
    }
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", g.generation, g.evaluated.size(),
                       g.retained.size(), g.discarded.size(), g.bred.size(),
                       g.best_id ? std::to_string(*g.best_id) : "",
                       est ? std::to_string(est->impressions) : "",
                       rate_field(est, &stats::FitnessEstimate::rate),
                       rate_field(est, &stats::FitnessEstimate::ci_low),
                       rate_field(est, &stats::FitnessEstimate::ci_high),
                       g.best_id ? fmt::format("{:.6f}", trace.best_true_rate_by_generation[k]) : "");
  }
  return out;
}

std::string daily_csv(const sim::SimulationTrace& trace) {
  using E = stats::FitnessEstimate;
  std::string out =
      "day,best_rate,best_ci_low,best_ci_high,population_mean_rate,control_rate,control_ci_low,"
      "control_ci_high\n";
  for (const auto& d : trace.daily) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", d.day, rate_field(d.best, &E::rate),
                       rate_field(d.best, &E::ci_low), rate_field(d.best, &E::ci_high),
                       d.population_mean_rate ? fmt::format("{:.6f}", *d.population_mean_rate) : "",
                       rate_field(d.control, &E::rate), rate_field(d.control, &E::ci_low),
                       rate_field(d.control, &E::ci_high));
  }
  return out;
}

json oracle_json(const sim::SimulationScenario& scenario) {
  const auto optimum = sim::brute_force_optimum(scenario.model, scenario.config.space);
  const Genome control = scenario.config.space.control();
  return json{{"genome", value_names(scenario.config.space, optimum.genome)},
              {"design", design_of(scenario.config.space, optimum.genome)},
              {"true_rate", optimum.rate},
              {"control_true_rate", sim::true_rate(scenario.model, control)}};
}

sim::SimulationScenario load_scenario(const fs::path& path) {
  return sim::parse_scenario(parse_document(read_file(path)));
}

int cmd_init(const fs::path& path) {
  if (fs::exists(path)) {
    std::cerr << fmt::format("error: {} already exists; not overwriting\n", path.string());
    return kExitValidation;
  }
  write_file(path, kTemplate);
  std::cout << fmt::format("wrote {}\n", path.string());
  return 0;
}

int cmd_simulate(const fs::path& config, std::uint64_t seed, const fs::path& out_dir) {
  sim::SimulationScenario scenario = load_scenario(config);
  scenario.seed = seed;
  fs::create_directories(out_dir);

  std::ofstream events(out_dir / "events.jsonl", std::ios::binary);
  if (!events) throw std::runtime_error("cannot write events.jsonl");
  const auto trace =
      sim::run_scenario(scenario, [&](const LogRecord& r) { events << persistence::encode_line(r); });
  events.close();

  json report = build_report(trace.final_state);
  json simulation{{"seed", seed},
                  {"budget", scenario.budget},
                  {"users_per_day", scenario.users_per_day},
                  {"fitness", scenario.fitness == sim::FitnessMode::kOracle ? "oracle" : "observed"},
                  {"interactions", trace.interactions},
                  {"conversions", trace.conversions},
                  {"records", trace.records},
                  {"truncated", trace.truncated},
                  {"stop_reason", trace.stop_reason},
                  {"best_true_rate_by_generation", trace.best_true_rate_by_generation}};
  if (!report["best"].is_null()) {
    const auto id = report["best"]["candidate_id"].get<std::uint64_t>();
    simulation["best_true_rate"] =
        sim::true_rate(scenario.model, trace.final_state.candidates[id].genome);
  }
  report["simulation"] = std::move(simulation);
  try {
    json oracle = oracle_json(scenario);
    if (!report["best"].is_null()) oracle["best_is_optimum"] = report["best"]["genome"] == oracle["genome"];
    report["oracle"] = std::move(oracle);
  } catch (const ValidationError&) {
    report["oracle"] = nullptr;  // space too large to enumerate
  }

  write_file(out_dir / "report.json", report.dump(2) + '\n');
  write_file(out_dir / "generations.csv", generations_csv(trace));
  write_file(out_dir / "daily.csv", daily_csv(trace));
  std::cout << fmt::format("{} interactions, {} generations, stop: {}; wrote {}\n",
                           trace.interactions, trace.generations.size(),
                           trace.stop_reason.empty() ? "none" : trace.stop_reason, out_dir.string());
  return 0;
}

int cmd_oracle(const fs::path& config) {
  const auto scenario = load_scenario(config);
  std::cout << oracle_json(scenario).dump(2) << '\n';
  return 0;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int cmd_serve(std::optional<int> port_flag, std::optional<std::string> dir_flag,
              const std::optional<fs::path>& config, bool no_sync, std::uint64_t snapshot_interval) {
  int port = 8080;
  if (const char* env = std::getenv("ASCEND_PORT")) port = std::stoi(env);
  if (port_flag) port = *port_flag;
  std::string data_dir = "data";
  if (const char* env = std::getenv("ASCEND_DATA_DIR")) data_dir = env;
  if (dir_flag) data_dir = *dir_flag;

  ServiceOptions options;
  options.data_dir = data_dir;
  options.sync = !no_sync;
  options.snapshot_interval = snapshot_interval;
  ExperimentService service(options);
  for (const auto& w : service.warnings()) std::cerr << "warning: " << w << '\n';

  if (config) {
    const auto r = service.handle("POST", "/experiments", read_file(*config));
    if (r.status != 201 && r.status != 409) {
      std::cerr << "error: config rejected: " << r.body;
      return kExitValidation;
    }
  }

  httplib::Server server;
  service.mount(server);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (!server.bind_to_port("127.0.0.1", port)) {
    std::cerr << fmt::format("error: cannot listen on port {}\n", port);
    return kExitRuntime;
  }
  std::cout << fmt::format("listening on 127.0.0.1:{} data_dir={}", port, data_dir) << std::endl;
  server.listen_after_bind();
  g_server = nullptr;
  return 0;
}

int cmd_report(const fs::path& data_dir, const std::string& experiment, std::size_t top, bool csv) {
  const fs::path dir = data_dir / experiment;
  if (!fs::exists(dir / "events.jsonl")) {
    std::cerr << fmt::format("error: no event log at {}\n", (dir / "events.jsonl").string());
    return kExitRuntime;
  }
  const auto recovery = persistence::recover(dir);
  for (const auto& w : recovery.warnings) std::cerr << "warning: " << w << '\n';
  if (recovery.replay.error) {
    std::cerr << fmt::format("error: {}: {}\n", (dir / "events.jsonl").string(),
                             *recovery.replay.error);
    return kExitRuntime;
  }
  const auto& state = recovery.replay.state;
  std::cout << (csv ? report_csv(state, top) : render_report(state, top));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolutionary design optimization over live traffic"};
  app.require_subcommand(1);

  fs::path init_path;
  auto* init = app.add_subcommand("init", "Write a commented template config");
  init->add_option("path", init_path, "Where to write the config")->required();

  fs::path sim_config;
  std::uint64_t seed = 42;
  fs::path out_dir = "out";
  auto* simulate = app.add_subcommand("simulate", "Run a simulated experiment");
  simulate->add_option("--config", sim_config, "Config with a scenario section")->required();
  simulate->add_option("--seed", seed, "Random seed")->capture_default_str();
  simulate->add_option("--out", out_dir, "Output directory")->capture_default_str();

  fs::path oracle_config;
  auto* oracle = app.add_subcommand("oracle", "Print the exact optimum of the scenario model");
  oracle->add_option("--config", oracle_config, "Config with a scenario section")->required();

  std::optional<int> port;
  std::optional<std::string> data_dir_flag;
  std::optional<fs::path> serve_config;
  bool no_sync = false;
  std::uint64_t snapshot_interval = persistence::kDefaultSnapshotInterval;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--port", port, "Port (default: $ASCEND_PORT, then 8080)");
  serve->add_option("--data-dir", data_dir_flag, "Data directory (default: $ASCEND_DATA_DIR, then ./data)");
  serve->add_option("--config", serve_config, "Create this experiment at startup if absent");
  serve->add_flag("--no-sync", no_sync, "Skip fdatasync after each log append");
  serve->add_option("--snapshot-interval", snapshot_interval, "Records between snapshots")
      ->capture_default_str();

  fs::path report_dir = "data";
  std::string experiment;
  std::size_t top = kDefaultTopK;
  bool csv = false;
  auto* report = app.add_subcommand("report", "Rebuild an experiment report from its log");
  report->add_option("--data-dir", report_dir, "Data directory")->capture_default_str();
  report->add_option("--experiment", experiment, "Experiment id")->required();
  report->add_option("--top", top, "Rows in the candidate table")->capture_default_str();
  report->add_flag("--csv", csv, "Emit CSV instead of JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*init) return cmd_init(init_path);
    if (*simulate) return cmd_simulate(sim_config, seed, out_dir);
    if (*oracle) return cmd_oracle(oracle_config);
    if (*serve) return cmd_serve(port, data_dir_flag, serve_config, no_sync, snapshot_interval);
    if (*report) return cmd_report(report_dir, experiment, top, csv);
  } catch (const ConfigError& e) {
    for (const auto& msg : e.errors()) std::cerr << "error: " << msg << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
