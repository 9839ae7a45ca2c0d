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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <fmt/format.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ascend/allocator.hpp"
#include "ascend/codec.hpp"
#include "ascend/evolution.hpp"
#include "ascend/experiment.hpp"
#include "ascend/persistence.hpp"
#include "ascend/report.hpp"
#include "ascend/simulator.hpp"
#include "ascend/stats.hpp"
#include "httplib.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ascend {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / fmt::format("ascend-accept-{}-{}{}", tag, rd(), rd());
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1 -------------------------------------------------------------------------

// 4 elements x 3 values. Most of the lift sits in one two-element interaction;
// everything is scaled so control is 5% and the optimum 9%.
sim::SimulationScenario SmallOracleScenario(std::uint64_t seed) {
  EvolutionConfig evo;
  evo.population_size = 8;
  evo.maturity_age = 2000;
  evo.mutation_probability = 0.2;
  evo.max_generations = 5;
  evo.control_holdout_fraction = 0.1;
  const std::vector<std::uint32_t> counts{3, 3, 3, 3};
  ExperimentConfig config{"oracle-small", "oracle small", SearchSpace::FromCounts(counts), evo,
                          AllocationConfig{}, json::object()};
  config.document = canonical_document(config);

  auto model = sim::GroundTruthModel::Flat(config.space, 0.05);
  model.main_effects = {{0, 0.05, 0.15}, {0, 0.15, 0.03}, {0, 0.03, -0.10}, {0, -0.08, 0.02}};
  model.interactions.push_back({{{0, 2}, {1, 1}}, 0.30});
  const Genome planted{{2, 1, 1, 2}};
  const double raw = sim::logit(sim::true_rate(model, planted)) - model.base_logit;
  const double scale = (sim::logit(0.09) - model.base_logit) / raw;
  for (auto& row : model.main_effects) {
    for (auto& d : row) d *= scale;
  }
  for (auto& t : model.interactions) t.delta *= scale;

  sim::SimulationScenario s{std::move(config), std::move(model)};
  s.budget = 1'000'000;
  s.users_per_day = 10'000;
  s.seed = seed;
  return s;
}

Outcome OracleDiscovery() {
  const auto probe = SmallOracleScenario(0);
  const auto optimum = sim::brute_force_optimum(probe.model, probe.config.space);
  const double control = sim::true_rate(probe.model, probe.config.space.control());
  if (std::abs(control - 0.05) > 1e-9 || std::abs(optimum.rate - 0.09) > 1e-9) {
    return {false, fmt::format("fixture off target: control {:.5f} optimum {:.5f}", control,
                               optimum.rate)};
  }
  int hits = 0;
  double slowest = 0;
  std::string rates;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto t0 = Clock::now();
    const auto trace = sim::run_scenario(SmallOracleScenario(seed));
    slowest = std::max(slowest, Seconds(t0));
    const double found =
        trace.best_true_rate_by_generation.empty() ? 0.0 : trace.best_true_rate_by_generation.back();
    const bool ok = trace.generations.size() <= 5 && found >= 0.95 * optimum.rate;
    hits += ok;
    rates += fmt::format("{}{:.4f}", rates.empty() ? "" : " ", found);
  }
  return {hits >= 18 && slowest < 30.0,
          fmt::format("{}/20 runs reached 95% of optimum {:.4f}; slowest run {:.2f}s; final true "
                      "rates [{}]",
                      hits, optimum.rate, slowest, rates)};
}

// 2 -------------------------------------------------------------------------

Outcome CaseStudy() {
  int lifted = 0;
  int above_control = 0;
  double slowest = 0;
  std::string lines;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto scenario = sim::build_case_study_scenario();
    scenario.seed = seed;
    const auto t0 = Clock::now();
    const auto trace = sim::run_scenario(scenario);
    slowest = std::max(slowest, Seconds(t0));
    const auto report = build_report(trace.final_state);
    const double improvement =
        report["best"].is_null() || report["best"]["improvement_pct"].is_null()
            ? -100.0
            : report["best"]["improvement_pct"].get<double>();
    lifted += improvement >= 30.0;
    const auto& day = trace.daily.back();
    const bool mean_ok = day.population_mean_rate && day.control &&
                         *day.population_mean_rate >= day.control->rate;
    above_control += mean_ok;
    lines += fmt::format("{}{:+.1f}%", lines.empty() ? "" : " ", improvement);
  }
  return {lifted >= 8 && above_control == 10 && slowest < 300.0,
          fmt::format("{}/10 seeds >= +30% [{}]; final-day population mean >= control in {}/10; "
                      "slowest seed {:.1f}s",
                      lifted, lines, above_control, slowest)};
}

// 3 -------------------------------------------------------------------------

Outcome Initialization() {
  Rng rng = make_rng(2026, Stream::kModel, 3);
  std::vector<std::vector<std::uint32_t>> spaces = {
      {2}, {201}, {2, 2}, {9, 7, 7, 9, 4, 3, 2, 2, 2}, {100, 102}, {2, 2, 2, 2, 2, 2, 2, 2, 2, 2}};
  while (spaces.size() < 200) {
    const std::size_t elements = 1 + uniform_below(rng, 8);
    std::vector<std::uint32_t> counts;
    std::uint64_t neighbours = 0;
    double size = 1;
    for (std::size_t e = 0; e < elements; ++e) {
      const auto k = static_cast<std::uint32_t>(2 + uniform_below(rng, 30));
      counts.push_back(k);
      neighbours += k - 1;
      size *= k;
    }
    if (neighbours <= 200 && size <= 2e6) spaces.push_back(counts);
  }
  std::size_t checked = 0;
  for (const auto& counts : spaces) {
    const auto space = SearchSpace::FromCounts(counts);
    EvolutionConfig cfg;
    cfg.initial_population_cap = 201;
    Rng init = make_rng(checked + 1, Stream::kInitialize, 0);
    const auto population = initialize_population(space, cfg, init);

    std::set<Genome> expected;
    for_each_genome(space, [&](const Genome& g) {
      if (hamming_distance(g, space.control()) == 1) expected.insert(g);
    });
    if (population.empty() || population.front().genome != space.control() ||
        !population.front().is_control()) {
      return {false, fmt::format("space {}: first candidate is not Control", fmt::join(counts, "x"))};
    }
    std::set<Genome> got;
    for (std::size_t i = 1; i < population.size(); ++i) {
      if (!got.insert(population[i].genome).second) {
        return {false, fmt::format("space {}: duplicate neighbour", fmt::join(counts, "x"))};
      }
    }
    if (got != expected) {
      return {false, fmt::format("space {}: {} neighbours returned, {} expected",
                                 fmt::join(counts, "x"), got.size(), expected.size())};
    }
    ++checked;
  }
  return {true, fmt::format("{} spaces cross-checked against full enumeration", checked)};
}

// 4 -------------------------------------------------------------------------

struct IntervalFixture {
  std::uint64_t conversions, impressions;
  double wald_low, wald_high, wilson_low, wilson_high;
};

// Computed independently to ten decimals.
constexpr IntervalFixture kIntervals[] = {
    {0, 100, 0.0000000000, 0.0000000000, 0.0000000000, 0.0369934982},
    {100, 100, 1.0000000000, 1.0000000000, 0.9630065018, 1.0000000000},
    {0, 1, 0.0000000000, 0.0000000000, 0.0000000000, 0.7934506856},
    {1, 1, 1.0000000000, 1.0000000000, 0.2065493144, 1.0000000000},
    {1, 2, 0.0000000000, 1.0000000000, 0.0945312057, 0.9054687943},
    {112, 2000, 0.0459234212, 0.0660765788, 0.0467483339, 0.0669540040},
    {182, 3250, 0.0480952813, 0.0639047187, 0.0486067604, 0.0644416052},
    {262, 3250, 0.0712556402, 0.0899751291, 0.0717431946, 0.0904778188},
    {5, 10, 0.1901024838, 0.8098975162, 0.2365930905, 0.7634069095},
    {1, 1000, 0.0000000000, 0.0029589838, 0.0001765464, 0.0056425586},
    {999, 1000, 0.9970410162, 1.0000000000, 0.9943574414, 0.9998234536},
    {50, 1000, 0.0364918804, 0.0635081196, 0.0381302624, 0.0653138202},
    {3, 7, 0.0619721094, 0.7951707477, 0.1582198553, 0.7495416355},
    {7, 3000, 0.0006068254, 0.0040598413, 0.0011307321, 0.0048088153},
    {2000, 40000, 0.0478641788, 0.0521358212, 0.0479070565, 0.0521793681},
    {120, 1500, 0.0662709221, 0.0937290779, 0.0673194202, 0.0948263016},
    {33, 400, 0.0555382482, 0.1094617518, 0.0593458762, 0.1135968895},
    {0, 2000, 0.0000000000, 0.0000000000, 0.0000000000, 0.0019170473},
    {2000, 2000, 1.0000000000, 1.0000000000, 0.9980829527, 1.0000000000},
    {561, 10000, 0.0515898341, 0.0606101659, 0.0517579364, 0.0607829773},
};

Outcome Statistics() {
  constexpr double kTol = 1e-6;
  double worst = 0;
  for (const auto& f : kIntervals) {
    const auto wald = stats::estimate(f.conversions, f.impressions);
    const auto wilson =
        stats::estimate(f.conversions, f.impressions, 0.95, stats::IntervalMethod::kWilson);
    for (double d : {wald.ci_low - f.wald_low, wald.ci_high - f.wald_high,
                     wilson.ci_low - f.wilson_low, wilson.ci_high - f.wilson_high}) {
      worst = std::max(worst, std::abs(d));
    }
  }

  // A/B fixture: 6,500 interactions split evenly, +43.4% lift.
  const std::uint64_t c_ctrl = 182, c_var = 261, n = 3250;
  const double lift = stats::improvement_over_control(static_cast<double>(c_var) / n,
                                                      static_cast<double>(c_ctrl) / n);
  const auto test = stats::two_proportion_test(c_ctrl, n, c_var, n);

  Rng rng = make_rng(4, Stream::kModel, 0);
  std::binomial_distribution<std::uint64_t> binom(2000, 0.05);
  int covered = 0;
  for (int i = 0; i < 10'000; ++i) {
    const auto e = stats::estimate(binom(rng), 2000);
    covered += e.ci_low <= 0.05 && 0.05 <= e.ci_high;
  }
  const double coverage = covered / 10'000.0;
  const bool ok = worst <= kTol && std::abs(lift - 43.5) < 0.5 && test.significant_99 &&
                  coverage >= 0.93 && coverage <= 0.97;
  return {ok, fmt::format("{} interval fixtures, worst error {:.2e}; A/B lift {:.1f}% z={:.2f} "
                          "p={:.2e} significant_99={}; Wald coverage {:.4f}",
                          std::size(kIntervals), worst, lift, test.z_score,
                          test.p_value_two_sided, test.significant_99, coverage)};
}

// 5 -------------------------------------------------------------------------

struct ProcessResult {
  int code = -1;
  std::string output;
};

ProcessResult RunCli(const std::string& args) {
  ProcessResult r;
  const std::string cmd = fmt::format("'{}' {} 2>&1", ASCEND_CLI_PATH, args);
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// An `ascend serve` child process.
class Server {
 public:
  Server(fs::path data_dir, int port) : data_dir_(std::move(data_dir)), port_(port) {}
  ~Server() { kill_hard(); }
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  bool start() {
    const std::string port = std::to_string(port_);
    const std::string dir = data_dir_.string();
    pid_ = fork();
    if (pid_ == 0) {
      const std::string log = (data_dir_.parent_path() / "server.log").string();
      if (FILE* f = freopen(log.c_str(), "a", stdout)) (void)f;
      if (FILE* f = freopen(log.c_str(), "a", stderr)) (void)f;
      execl(ASCEND_CLI_PATH, "ascend", "serve", "--port", port.c_str(), "--data-dir", dir.c_str(),
            "--snapshot-interval", "40", static_cast<char*>(nullptr));
      _exit(127);
    }
    if (pid_ < 0) return false;
    httplib::Client probe("127.0.0.1", port_);
    probe.set_connection_timeout(0, 100'000);
    for (int i = 0; i < 200; ++i) {
      if (probe.Get("/experiments")) return true;
      int status = 0;
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return false;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return false;
  }

  void kill_hard() {
    if (pid_ <= 0) return;
    ::kill(pid_, SIGKILL);
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }

  pid_t pid() const { return pid_; }
  int port() const { return port_; }

 private:
  fs::path data_dir_;
  int port_;
  pid_t pid_ = -1;
};

constexpr const char* kServiceConfig = R"({
  "experiment_id": "recovery",
  "space": {"elements": [
    {"name": "headline", "values": ["h0", "h1", "h2"]},
    {"name": "button", "values": ["b0", "b1", "b2"]},
    {"name": "layout", "values": ["l0", "l1"]}]},
  "evolution": {"population_size": 3, "maturity_age": 60, "max_generations": 6,
                "rng_seed": 99}
})";

// Drives one experiment through a server. If `kill_at` is set, the server is
// SIGKILLed while that request is in flight and restarted; the request is
// retried with the same idempotency key.
std::optional<std::string> DriveService(const fs::path& root, int port,
                                        std::optional<std::size_t> kill_at,
                                        std::uint64_t kill_seed, std::string& error) {
  Server server(root / "data", port);
  if (!server.start()) {
    error = "server did not start";
    return std::nullopt;
  }
  auto client = std::make_unique<httplib::Client>("127.0.0.1", port);
  client->set_read_timeout(5, 0);

  std::size_t request = 0;
  bool killed = false;
  Rng jitter = make_rng(kill_seed, Stream::kModel, 1);

  auto post = [&](const std::string& path, const json& body,
                  const std::string& key) -> std::optional<json> {
    for (int attempt = 0; attempt < 5; ++attempt) {
      std::thread killer;
      if (kill_at && !killed && request == *kill_at) {
        killed = true;
        const auto delay = std::chrono::microseconds(uniform_below(jitter, 1500));
        const pid_t pid = server.pid();
        killer = std::thread([pid, delay] {
          std::this_thread::sleep_for(delay);
          ::kill(pid, SIGKILL);
        });
      }
      httplib::Headers headers;
      if (!key.empty()) headers.emplace("Idempotency-Key", key);
      auto res = client->Post(path, headers, body.dump(), "application/json");
      if (killer.joinable()) {
        killer.join();
        server.kill_hard();
        if (!server.start()) return std::nullopt;
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(5, 0);
        // The reply may have been lost either way; ask again with the same key.
        continue;
      }
      if (!res) continue;
      return json::parse(res->body.empty() ? std::string("{}") : res->body);
    }
    return std::nullopt;
  };

  auto created = post("/experiments", parse_document(kServiceConfig), "");
  if (!created) {
    error = "create failed";
    return std::nullopt;
  }
  if (!post("/experiments/recovery/start", json{{"timestamp", 0}}, "")) {
    error = "start failed";
    return std::nullopt;
  }
  for (std::size_t i = 0; i < 1500; ++i) {
    ++request;
    const std::int64_t t = static_cast<std::int64_t>(i) * 1000;
    // Every fifth visit is a returning user.
    const std::string user = fmt::format("u{}", i % 5 == 4 ? i - 3 : i);
    auto a = post("/experiments/recovery/assign", json{{"user_id", user}, {"timestamp", t}},
                  fmt::format("a{}", i));
    if (!a) {
      error = fmt::format("assign {} failed", i);
      return std::nullopt;
    }
    if (!a->contains("candidate_id")) break;  // stopped
    const auto cid = (*a)["candidate_id"].get<std::uint64_t>();
    Rng user_rng = make_rng(7, Stream::kUser, i);
    if (uniform01(user_rng) < 0.05 + 0.03 * static_cast<double>(cid % 3)) {
      ++request;
      if (!post("/experiments/recovery/convert", json{{"user_id", user}, {"timestamp", t + 1}},
                fmt::format("c{}", i))) {
        error = fmt::format("convert {} failed", i);
        return std::nullopt;
      }
    }
  }
  auto res = client->Get("/experiments/recovery/report");
  if (!res) {
    error = "report failed";
    return std::nullopt;
  }
  if (kill_at && !killed) {
    error = "kill point was never reached";
    return std::nullopt;
  }
  return res->body;
}

Outcome Determinism() {
  ScratchDir dir("det");
  const auto config = dir.path() / "exp.jsonc";
  if (RunCli("init " + config.string()).code != 0) return {false, "init failed"};
  for (const char* out : {"a", "b"}) {
    const auto r = RunCli(fmt::format("simulate --config {} --seed 1234 --out {}", config.string(),
                                      (dir.path() / out).string()));
    if (r.code != 0) return {false, "simulate failed: " + r.output};
  }
  bool same = true;
  for (const char* file : {"events.jsonl", "report.json"}) {
    const auto a = Slurp(dir.path() / "a" / file);
    same = same && !a.empty() && a == Slurp(dir.path() / "b" / file);
  }
  if (!same) return {false, "simulate outputs differ between identical runs"};

  const int base_port = 20000 + static_cast<int>(getpid() % 20000);
  std::string error;
  ScratchDir clean("clean");
  const auto expected = DriveService(clean.path(), base_port, std::nullopt, 0, error);
  if (!expected) return {false, "uninterrupted run: " + error};

  Rng pick = make_rng(static_cast<std::uint64_t>(std::random_device{}()), Stream::kModel, 5);
  std::string points;
  for (int trial = 0; trial < 3; ++trial) {
    const std::size_t kill_at = 1 + uniform_below(pick, 1000);
    ScratchDir crashed(fmt::format("crash{}", trial));
    const auto got =
        DriveService(crashed.path(), base_port + 1 + trial, kill_at, kill_at * 31 + trial, error);
    if (!got) return {false, fmt::format("kill at request {}: {}", kill_at, error)};
    if (*got != *expected) {
      return {false, fmt::format("report after kill at request {} differs from uninterrupted run",
                                 kill_at)};
    }
    points += fmt::format("{}{}", points.empty() ? "" : ",", kill_at);
  }
  return {true, fmt::format("simulate byte-identical; report identical after SIGKILL at requests "
                            "[{}]",
                            points)};
}

// 6 -------------------------------------------------------------------------

enum class OpKind { kAssign, kConvert, kAdvance };
struct Op {
  OpKind kind;
  std::uint32_t user;
  std::int64_t dt;
};

ExperimentConfig PropertyConfig(std::uint64_t seed) {
  EvolutionConfig evo;
  evo.population_size = 3;
  evo.maturity_age = 40;
  evo.max_generations = 12;
  evo.rng_seed = seed;
  evo.control_holdout_fraction = 0.1;
  AllocationConfig alloc;
  alloc.sticky_ttl_ms = 20'000;
  ExperimentConfig c{"props", "props", SearchSpace::FromCounts(std::vector<std::uint32_t>{3, 3, 2}),
                     evo, alloc, json::object()};
  c.document = canonical_document(c);
  return c;
}

// Runs `ops` and returns a description of the first violated property.
std::optional<std::string> CheckOps(const std::vector<Op>& ops, std::uint64_t seed) {
  std::vector<LogRecord> log;
  Experiment exp(PropertyConfig(seed), 0, [&](const LogRecord& r) { log.push_back(r); });
  exp.start(0);
  std::int64_t now = 0;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const Op& op = ops[i];
    now += op.dt;
    const std::string user = fmt::format("u{}", op.user);
    const auto& s = exp.state();
    if (op.kind == OpKind::kAssign) {
      if (s.status != ExperimentStatus::kRunning) continue;
      const auto* sticky = allocator::sticky_assignment(s, user, now);
      const std::optional<std::uint64_t> expect =
          sticky ? std::optional(sticky->candidate_id) : std::nullopt;
      const auto a = exp.assign(user, now);
      if (expect && (a.candidate_id != *expect || a.new_assignment)) {
        return fmt::format("op {}: sticky user {} moved from {} to {}", i, user, *expect,
                           a.candidate_id);
      }
      if (!expect && !a.new_assignment) return fmt::format("op {}: expired user not reassigned", i);
    } else if (op.kind == OpKind::kConvert) {
      exp.record_conversion(user, now);
    } else if (s.status == ExperimentStatus::kRunning) {
      try {
        exp.advance(now);
      } catch (const NotMature&) {
      }
    }

    const auto& st = exp.state();
    std::uint64_t imps = 0, convs = 0;
    std::uint64_t lo = UINT64_MAX, hi = 0;
    const std::uint64_t m = st.config->evolution.maturity_age;
    for (const auto& c : st.candidates) {
      if (c.conversions > c.impressions) {
        return fmt::format("op {}: candidate {} has {} conversions over {} impressions", i, c.id,
                           c.conversions, c.impressions);
      }
      imps += c.impressions;
      convs += c.conversions;
      if (c.is_active()) {
        lo = std::min(lo, std::min(c.generation_impressions, m));
        hi = std::max(hi, std::min(c.generation_impressions, m));
      }
    }
    std::uint64_t logged_imps = 0, logged_convs = 0;
    for (const auto& r : log) {
      logged_imps += r.kind == RecordKind::kAssignment || r.kind == RecordKind::kImpression;
      logged_convs += r.kind == RecordKind::kConversion && r.payload.value("attributed", false);
    }
    if (imps != st.total_impressions || imps != logged_imps) {
      return fmt::format("op {}: impressions not conserved ({} vs {} vs {} logged)", i, imps,
                         st.total_impressions, logged_imps);
    }
    if (convs != st.total_conversions || convs != logged_convs) {
      return fmt::format("op {}: conversions not conserved ({} vs {} vs {} logged)", i, convs,
                         st.total_conversions, logged_convs);
    }
    if (!st.evolution_complete && hi > lo + 1) {
      return fmt::format("op {}: least-filled spread {} exceeds 1", i, hi - lo);
    }
  }
  ExperimentState replayed;
  for (const auto& r : log) apply(replayed, r);
  if (to_json(replayed) != to_json(exp.state())) return std::string("log replay differs from live state");
  return std::nullopt;
}

// Smallest failing prefix, then greedy single-op removal.
std::vector<Op> Shrink(std::vector<Op> ops, std::uint64_t seed) {
  std::size_t lo = 1, hi = ops.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (CheckOps({ops.begin(), ops.begin() + mid}, seed)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  ops.resize(hi);
  for (std::size_t i = ops.size(); i-- > 0 && ops.size() > 1;) {
    auto trial = ops;
    trial.erase(trial.begin() + i);
    if (CheckOps(trial, seed)) ops = std::move(trial);
  }
  return ops;
}

Outcome AllocatorProperties() {
  constexpr int kEpisodes = 20;
  constexpr std::size_t kOpsPerEpisode = 5'000;
  std::size_t total = 0;
  for (int episode = 0; episode < kEpisodes; ++episode) {
    const std::uint64_t seed = 100 + episode;
    Rng rng = make_rng(seed, Stream::kModel, 6);
    std::vector<Op> ops;
    ops.reserve(kOpsPerEpisode);
    for (std::size_t i = 0; i < kOpsPerEpisode; ++i) {
      const double d = uniform01(rng);
      const OpKind kind = d < 0.70 ? OpKind::kAssign : d < 0.98 ? OpKind::kConvert : OpKind::kAdvance;
      ops.push_back({kind, static_cast<std::uint32_t>(uniform_below(rng, 400)),
                     static_cast<std::int64_t>(uniform_below(rng, 2000))});
    }
    total += ops.size();
    if (const auto failure = CheckOps(ops, seed)) {
      const auto small = Shrink(ops, seed);
      std::string trace;
      for (const auto& op : small) {
        trace += fmt::format(" {}(u{},+{})",
                             op.kind == OpKind::kAssign    ? "assign"
                             : op.kind == OpKind::kConvert ? "convert"
                                                           : "advance",
                             op.user, op.dt);
      }
      return {false, fmt::format("episode {}: {}; shrunk to {} ops:{}", episode, *failure,
                                 small.size(), trace)};
    }
  }
  return {true, fmt::format("{} randomized operations over {} episodes; stickiness, conservation, "
                            "conversions <= impressions, spread <= 1 and replay all held",
                            total, kEpisodes)};
}

// 7 -------------------------------------------------------------------------

Outcome SelectionDistribution() {
  const std::vector<std::vector<double>> fixtures = {
      {0.02, 0.06},
      {0.05, 0.05, 0.05, 0.05},
      {0.01, 0.02, 0.03, 0.04, 0.05},
      {0.056, 0.08, 0.07, 0.0, 0.061},
      {0.0561, 0.0822, 0.0650, 0.0712, 0.0599, 0.0755, 0.0690, 0.0480, 0.0801, 0.0632},
  };
  constexpr int kDraws = 100'000;
  double min_p = 1.0;
  std::string pvalues;
  for (std::size_t f = 0; f < fixtures.size(); ++f) {
    const auto& rates = fixtures[f];
    Rng rng = make_rng(7, Stream::kBreed, f);
    std::vector<int> counts(rates.size(), 0);
    for (int i = 0; i < kDraws; ++i) ++counts[select_parent(rates, rng)];
    double total = 0;
    for (double r : rates) total += r;
    double chi2 = 0;
    int cells = 0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      if (rates[i] == 0.0) {
        if (counts[i] != 0) return {false, fmt::format("fixture {}: zero-rate candidate drawn", f)};
        continue;
      }
      const double expected = kDraws * rates[i] / total;
      chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
      ++cells;
    }
    const boost::math::chi_squared dist(cells - 1);
    const double p = boost::math::cdf(boost::math::complement(dist, chi2));
    min_p = std::min(min_p, p);
    pvalues += fmt::format("{}{:.4f}", pvalues.empty() ? "" : " ", p);
  }
  return {min_p >= 0.001,
          fmt::format("{} fixtures x {} draws; chi-square p-values [{}] (alpha 0.001)",
                      fixtures.size(), kDraws, pvalues)};
}

// 8 -------------------------------------------------------------------------

Outcome NoiselessMonotonicity() {
  const std::vector<std::uint32_t> counts{4, 3, 3, 3, 2};
  int monotone = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    EvolutionConfig evo;
    evo.population_size = 4;
    evo.maturity_age = 100;
    evo.max_generations = 8;
    evo.rng_seed = seed;
    ExperimentConfig config{"mono", "mono", SearchSpace::FromCounts(counts), evo,
                            AllocationConfig{}, json::object()};
    config.document = canonical_document(config);
    Rng rng = make_rng(seed, Stream::kModel, 8);
    auto model = sim::GroundTruthModel::Flat(config.space, 0.03 + 0.04 * uniform01(rng));
    for (std::uint32_t e = 0; e < counts.size(); ++e) {
      for (std::uint32_t v = 1; v < counts[e]; ++v) {
        model.set_main_effect({e, v}, 0.6 * (uniform01(rng) - 0.5));
      }
    }
    const auto e1 = static_cast<std::uint32_t>(uniform_below(rng, 2));
    const auto e2 = static_cast<std::uint32_t>(2 + uniform_below(rng, 3));
    model.interactions.push_back({{{e1, 1}, {e2, 1}}, 0.5 * uniform01(rng)});

    sim::SimulationScenario scenario{std::move(config), std::move(model)};
    scenario.budget = 1'000'000;
    scenario.seed = seed;
    scenario.fitness = sim::FitnessMode::kOracle;
    const auto trace = sim::run_scenario(scenario);
    const auto& best = trace.best_true_rate_by_generation;
    const bool ok = !best.empty() && std::is_sorted(best.begin(), best.end());
    monotone += ok;
    if (!ok) detail += fmt::format(" seed {}: [{:.4f}]", seed, fmt::join(best, ", "));
  }
  return {monotone == 10, fmt::format("{}/10 planted models non-decreasing{}", monotone, detail)};
}

}  // namespace
}  // namespace ascend

int main() {
  using ascend::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle discovery on an 81-genome space", ascend::OracleDiscovery},
      {"case-study replication", ascend::CaseStudy},
      {"initialization is Control plus every neighbour", ascend::Initialization},
      {"statistics correctness", ascend::Statistics},
      {"determinism and crash recovery", ascend::Determinism},
      {"allocator properties", ascend::AllocatorProperties},
      {"fitness-proportionate selection distribution", ascend::SelectionDistribution},
      {"noiseless monotonicity", ascend::NoiselessMonotonicity},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = ascend::Clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += !outcome.pass;
    std::cout << fmt::format("[{}] {}. {}: {} ({:.1f}s)", outcome.pass ? "PASS" : "FAIL", i + 1,
                             criteria[i].first, outcome.detail, ascend::Seconds(t0))
              << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failures, criteria.size())
            << std::endl;
  return failures == 0 ? 0 : 1;
}
