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

#include "ascend/service.hpp"

#include <fmt/format.h>

#include <chrono>
#include <fstream>
#include <mutex>
#include <optional>
#include <regex>
#include <unordered_map>

#include "ascend/codec.hpp"
#include "ascend/report.hpp"
#include "httplib.h"

namespace ascend {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kIdempotencyField = "idempotency_key";

HttpResponse reply(int status, const json& body) { return {status, body.dump() + '\n'}; }

HttpResponse error(int status, const std::string& message) {
  return reply(status, json{{"error", message}});
}

bool valid_id(const std::string& id) {
  static const std::regex pattern("[A-Za-z0-9][A-Za-z0-9._-]{0,63}");
  return std::regex_match(id, pattern);
}

std::int64_t system_now() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::optional<std::string> query_param(std::string_view query, std::string_view name) {
  while (!query.empty()) {
    const auto amp = query.find('&');
    const std::string_view part = query.substr(0, amp);
    const auto eq = part.find('=');
    if (part.substr(0, eq) == name) {
      return eq == std::string_view::npos ? std::string() : std::string(part.substr(eq + 1));
    }
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }
  return std::nullopt;
}

json assign_body(const ExperimentState& state, std::uint64_t candidate_id,
                 std::int64_t sticky_until) {
  return json{{"candidate_id", candidate_id},
              {"design", design_of(state.config->space, state.candidates[candidate_id].genome)},
              {"sticky_until", sticky_until}};
}

json convert_body(bool attributed, std::optional<std::uint64_t> candidate_id) {
  json body{{"attributed", attributed}};
  if (candidate_id) body["candidate_id"] = *candidate_id;
  return body;
}

json summary(const ExperimentState& state) {
  return json{{"experiment_id", state.config->experiment_id},
              {"status", to_string(state.status)},
              {"space_size", state.config->space.size()}};
}

}  // namespace

struct ExperimentService::Entry {
  Entry(fs::path dir_in, persistence::EventLog log_in)
      : dir(std::move(dir_in)), log(std::move(log_in)) {}

  std::mutex mutex;
  fs::path dir;
  persistence::EventLog log;
  std::optional<Experiment> experiment;
  std::uint64_t snapshot_sequence = 0;
  std::unordered_map<std::string, HttpResponse> replies;

  RecordSink sink() {
    return [this](const LogRecord& record) { log.append(record); };
  }
};

ExperimentService::ExperimentService(ServiceOptions options) : options_(std::move(options)) {
  if (!options_.clock) options_.clock = system_now;
  fs::create_directories(options_.data_dir);
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(options_.data_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "events.jsonl")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    try {
      load(dir);
    } catch (const std::exception& e) {
      warnings_.push_back(fmt::format("{}: not loaded: {}", dir.string(), e.what()));
    }
  }
}

ExperimentService::~ExperimentService() = default;

void ExperimentService::load(const fs::path& dir) {
  // Opening the log first cuts any torn tail before replay reads it.
  auto log = persistence::EventLog::Open(dir / "events.jsonl", options_.sync);
  auto recovery = persistence::recover(dir);
  for (auto& w : recovery.warnings) warnings_.push_back(dir.string() + ": " + w);
  auto& replayed = recovery.replay;
  if (replayed.error) {
    throw persistence::StorageError(
        fmt::format("replay stopped at line {}: {}", replayed.error_line, *replayed.error));
  }
  if (replayed.state.last_sequence != log.last_sequence()) {
    throw persistence::StorageError("log and replayed state disagree on the last sequence");
  }

  auto entry = std::make_shared<Entry>(dir, std::move(log));
  entry->snapshot_sequence = recovery.snapshot_sequence.value_or(0);

  // Rebuild the idempotency cache from the keys recorded in payloads.
  std::ifstream in(dir / "events.jsonl");
  std::string line;
  const ExperimentState& state = replayed.state;
  while (std::getline(in, line)) {
    LogRecord record;
    try {
      record = record_from_json(json::parse(line));
    } catch (const std::exception&) {
      break;
    }
    const auto& p = record.payload;
    if (!p.contains(kIdempotencyField)) continue;
    const auto key = p[kIdempotencyField].get<std::string>();
    if (record.kind == RecordKind::kAssignment) {
      entry->replies[key] = reply(200, assign_body(state, p["candidate_id"].get<std::uint64_t>(),
                                                   p["expires_at"].get<std::int64_t>()));
    } else if (record.kind == RecordKind::kImpression) {
      const auto user = p["user_id"].get<std::string>();
      const auto it = state.assignments.find(user);
      const std::int64_t until = it == state.assignments.end() ? 0 : it->second.expires_at;
      entry->replies[key] =
          reply(200, assign_body(state, p["candidate_id"].get<std::uint64_t>(), until));
    } else if (record.kind == RecordKind::kConversion) {
      std::optional<std::uint64_t> id;
      if (!p["candidate_id"].is_null()) id = p["candidate_id"].get<std::uint64_t>();
      entry->replies[key] = reply(200, convert_body(p["attributed"].get<bool>(), id));
    }
  }

  entry->experiment.emplace(std::move(replayed.state), entry->sink());
  const std::string id = entry->experiment->config().experiment_id;
  std::unique_lock lock(registry_mutex_);
  experiments_[id] = std::move(entry);
}

std::shared_ptr<ExperimentService::Entry> ExperimentService::find(const std::string& id) const {
  std::shared_lock lock(registry_mutex_);
  const auto it = experiments_.find(id);
  return it == experiments_.end() ? nullptr : it->second;
}

std::int64_t ExperimentService::now_from(const json& body) const {
  if (body.is_object() && body.contains("timestamp") && body["timestamp"].is_number_integer()) {
    return body["timestamp"].get<std::int64_t>();
  }
  return options_.clock();
}

HttpResponse ExperimentService::handle(std::string_view method, std::string_view target,
                                       std::string_view body, std::string_view idempotency_key) {
  std::string_view path = target;
  std::string_view query;
  if (const auto q = target.find('?'); q != std::string_view::npos) {
    path = target.substr(0, q);
    query = target.substr(q + 1);
  }
  while (path.size() > 1 && path.back() == '/') path.remove_suffix(1);

  constexpr std::string_view kRoot = "/experiments";
  if (path.substr(0, kRoot.size()) != kRoot) return error(404, "no such route");
  path.remove_prefix(kRoot.size());
  try {
    if (path.empty()) {
      if (method == "GET") return list();
      if (method == "POST") return create(body);
      return error(405, "method not allowed");
    }
    if (path.front() != '/') return error(404, "no such route");
    path.remove_prefix(1);
    const auto slash = path.find('/');
    const std::string id(path.substr(0, slash));
    const std::string_view action =
        slash == std::string_view::npos ? std::string_view() : path.substr(slash + 1);
    auto entry = find(id);
    if (!entry) return error(404, fmt::format("unknown experiment {}", id));
    std::lock_guard lock(entry->mutex);
    return route(*entry, method, action, query, body, idempotency_key);
  } catch (const json::exception& e) {
    return error(400, fmt::format("malformed request: {}", e.what()));
  } catch (const persistence::StorageError& e) {
    return error(500, e.what());
  }
}

HttpResponse ExperimentService::list() const {
  json out = json::array();
  std::shared_lock lock(registry_mutex_);
  for (const auto& [id, entry] : experiments_) {
    std::lock_guard entry_lock(entry->mutex);
    out.push_back(summary(entry->experiment->state()));
  }
  return reply(200, out);
}

HttpResponse ExperimentService::create(std::string_view body) {
  json doc;
  try {
    doc = parse_document(std::string(body));
  } catch (const std::exception& e) {
    return reply(400, json{{"errors", json::array({std::string(e.what())})}});
  }
  std::optional<ExperimentConfig> parsed;
  try {
    parsed.emplace(parse_experiment_config(doc));
  } catch (const ConfigError& e) {
    return reply(400, json{{"errors", e.errors()}});
  }
  ExperimentConfig& config = *parsed;

  std::unique_lock lock(registry_mutex_);
  if (config.experiment_id.empty()) {
    std::size_t n = experiments_.size() + 1;
    while (experiments_.count(fmt::format("exp-{}", n)) > 0) ++n;
    config.experiment_id = fmt::format("exp-{}", n);
  }
  if (!valid_id(config.experiment_id)) {
    return reply(400, json{{"errors", json::array({"experiment_id: must match "
                                                   "[A-Za-z0-9][A-Za-z0-9._-]{0,63}"})}});
  }
  if (experiments_.count(config.experiment_id) > 0 ||
      fs::exists(options_.data_dir / config.experiment_id / "events.jsonl")) {
    return error(409, fmt::format("experiment {} already exists", config.experiment_id));
  }
  config.document = canonical_document(config);

  const fs::path dir = options_.data_dir / config.experiment_id;
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    out << config.document.dump(2) << '\n';
  }
  auto entry = std::make_shared<Entry>(
      dir, persistence::EventLog::Open(dir / "events.jsonl", options_.sync));
  entry->experiment.emplace(config, now_from(doc), entry->sink());
  const json out = summary(entry->experiment->state());
  experiments_[config.experiment_id] = std::move(entry);
  return reply(201, out);
}

HttpResponse ExperimentService::route(Entry& entry, std::string_view method,
                                      std::string_view action, std::string_view query,
                                      std::string_view body_text, std::string_view key) {
  Experiment& exp = *entry.experiment;
  const json body = body_text.empty() ? json::object() : json::parse(body_text);
  const std::string idem(key);
  if (!idem.empty()) {
    if (const auto it = entry.replies.find(idem); it != entry.replies.end()) return it->second;
  }
  json extra = json::object();
  if (!idem.empty()) extra[kIdempotencyField] = idem;

  auto finish = [&](HttpResponse r) {
    if (exp.state().last_sequence >= entry.snapshot_sequence + options_.snapshot_interval) {
      persistence::write_snapshot(entry.dir, exp.state());
      entry.snapshot_sequence = exp.state().last_sequence;
    }
    if (!idem.empty() && r.status < 300) entry.replies[idem] = r;
    return r;
  };

  try {
    if (action.empty()) {
      if (method != "GET") return error(405, "method not allowed");
      const auto& s = exp.state();
      json out = summary(s);
      out["config"] = s.config->document;
      out["created_at"] = s.created_at;
      out["generation"] = s.generation;
      out["evolution_complete"] = s.evolution_complete;
      out["stop_reason"] = s.stop_reason.empty() ? json(nullptr) : json(s.stop_reason);
      out["last_sequence"] = s.last_sequence;
      return reply(200, out);
    }
    if (action == "report") {
      if (method != "GET") return error(405, "method not allowed");
      std::size_t top = kDefaultTopK;
      if (auto t = query_param(query, "top")) {
        try {
          top = std::stoul(*t);
        } catch (const std::exception&) {
          return error(400, "top: must be a non-negative integer");
        }
      }
      return {200, render_report(exp.state(), top)};
    }
    if (method != "POST") return error(405, "method not allowed");

    if (action == "start") {
      exp.start(now_from(body));
      json out = summary(exp.state());
      out["population"] = exp.state().candidates.size();
      return finish(reply(200, out));
    }
    if (action == "assign") {
      if (!body.contains("user_id") || !body["user_id"].is_string() ||
          body["user_id"].get<std::string>().empty()) {
        return error(400, "user_id: required non-empty string");
      }
      const auto result = exp.assign(body["user_id"].get<std::string>(), now_from(body), extra);
      return finish(reply(200, assign_body(exp.state(), result.candidate_id, result.sticky_until)));
    }
    if (action == "convert") {
      if (!body.contains("user_id") || !body["user_id"].is_string()) {
        return error(400, "user_id: required string");
      }
      const auto result =
          exp.record_conversion(body["user_id"].get<std::string>(), now_from(body), extra);
      return finish(reply(200, convert_body(result.attributed, result.candidate_id)));
    }
    if (action == "advance") {
      try {
        const auto report = exp.advance(now_from(body));
        json out = summary(exp.state());
        out["generation"] = exp.state().generation;
        out["report"] = to_json(report);
        return finish(reply(200, out));
      } catch (const NotMature& e) {
        json remaining = json::array();
        for (const auto& r : e.shortfall()) {
          remaining.push_back({{"candidate_id", r.candidate_id}, {"remaining", r.remaining}});
        }
        return reply(409, json{{"error", e.what()}, {"remaining", std::move(remaining)}});
      }
    }
    if (action == "stop") {
      exp.stop(now_from(body), body.value("reason", std::string("operator")));
      json out = summary(exp.state());
      out["stop_reason"] = exp.state().stop_reason;
      return finish(reply(200, out));
    }
    return error(404, "no such route");
  } catch (const NotRunning& e) {
    return error(409, e.what());
  } catch (const ValidationError& e) {
    return error(400, e.what());
  }
}

void ExperimentService::mount(httplib::Server& server) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::string target = req.path;
    if (!req.params.empty()) {
      target += '?';
      bool first = true;
      for (const auto& [k, v] : req.params) {
        if (!first) target += '&';
        target += k + '=' + v;
        first = false;
      }
    }
    const auto r = handle(req.method, target, req.body, req.get_header_value("Idempotency-Key"));
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get(R"(/experiments.*)", handler);
  server.Post(R"(/experiments.*)", handler);
}

}  // namespace ascend
