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

#pragma once

// JSON-over-HTTP front end. Routing lives in handle() so tests can drive the
// service without sockets; mount() binds it to an httplib server.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "ascend/persistence.hpp"

namespace httplib {
class Server;
}

namespace ascend {

struct ServiceOptions {
  std::filesystem::path data_dir = "data";
  bool sync = true;
  std::uint64_t snapshot_interval = persistence::kDefaultSnapshotInterval;
  /// Milliseconds since the epoch; used when a request carries no timestamp.
  std::function<std::int64_t()> clock;
};

struct HttpResponse {
  int status = 200;
  std::string body;
};

class ExperimentService {
 public:
  /// Recovers every experiment found under options.data_dir.
  explicit ExperimentService(ServiceOptions options);
  ~ExperimentService();

  ExperimentService(const ExperimentService&) = delete;
  ExperimentService& operator=(const ExperimentService&) = delete;

  /// `target` is the request path with an optional query string.
  HttpResponse handle(std::string_view method, std::string_view target, std::string_view body,
                      std::string_view idempotency_key = {});

  void mount(httplib::Server& server);

  /// Problems met while recovering, one line each.
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  struct Entry;

  HttpResponse create(std::string_view body);
  HttpResponse list() const;
  HttpResponse route(Entry& entry, std::string_view method, std::string_view action,
                     std::string_view query, std::string_view body, std::string_view key);
  std::shared_ptr<Entry> find(const std::string& id) const;
  std::int64_t now_from(const nlohmann::json& body) const;
  void load(const std::filesystem::path& dir);

  ServiceOptions options_;
  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> experiments_;
  std::vector<std::string> warnings_;
};

}  // namespace ascend
