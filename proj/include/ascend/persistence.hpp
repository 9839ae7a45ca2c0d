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

// Append-only JSONL event log, replay, and checksummed snapshots.
//
// Layout under a data directory:
//   <data_dir>/<experiment_id>/events.jsonl
//   <data_dir>/<experiment_id>/snapshots/<seq>.json
//   <data_dir>/<experiment_id>/config.json

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ascend/experiment.hpp"

namespace ascend::persistence {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kDefaultSnapshotInterval = 10'000;

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One JSON document per line.
std::string encode_line(const LogRecord& record);

/// Single-appender log file. Opening an existing log scans it, and cuts off a
/// torn final line left by a crash mid-write.
class EventLog {
 public:
  /// `sync` forces fdatasync after every append.
  static EventLog Open(const fs::path& path, bool sync = true);

  EventLog(EventLog&& other) noexcept;
  EventLog& operator=(EventLog&& other) noexcept;
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;
  ~EventLog();

  /// Requires record.sequence == last_sequence() + 1. The record is written
  /// (and synced, if requested) before this returns.
  std::uint64_t append(const LogRecord& record);

  std::uint64_t last_sequence() const { return last_sequence_; }
  const fs::path& path() const { return path_; }

 private:
  EventLog(fs::path path, int fd, std::uint64_t last_sequence, bool sync);

  fs::path path_;
  int fd_ = -1;
  std::uint64_t last_sequence_ = 0;
  bool sync_ = true;
};

struct ReplayResult {
  ExperimentState state;
  std::uint64_t applied = 0;
  /// Set when replay stopped early at a corrupt or inconsistent record.
  std::optional<std::string> error;
  std::uint64_t error_line = 0;
};

/// Folds log lines into `start` (empty by default). Records at or below
/// start.last_sequence are skipped, so a snapshot state can be followed by
/// the whole log. Stops after `up_to` when given. An empty log (nothing
/// applied and no experiment) is reported as an error.
ReplayResult replay(std::istream& lines, std::optional<std::uint64_t> up_to = std::nullopt,
                    ExperimentState start = {});

ReplayResult replay_file(const fs::path& path, std::optional<std::uint64_t> up_to = std::nullopt,
                         ExperimentState start = {});

ReplayResult replay_records(const std::vector<LogRecord>& records, ExperimentState start = {});

/// CRC-32 of the canonical JSON form of the state.
std::uint32_t state_checksum(const ExperimentState& state);

nlohmann::json snapshot(const ExperimentState& state);

/// Throws StorageError if the checksum does not match.
ExperimentState restore(const nlohmann::json& snapshot_doc);

/// restore(snapshot) followed by the records after it. Throws StorageError if
/// the snapshot is newer than the tail's end.
ExperimentState restore(const nlohmann::json& snapshot_doc, const std::vector<LogRecord>& tail);

/// Writes snapshots/<seq>.json atomically (temp file + rename).
fs::path write_snapshot(const fs::path& experiment_dir, const ExperimentState& state);

struct Recovery {
  ReplayResult replay;
  std::optional<std::uint64_t> snapshot_sequence;  // snapshot used, if any
  std::vector<std::string> warnings;
};

/// Rebuilds an experiment from its directory: newest valid snapshot not
/// newer than the log head, then the log tail. Corrupt snapshots are skipped
/// in favour of older ones or a full replay.
Recovery recover(const fs::path& experiment_dir);

}  // namespace ascend::persistence
