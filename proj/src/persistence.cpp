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

#include "ascend/persistence.hpp"

#include <fcntl.h>
#include <fmt/format.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ascend/codec.hpp"

namespace ascend::persistence {

using nlohmann::json;

namespace {

std::string errno_message(std::string_view what, const fs::path& path) {
  return fmt::format("{} {}: {}", what, path.string(), std::strerror(errno));
}

void write_all(int fd, const std::string& data, const fs::path& path) {
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StorageError(errno_message("write", path));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

std::optional<LogRecord> parse_line(const std::string& line) {
  try {
    return record_from_json(json::parse(line));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::uint32_t crc_of(const std::string& text) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size())));
}

}  // namespace

std::string encode_line(const LogRecord& record) { return to_json(record).dump() + '\n'; }

EventLog::EventLog(fs::path path, int fd, std::uint64_t last_sequence, bool sync)
    : path_(std::move(path)), fd_(fd), last_sequence_(last_sequence), sync_(sync) {}

EventLog::EventLog(EventLog&& other) noexcept
    : path_(std::move(other.path_)),
      fd_(std::exchange(other.fd_, -1)),
      last_sequence_(other.last_sequence_),
      sync_(other.sync_) {}

EventLog& EventLog::operator=(EventLog&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    path_ = std::move(other.path_);
    fd_ = std::exchange(other.fd_, -1);
    last_sequence_ = other.last_sequence_;
    sync_ = other.sync_;
  }
  return *this;
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

EventLog EventLog::Open(const fs::path& path, bool sync) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::uint64_t last = 0;
  std::uint64_t valid_bytes = 0;
  {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::uint64_t offset = 0;
    while (in.good()) {
      const auto start = in.tellg();
      if (!std::getline(in, line)) break;
      const bool complete = !in.eof();
      offset = static_cast<std::uint64_t>(start) + line.size() + (complete ? 1 : 0);
      auto record = complete ? parse_line(line) : std::nullopt;
      if (!record || record->sequence != last + 1) break;
      last = record->sequence;
      valid_bytes = offset;
    }
  }
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw StorageError(errno_message("open", path));
  if (fs::file_size(path) != valid_bytes && ::ftruncate(fd, static_cast<off_t>(valid_bytes)) != 0) {
    ::close(fd);
    throw StorageError(errno_message("truncate", path));
  }
  return EventLog(path, fd, last, sync);
}

std::uint64_t EventLog::append(const LogRecord& record) {
  if (record.sequence != last_sequence_ + 1) {
    throw StorageError(fmt::format("sequence gap: log head is {}, record is {}", last_sequence_,
                                   record.sequence));
  }
  write_all(fd_, encode_line(record), path_);
  if (sync_ && ::fdatasync(fd_) != 0) throw StorageError(errno_message("fdatasync", path_));
  last_sequence_ = record.sequence;
  return last_sequence_;
}

ReplayResult replay(std::istream& lines, std::optional<std::uint64_t> up_to,
                    ExperimentState start) {
  ReplayResult result;
  result.state = std::move(start);
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto record = parse_line(line);
    if (!record) {
      result.error = fmt::format("line {}: corrupt or truncated record", line_no);
      result.error_line = line_no;
      break;
    }
    if (record->sequence <= result.state.last_sequence) continue;
    if (up_to && record->sequence > *up_to) break;
    try {
      apply(result.state, *record);
      ++result.applied;
    } catch (const std::exception& e) {
      result.error = fmt::format("line {}: {}", line_no, e.what());
      result.error_line = line_no;
      break;
    }
  }
  if (!result.state.config && !result.error) {
    result.error = "log has no experiment_created record";
  }
  return result;
}

ReplayResult replay_file(const fs::path& path, std::optional<std::uint64_t> up_to,
                         ExperimentState start) {
  std::ifstream in(path);
  if (!in) throw StorageError(errno_message("open", path));
  return replay(in, up_to, std::move(start));
}

ReplayResult replay_records(const std::vector<LogRecord>& records, ExperimentState start) {
  ReplayResult result;
  result.state = std::move(start);
  for (const auto& record : records) {
    if (record.sequence <= result.state.last_sequence) continue;
    try {
      apply(result.state, record);
      ++result.applied;
    } catch (const std::exception& e) {
      result.error = fmt::format("record {}: {}", record.sequence, e.what());
      break;
    }
  }
  if (!result.state.config && !result.error) {
    result.error = "log has no experiment_created record";
  }
  return result;
}

std::uint32_t state_checksum(const ExperimentState& state) {
  return crc_of(to_json(state).dump());
}

json snapshot(const ExperimentState& state) {
  json doc = to_json(state);
  const std::uint32_t crc = crc_of(doc.dump());
  return json{{"schema_version", kSchemaVersion},
              {"sequence", state.last_sequence},
              {"checksum", crc},
              {"state", std::move(doc)}};
}

ExperimentState restore(const json& snapshot_doc) {
  try {
    const auto& state_doc = snapshot_doc.at("state");
    if (crc_of(state_doc.dump()) != snapshot_doc.at("checksum").get<std::uint32_t>()) {
      throw StorageError("snapshot checksum mismatch");
    }
    ExperimentState state = state_from_json(state_doc);
    if (state.last_sequence != snapshot_doc.at("sequence").get<std::uint64_t>()) {
      throw StorageError("snapshot sequence does not match its state");
    }
    return state;
  } catch (const StorageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StorageError(fmt::format("unreadable snapshot: {}", e.what()));
  }
}

ExperimentState restore(const json& snapshot_doc, const std::vector<LogRecord>& tail) {
  ExperimentState state = restore(snapshot_doc);
  const std::uint64_t head = tail.empty() ? state.last_sequence : tail.back().sequence;
  if (state.last_sequence > head) {
    throw StorageError(fmt::format("snapshot at {} is newer than the log head {}",
                                   state.last_sequence, head));
  }
  auto result = replay_records(tail, std::move(state));
  if (result.error) throw StorageError(*result.error);
  return std::move(result.state);
}

fs::path write_snapshot(const fs::path& experiment_dir, const ExperimentState& state) {
  const fs::path dir = experiment_dir / "snapshots";
  fs::create_directories(dir);
  const fs::path target = dir / fmt::format("{}.json", state.last_sequence);
  const fs::path temp = dir / fmt::format(".{}.json.tmp", state.last_sequence);
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    out << snapshot(state).dump() << '\n';
    out.flush();
    if (!out) throw StorageError(errno_message("write", temp));
  }
  fs::rename(temp, target);
  return target;
}

Recovery recover(const fs::path& experiment_dir) {
  Recovery recovery;
  const fs::path log_path = experiment_dir / "events.jsonl";

  std::vector<std::pair<std::uint64_t, fs::path>> snapshots;
  const fs::path snap_dir = experiment_dir / "snapshots";
  if (fs::is_directory(snap_dir)) {
    for (const auto& entry : fs::directory_iterator(snap_dir)) {
      const auto stem = entry.path().stem().string();
      if (entry.path().extension() != ".json" || stem.empty() ||
          !std::all_of(stem.begin(), stem.end(), ::isdigit)) {
        continue;
      }
      snapshots.emplace_back(std::stoull(stem), entry.path());
    }
  }
  std::sort(snapshots.rbegin(), snapshots.rend());

  // Log head, without applying anything.
  std::uint64_t head = 0;
  {
    std::ifstream in(log_path);
    std::string line;
    while (std::getline(in, line)) {
      auto record = parse_line(line);
      if (!record || record->sequence != head + 1) break;
      head = record->sequence;
    }
  }

  for (const auto& [seq, path] : snapshots) {
    if (seq > head) {
      recovery.warnings.push_back(
          fmt::format("snapshot {} is newer than the log head {}; ignored", seq, head));
      continue;
    }
    try {
      std::ifstream in(path);
      ExperimentState state = restore(json::parse(in));
      recovery.replay = replay_file(log_path, std::nullopt, std::move(state));
      recovery.snapshot_sequence = seq;
      return recovery;
    } catch (const std::exception& e) {
      recovery.warnings.push_back(fmt::format("snapshot {} unusable: {}", seq, e.what()));
    }
  }
  recovery.replay = replay_file(log_path);
  return recovery;
}

}  // namespace ascend::persistence
