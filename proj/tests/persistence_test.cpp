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

#include <gtest/gtest.h>

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "test_support.hpp"

namespace ascend::persistence {
namespace {

using testing::MakeConfig;
using testing::Recorded;
using testing::TempDir;

EvolutionConfig Evo() {
  EvolutionConfig evo;
  evo.population_size = 3;
  evo.maturity_age = 25;
  evo.max_generations = 3;
  return evo;
}

void Drive(Experiment& exp, int from, int to) {
  for (int i = from; i < to && exp.state().status == ExperimentStatus::kRunning; ++i) {
    const auto u = fmt::format("u{}", i);
    const auto a = exp.assign(u, i);
    if ((i * 7 + a.candidate_id) % 11 == 0) exp.record_conversion(u, i);
  }
}

std::string ReadAll(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(EventLog, AppendsInOrderAndRejectsGaps) {
  TempDir dir;
  auto log = EventLog::Open(dir.path() / "x" / "events.jsonl", false);
  Recorded r(MakeConfig({3, 3}, Evo()));
  EXPECT_EQ(log.append(r.log[0]), 1u);
  LogRecord gap = r.log[0];
  gap.sequence = 3;
  EXPECT_THROW(log.append(gap), StorageError);
  EXPECT_THROW(log.append(r.log[0]), StorageError);
  EXPECT_EQ(log.last_sequence(), 1u);
}

TEST(EventLog, ReopenCutsTornTail) {
  TempDir dir;
  const auto path = dir.path() / "events.jsonl";
  Recorded r(MakeConfig({3, 3}, Evo()));
  r.experiment.start(0);
  Drive(r.experiment, 0, 10);
  {
    auto log = EventLog::Open(path, false);
    for (const auto& rec : r.log) log.append(rec);
  }
  const auto intact = ReadAll(path);
  {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << R"({"schema_version":1,"seq":)";
  }
  auto log = EventLog::Open(path, false);
  EXPECT_EQ(log.last_sequence(), r.log.size());
  EXPECT_EQ(ReadAll(path), intact);
}

TEST(Replay, EmptyLogIsAnError) {
  std::istringstream empty;
  const auto result = replay(empty);
  ASSERT_TRUE(result.error);
  EXPECT_NE(result.error->find("experiment_created"), std::string::npos);
}

TEST(Replay, StopsAtCorruptRecord) {
  Recorded r(MakeConfig({3, 3}, Evo()));
  r.experiment.start(0);
  Drive(r.experiment, 0, 20);
  std::string text;
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    text += i == 5 ? std::string("{not json\n") : encode_line(r.log[i]);
  }
  std::istringstream in(text);
  const auto result = replay(in);
  ASSERT_TRUE(result.error);
  EXPECT_EQ(result.error_line, 6u);
  EXPECT_EQ(result.applied, 5u);
  EXPECT_EQ(result.state.last_sequence, 5u);
}

TEST(Replay, UpToAndDeterminism) {
  Recorded r(MakeConfig({3, 3, 2}, Evo()));
  r.experiment.start(0);
  Drive(r.experiment, 0, 500);
  std::string text;
  for (const auto& rec : r.log) text += encode_line(rec);
  std::istringstream a(text), b(text), c(text);
  const auto full = replay(a);
  const auto again = replay(b);
  ASSERT_FALSE(full.error);
  EXPECT_EQ(state_checksum(full.state), state_checksum(r.experiment.state()));
  EXPECT_EQ(state_checksum(full.state), state_checksum(again.state));
  const auto part = replay(c, 40);
  EXPECT_EQ(part.state.last_sequence, 40u);
}

TEST(Snapshot, RestorePlusTailEqualsFullReplayAtEveryCut) {
  Recorded r(MakeConfig({3, 3, 2}, Evo()));
  r.experiment.start(0);
  Drive(r.experiment, 0, 400);
  const auto full = replay_records(r.log);
  ASSERT_FALSE(full.error);
  Rng rng = make_rng(3, Stream::kModel, 0);
  for (int k = 0; k < 25; ++k) {
    const std::size_t cut = 1 + uniform_below(rng, r.log.size());
    const std::vector<LogRecord> prefix(r.log.begin(), r.log.begin() + cut);
    const std::vector<LogRecord> tail(r.log.begin() + cut, r.log.end());
    const auto snap = snapshot(replay_records(prefix).state);
    const auto restored = restore(snap, tail);
    EXPECT_EQ(to_json(restored), to_json(full.state)) << "cut " << cut;
  }
}

TEST(Snapshot, EmptyTailAndMidGenerationCounters) {
  AllocationConfig manual;
  manual.auto_advance = false;
  Recorded r(MakeConfig({3, 3}, Evo(), manual));
  r.experiment.start(0);
  Drive(r.experiment, 0, 30);
  const auto snap = snapshot(r.experiment.state());
  const auto restored = restore(snap, {});
  EXPECT_EQ(restored.last_sequence, r.experiment.state().last_sequence);
  EXPECT_EQ(allocator::maturity_status(restored), allocator::maturity_status(r.experiment.state()));
}

TEST(Snapshot, RejectsNewerThanTailAndBadChecksum) {
  Recorded r(MakeConfig({3, 3}, Evo()));
  r.experiment.start(0);
  Drive(r.experiment, 0, 30);
  const auto snap = snapshot(r.experiment.state());
  const std::vector<LogRecord> short_tail(r.log.begin(), r.log.begin() + 3);
  EXPECT_THROW(restore(snap, short_tail), StorageError);
  auto bad = snap;
  bad["state"]["total_impressions"] = 12345;
  EXPECT_THROW(restore(bad), StorageError);
}

TEST(Recover, FallsBackPastCorruptSnapshot) {
  TempDir dir;
  Recorded r(MakeConfig({3, 3}, Evo()));
  r.experiment.start(0);
  Drive(r.experiment, 0, 60);
  {
    auto log = EventLog::Open(dir.path() / "events.jsonl", false);
    for (const auto& rec : r.log) log.append(rec);
  }
  const auto early = replay_records({r.log.begin(), r.log.begin() + 10}).state;
  write_snapshot(dir.path(), early);
  const auto late_path = write_snapshot(dir.path(), r.experiment.state());

  auto rec = recover(dir.path());
  EXPECT_EQ(rec.snapshot_sequence, r.experiment.state().last_sequence);
  EXPECT_EQ(to_json(rec.replay.state), to_json(r.experiment.state()));

  {
    std::ofstream out(late_path, std::ios::trunc);
    out << "{\"garbage\": true}";
  }
  rec = recover(dir.path());
  EXPECT_EQ(rec.snapshot_sequence, 10u);
  EXPECT_FALSE(rec.warnings.empty());
  EXPECT_EQ(to_json(rec.replay.state), to_json(r.experiment.state()));

  fs::remove_all(dir.path() / "snapshots");
  fs::create_directories(dir.path() / "snapshots");
  write_snapshot(dir.path(), early);
  {
    std::ofstream out(dir.path() / "snapshots" / "10.json", std::ios::trunc);
    out << "corrupt";
  }
  rec = recover(dir.path());
  EXPECT_FALSE(rec.snapshot_sequence);
  EXPECT_EQ(to_json(rec.replay.state), to_json(r.experiment.state()));
}

}  // namespace
}  // namespace ascend::persistence
