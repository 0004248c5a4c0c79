#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>

#include "frwkv/errors.hpp"
#include "frwkv/harness.hpp"
#include "harness_fixture.hpp"

using namespace frwkv;
using namespace frwkv::harness;
namespace fs = std::filesystem;

namespace {

class StoreDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("frwkv_harness_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string store_path() const { return (dir_ / "records.jsonl").string(); }
  fs::path dir_;
};

GridSpec small_grid() {
  GridSpec g;
  g.settings = {{"synth", 12}};
  g.variants = {"CrossBranchGate", "FRWKVPlus"};
  g.seeds = {2024, 2025};
  return g;
}

CellRunner counting_runner(std::atomic<int>& calls) {
  return [&calls](const Cell& c) {
    ++calls;
    RunRecord r;
    r.mse = 0.1 * static_cast<double>(c.seed - 2020);
    r.mae = 0.2;
    return r;
  };
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

}  // namespace

TEST_F(StoreDir, GridRunsEveryCellOnce) {
  RecordStore store(store_path());
  std::atomic<int> calls{0};
  const auto stats = run_grid(small_grid(), store, counting_runner(calls));
  EXPECT_EQ(stats.planned, 4u);
  EXPECT_EQ(stats.executed, 4u);
  EXPECT_EQ(calls, 4);
  EXPECT_EQ(store.load().size(), 4u);
}

TEST_F(StoreDir, RerunResumesWithoutTraining) {
  RecordStore store(store_path());
  std::atomic<int> calls{0};
  run_grid(small_grid(), store, counting_runner(calls));
  const auto again = run_grid(small_grid(), store, counting_runner(calls));
  EXPECT_EQ(again.skipped, 4u);
  EXPECT_EQ(again.executed, 0u);
  EXPECT_EQ(calls, 4);
}

TEST_F(StoreDir, DeletedRecordIsRerunAlone) {
  RecordStore store(store_path());
  std::atomic<int> calls{0};
  run_grid(small_grid(), store, counting_runner(calls));
  auto lines = read_lines(store_path());
  lines.erase(lines.begin() + 2);
  {
    std::ofstream out(store_path(), std::ios::trunc);
    for (const auto& l : lines) out << l << '\n';
  }
  const auto stats = run_grid(small_grid(), store, counting_runner(calls));
  EXPECT_EQ(stats.executed, 1u);
  EXPECT_EQ(calls, 5);
  EXPECT_TRUE(missing_cells(small_grid(), store.latest()).empty());
}

TEST_F(StoreDir, FailuresAreRecordedAndRetried) {
  RecordStore store(store_path());
  const auto stats = run_grid(small_grid(), store, [](const Cell& c) -> RunRecord {
    if (c.seed == 2025) throw NumericError("diverged");
    return RunRecord{};
  });
  EXPECT_EQ(stats.failed, 2u);
  const auto recs = store.latest();
  EXPECT_EQ(std::count_if(recs.begin(), recs.end(), [](const RunRecord& r) { return !r.ok(); }), 2);
  EXPECT_THROW(check_complete(recs), IncompleteGridError);

  std::atomic<int> calls{0};
  const auto retry = run_grid(small_grid(), store, counting_runner(calls));
  EXPECT_EQ(retry.executed, 2u);
  EXPECT_NO_THROW(check_complete(store.latest()));
}

TEST_F(StoreDir, ParallelWorkersWriteEveryRecord) {
  GridSpec g = small_grid();
  g.seeds = default_seeds(6);
  RecordStore store(store_path());
  std::atomic<int> calls{0};
  run_grid(g, store, counting_runner(calls), 4);
  EXPECT_EQ(calls, 12);
  EXPECT_EQ(store.load().size(), 12u);
  EXPECT_EQ(store.corrupt_lines(), 0u);
}

TEST_F(StoreDir, CorruptLineOnlyLosesThatLine) {
  RecordStore store(store_path());
  std::atomic<int> calls{0};
  run_grid(small_grid(), store, counting_runner(calls));
  auto lines = read_lines(store_path());
  lines[1] = lines[1].substr(0, lines[1].size() / 2);
  {
    std::ofstream out(store_path(), std::ios::trunc);
    for (const auto& l : lines) out << l << '\n';
  }
  EXPECT_EQ(store.load().size(), 3u);
  EXPECT_EQ(store.corrupt_lines(), 1u);
}

TEST(Records, JsonRoundTrip) {
  RunRecord r;
  r.dataset = "ETTh1";
  r.horizon = 336;
  r.variant = "FRWKVPlus+no_ppce";
  r.seed = 2031;
  r.mse = 0.123456789012345;
  r.mae = 0.25;
  r.config_hash = "abc";
  const RunRecord back = record_from_json(to_json(r));
  EXPECT_EQ(back.key(), r.key());
  EXPECT_EQ(back.mse, r.mse);
  EXPECT_EQ(back.config_hash, "abc");
}

TEST(Analysis, WinnerCountsOnFixture) {
  const auto wins = winner_counts(testkit::harness_fixture(), Metric::MSE);
  EXPECT_EQ(wins.at("A"), 2.5);
  EXPECT_EQ(wins.at("B"), 1.5);
  EXPECT_EQ(wins.at("C"), 0.0);
}

TEST(Analysis, AverageRanksOnFixture) {
  const auto ranks = average_ranks(testkit::harness_fixture(), Metric::MAE);
  EXPECT_EQ(ranks.at("A"), 1.375);
  EXPECT_EQ(ranks.at("B"), 1.875);
  EXPECT_EQ(ranks.at("C"), 2.75);
}

TEST(Analysis, DatasetAveragesOnFixture) {
  const auto avg = dataset_averages(testkit::harness_fixture());
  ASSERT_EQ(avg.size(), 6u);
  const std::map<std::string, double> expect = {{"d1/A", 1.0 / 8}, {"d1/B", 3.0 / 16}, {"d1/C", 3.0 / 8},
                                                {"d2/A", 5.0 / 16}, {"d2/B", 3.0 / 8},  {"d2/C", 7.0 / 16}};
  for (const auto& a : avg) {
    EXPECT_EQ(a.mse, expect.at(a.dataset + "/" + a.variant));
    EXPECT_EQ(a.mae, a.mse + 0.5);
  }
}

TEST(Analysis, SingleWinnerAndTwoWayTie) {
  std::vector<RunRecord> recs;
  for (const auto& [h, a, b] : {std::tuple{96u, 0.1, 0.2}, {192u, 0.1, 0.3}, {336u, 0.2, 0.2}}) {
    RunRecord r;
    r.dataset = "x";
    r.horizon = h;
    r.seed = 1;
    r.variant = "A";
    r.mse = r.mae = a;
    recs.push_back(r);
    r.variant = "B";
    r.mse = r.mae = b;
    recs.push_back(r);
  }
  const auto wins = winner_counts(recs, Metric::MSE);
  EXPECT_EQ(wins.at("A"), 2.5);
  EXPECT_EQ(wins.at("B"), 0.5);
  const auto ranks = average_ranks(recs, Metric::MSE);
  EXPECT_EQ(ranks.at("A"), (1.0 + 1.0 + 1.5) / 3.0);
  EXPECT_EQ(ranks.at("B"), (2.0 + 2.0 + 1.5) / 3.0);
}

TEST(Analysis, TwoHorizonAverage) {
  std::vector<RunRecord> recs;
  for (const auto& [h, m] : {std::pair{96u, 0.2}, {192u, 0.4}}) {
    RunRecord r;
    r.dataset = "x";
    r.horizon = h;
    r.variant = "A";
    r.seed = 1;
    r.mse = r.mae = m;
    recs.push_back(r);
  }
  EXPECT_NEAR(dataset_averages(recs)[0].mse, 0.3, 1e-15);
}

TEST(Analysis, WinsSumToSettingCount) {
  const auto wins = winner_counts(testkit::harness_fixture(), Metric::MSE);
  double total = 0.0;
  for (const auto& [v, w] : wins) total += w;
  EXPECT_EQ(total, 4.0);
}

TEST(Analysis, RecordOrderDoesNotMatter) {
  auto recs = testkit::harness_fixture();
  for (auto& r : recs) r.mse += 1e-3 * static_cast<double>(r.seed % 7);  // break the exact-sum structure
  const auto wins = winner_counts(recs, Metric::MSE);
  const auto ranks = average_ranks(recs, Metric::MSE);
  const auto avg = dataset_averages(recs);
  std::mt19937 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(recs.begin(), recs.end(), rng);
    EXPECT_EQ(winner_counts(recs, Metric::MSE), wins);
    EXPECT_EQ(average_ranks(recs, Metric::MSE), ranks);
    const auto a2 = dataset_averages(recs);
    for (std::size_t i = 0; i < avg.size(); ++i) EXPECT_EQ(a2[i].mse, avg[i].mse);
  }
}

TEST(Analysis, IncompleteGridsAreRejected) {
  auto recs = testkit::harness_fixture();
  auto missing_seed = recs;
  missing_seed.pop_back();
  EXPECT_THROW(winner_counts(missing_seed, Metric::MSE), IncompleteGridError);

  auto missing_variant = recs;
  missing_variant.erase(std::remove_if(missing_variant.begin(), missing_variant.end(),
                                       [](const RunRecord& r) { return r.variant == "C" && r.horizon == 96 && r.dataset == "d2"; }),
                        missing_variant.end());
  EXPECT_THROW(average_ranks(missing_variant, Metric::MSE), IncompleteGridError);

  auto duplicate = recs;
  duplicate.push_back(recs.front());
  EXPECT_THROW(dataset_averages(duplicate), IncompleteGridError);
  EXPECT_THROW(check_complete({}), IncompleteGridError);
}

TEST_F(StoreDir, ReportFilesAreWritten) {
  write_report(testkit::harness_fixture(), (dir_ / "report").string());
  for (const char* f : {"dataset_averages.csv", "summary.csv", "report.txt"}) EXPECT_TRUE(fs::exists(dir_ / "report" / f)) << f;
  const auto summary = read_lines((dir_ / "report" / "summary.csv").string());
  ASSERT_EQ(summary.size(), 4u);
  EXPECT_EQ(summary[1], "A,2.5,2.5,1.375000,1.375000");
}
