#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "frwkv/data.hpp"
#include "frwkv/errors.hpp"

using namespace frwkv;
using namespace frwkv::data;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("frwkv_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

SeriesTable ramp_table(std::size_t len, std::size_t n) {
  SeriesTable t;
  for (std::size_t c = 0; c < n; ++c) t.columns.push_back("c" + std::to_string(c));
  t.values = Tensor({len, n});
  for (std::size_t r = 0; r < len; ++r)
    for (std::size_t c = 0; c < n; ++c) t.values[r * n + c] = static_cast<double>(r) + 1000.0 * static_cast<double>(c);
  return t;
}

}  // namespace

TEST(Csv, LoadsDateAndValues) {
  TempDir dir;
  const auto path = dir.write("tiny.csv", "date,a,b\n2020-01-01 00:00,1,2\n2020-01-01 01:00,3.5,-4\n2020-01-01 02:00,5,6e1\n");
  const SeriesTable t = load_csv(path);
  EXPECT_EQ(t.columns, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.timestamps.size(), 3u);
  EXPECT_EQ(t.values.shape(), (Shape{3, 2}));
  EXPECT_EQ(t.values.vec(), (std::vector<double>{1, 2, 3.5, -4, 5, 60}));
}

TEST(Csv, NumericOnlyFileHasNoTimestamps) {
  TempDir dir;
  const SeriesTable t = load_csv(dir.write("n.csv", "x,y\n1,2\n3,4\r\n"));
  EXPECT_TRUE(t.timestamps.empty());
  EXPECT_EQ(t.values.vec(), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Csv, HeaderOnlyIsDataError) {
  TempDir dir;
  EXPECT_THROW(load_csv(dir.write("h.csv", "date,a\n")), DataError);
  EXPECT_THROW(load_csv(dir.write("e.csv", "")), DataError);
  EXPECT_THROW(load_csv(dir.file("missing.csv")), DataError);
}

TEST(Csv, ParseErrorNamesLineAndColumn) {
  TempDir dir;
  const auto path = dir.write("bad.csv", "date,a,b\nt0,1,2\nt1,3,oops\n");
  try {
    load_csv(path);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 3"), std::string::npos) << msg;
  }
  EXPECT_THROW(load_csv(dir.write("ragged.csv", "a,b\n1,2\n3\n")), DataError);
}

TEST(Csv, SaveLoadRoundTripIsExact) {
  TempDir dir;
  const SeriesTable t = synth_periodic(3, 50, 7.0, 0.1, 0.3, 5);
  save_csv(dir.file("s.csv"), t);
  const SeriesTable back = load_csv(dir.file("s.csv"));
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.values.vec(), t.values.vec());
}

TEST(Kind, InferenceAndParsing) {
  EXPECT_EQ(infer_kind("/data/ETTh1.csv"), DatasetKind::ETTh);
  EXPECT_EQ(infer_kind("ettm2.csv"), DatasetKind::ETTm);
  EXPECT_EQ(infer_kind("weather.csv"), DatasetKind::Custom);
  EXPECT_EQ(parse_kind("ETTh"), DatasetKind::ETTh);
  EXPECT_THROW(parse_kind("hourly"), ConfigError);
}

TEST(Split, EttHourlyBorders) {
  const SeriesTable t = ramp_table(17420, 1);
  const SplitSpec s = split(t, DatasetKind::ETTh, 96, 96);
  EXPECT_EQ(s.train_len, 12u * 30 * 24);
  EXPECT_EQ(s.train_len, 8640u);
  EXPECT_EQ(s.val_len, 2880u);
  EXPECT_EQ(s.test_len, 2880u);
  EXPECT_EQ(s.val.begin, 8640u - 96);
  EXPECT_EQ(s.test.end, 8640u + 2880 + 2880);
}

TEST(Split, EttMinuteBordersScaleByFour) {
  const SplitSpec s = split(ramp_table(69680, 1), DatasetKind::ETTm, 96, 96);
  EXPECT_EQ(s.train_len, 34560u);
  EXPECT_EQ(s.val_len, 11520u);
}

TEST(Split, CustomRatio) {
  const SplitSpec s = split(ramp_table(1000, 2), DatasetKind::Custom, 24, 12);
  EXPECT_EQ(s.train_len, 700u);
  EXPECT_EQ(s.val_len, 100u);
  EXPECT_EQ(s.test_len, 200u);
  EXPECT_EQ(s.test.end, 1000u);
}

TEST(Split, TooShortIsDataError) {
  EXPECT_THROW(split(ramp_table(1000, 1), DatasetKind::ETTh, 96, 96), DataError);
  EXPECT_THROW(split(ramp_table(60, 1), DatasetKind::Custom, 24, 12), DataError);
}

TEST(Split, StatisticsUseTrainRowsOnly) {
  SeriesTable t = ramp_table(100, 1);
  const SplitSpec a = split(t, DatasetKind::Custom, 4, 2);
  for (std::size_t r = 70; r < 100; ++r) t.values[r] = 1e6;
  const SplitSpec b = split(t, DatasetKind::Custom, 4, 2);
  EXPECT_EQ(a.mean[0], b.mean[0]);
  EXPECT_EQ(a.std[0], b.std[0]);
  EXPECT_DOUBLE_EQ(a.mean[0], 34.5);
}

TEST(Split, ConstantColumnKeepsUnitScale) {
  SeriesTable t = ramp_table(50, 2);
  for (std::size_t r = 0; r < 50; ++r) t.values[r * 2 + 1] = 4.0;
  const SplitSpec s = split(t, DatasetKind::Custom, 4, 2);
  EXPECT_EQ(s.std[1], 1.0);
  const Tensor z = standardize(t.values, s);
  EXPECT_EQ(z[1], 0.0);
}

TEST(Windows, CountAndContents) {
  auto values = std::make_shared<const Tensor>(ramp_table(10, 2).values);
  const WindowSet w(values, {0, 10}, 4, 2);
  EXPECT_EQ(w.size(), 5u);
  Tensor x, y;
  w.gather({0, 4}, x, y);
  EXPECT_EQ(x.shape(), (Shape{2, 4, 2}));
  EXPECT_EQ(y.shape(), (Shape{2, 2, 2}));
  EXPECT_EQ(x.at({0, 0, 0}), 0.0);
  EXPECT_EQ(x.at({1, 3, 1}), 1007.0);
  EXPECT_EQ(y.at({1, 1, 0}), 9.0);
  EXPECT_THROW(w.gather({5}, x, y), ContractError);
}

TEST(Windows, ExactFitGivesOneWindow) {
  auto values = std::make_shared<const Tensor>(ramp_table(6, 1).values);
  EXPECT_EQ(WindowSet(values, {0, 6}, 4, 2).size(), 1u);
  EXPECT_THROW(WindowSet(values, {0, 5}, 4, 2), DataError);
}

TEST(Windows, SplitsDoNotLeakTargets) {
  // Every target row of a split lies inside the rows that split owns.
  const Dataset d = prepare(ramp_table(500, 1), DatasetKind::Custom, 16, 8);
  const auto owned = [&](const WindowSet& w, std::size_t lo, std::size_t hi) {
    Tensor x, y;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w.gather({i}, x, y);
      for (double v : y.vec()) {
        const double row = v * d.spec.std[0] + d.spec.mean[0];
        EXPECT_GE(row, static_cast<double>(lo) - 1e-6);
        EXPECT_LT(row, static_cast<double>(hi) + 1e-6);
      }
    }
  };
  owned(d.train, 0, 350);
  owned(d.val, 350, 400);
  owned(d.test, 400, 500);
  EXPECT_EQ(d.test.size(), 100u - 8 + 1);
  EXPECT_EQ(&d.windows("val"), &d.val);
  EXPECT_THROW(d.windows("holdout"), ConfigError);
}

TEST(Synth, DeterministicPerSeed) {
  EXPECT_EQ(synth_periodic(2, 300, 24, 0.1, 0.1, 7).values.vec(), synth_periodic(2, 300, 24, 0.1, 0.1, 7).values.vec());
  EXPECT_NE(synth_periodic(2, 300, 24, 0.1, 0.1, 7).values.vec(), synth_periodic(2, 300, 24, 0.1, 0.1, 8).values.vec());
}

TEST(Synth, NoiselessSeriesIsPeriodicUpToTrend) {
  // Linear trend cancels in the second difference across one period.
  const std::size_t p = 24;
  const SeriesTable t = synth_periodic(3, 480, static_cast<double>(p), 0.0, 0.0, 9);
  for (std::size_t r = 0; r + 2 * p < 480; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      const double d2 = t.values[(r + 2 * p) * 3 + c] - 2.0 * t.values[(r + p) * 3 + c] + t.values[r * 3 + c];
      EXPECT_NEAR(d2, 0.0, 1e-9);
    }
}

TEST(Synth, VarianceGrowsWithNoise) {
  auto resid_var = [](double noise) {
    const SeriesTable clean = synth_periodic(1, 2000, 24, 0.0, 0.0, 11);
    const SeriesTable noisy = synth_periodic(1, 2000, 24, 0.0, noise, 11);
    double s = 0.0;
    for (std::size_t i = 0; i < 2000; ++i) s += std::pow(noisy.values[i] - clean.values[i], 2);
    return s / 2000.0;
  };
  const double lo = resid_var(0.1), mid = resid_var(0.5), hi = resid_var(1.0);
  EXPECT_LT(lo, mid);
  EXPECT_LT(mid, hi);
  EXPECT_NEAR(hi, 1.0, 0.1);
}

TEST(Synth, RejectsBadArguments) {
  EXPECT_THROW(synth_periodic(0, 10, 4, 0, 0, 1), ConfigError);
  EXPECT_THROW(synth_periodic(1, 10, 0, 0, 0, 1), ConfigError);
  EXPECT_THROW(synth_periodic(1, 10, 4, 0, -1, 1), ConfigError);
}
