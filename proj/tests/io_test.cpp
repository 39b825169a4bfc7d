#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "bestlds/errors.hpp"
#include "bestlds/io.hpp"
#include "bestlds/log.hpp"
#include "support/oracles.hpp"

namespace bestlds {
namespace {

TEST(Io, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g(0.0, 1e3);
  for (int i = 0; i < 500; ++i) {
    const double v = g(rng) * std::pow(10.0, i % 20 - 10);
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(0.5), "0.5");
  EXPECT_EQ(std::stod(io::format_double(std::numeric_limits<double>::min())), std::numeric_limits<double>::min());
}

TEST(Io, MatrixJsonIsRowMajor) {
  const Mat m = (Mat(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  const io::Json j = io::matrix_to_json(m);
  EXPECT_EQ(j["rows"], 2);
  EXPECT_EQ(j["cols"], 3);
  EXPECT_EQ(j["data"][1], 2.0);
  EXPECT_EQ(io::matrix_from_json(j, "m"), m);
  io::Json bad = j;
  bad["data"].erase(0);
  EXPECT_THROW(io::matrix_from_json(bad, "m"), IoError);
}

TEST(Io, ParamsRoundTripExactly) {
  std::mt19937_64 rng(42);
  const SystemParams s = oracle::random_stable(Dimensions{3, 4, 2}, rng);
  const io::Json j = io::params_to_json(s, io::Json{{"note", "x"}});
  const SystemParams back = io::params_from_json(io::Json::parse(j.dump()));
  EXPECT_EQ(back.A, s.A);
  EXPECT_EQ(back.B, s.B);
  EXPECT_EQ(back.C, s.C);
  EXPECT_EQ(back.D, s.D);
  EXPECT_EQ(back.Q, s.Q);
  EXPECT_EQ(back.mu0, s.mu0);
  EXPECT_EQ(back.Q0, s.Q0);
  EXPECT_EQ(j["metadata"]["note"], "x");
}

TEST(Io, ParamsRejectInconsistentShapes) {
  const SystemParams s = SystemParams::zeros(Dimensions{2, 2, 1});
  io::Json j = io::params_to_json(s);
  j["p"] = 3;
  EXPECT_THROW(io::params_from_json(j), IoError);
  j = io::params_to_json(s);
  j.erase("A");
  EXPECT_THROW(io::params_from_json(j), IoError);
}

TEST(Io, MomentsRoundTrip) {
  const Mat sigma = (Mat(2, 2) << 2, 0.5, 0.5, 1).finished();
  const ConvertedMoments cm = finalize_moments(1, 1, 0, Vec::Ones(2), sigma);
  const ConvertedMoments back = io::moments_from_json(io::Json::parse(io::moments_to_json(cm).dump()));
  EXPECT_EQ(back.Sigma, cm.Sigma);
  EXPECT_EQ(back.R, cm.R);
  EXPECT_EQ(back.mu, cm.mu);
  EXPECT_EQ(back.k, 1);
}

TEST(Io, CsvRoundTripWithTrials) {
  const WarningSink prev = set_warning_sink({});
  const Preset pre = make_preset(PresetId::B, 1);
  const TimeSeries ts = simulate(pre.params, pre.inputs, 200, 3, 4);
  set_warning_sink(prev);
  const std::string text = io::timeseries_to_csv(ts);
  EXPECT_EQ(text.substr(0, text.find('\n')), "u_0,u_1,u_2,y_0,y_1,y_2,y_3,y_4,y_5,y_6,y_7,y_8,y_9,trial_id");
  const TimeSeries back = io::timeseries_from_csv(text);
  EXPECT_EQ(back.u, ts.u);
  EXPECT_EQ(back.y, ts.y);
  EXPECT_EQ(back.segments(), ts.segments());
  EXPECT_EQ(io::timeseries_to_csv(back), text);
}

TEST(Io, CsvWithoutInputsOrTrials) {
  const TimeSeries ts = io::timeseries_from_csv("y_0,y_1\n1,0\n0,0\n1,1\n");
  EXPECT_EQ(ts.m(), 0);
  EXPECT_EQ(ts.q(), 2);
  EXPECT_EQ(ts.length(), 3);
  EXPECT_EQ(ts.segments().size(), 1u);
}

TEST(Io, CsvAcceptsSignedInputCoding) {
  const TimeSeries ts = io::timeseries_from_csv("u_0,y_0\n-1,1\n1,0\n");
  EXPECT_EQ(ts.u(0, 0), -1.0);
  EXPECT_EQ(ts.u(1, 0), 1.0);
}

TEST(Io, CsvRejectsMalformedInput) {
  EXPECT_THROW(io::timeseries_from_csv(""), IoError);
  EXPECT_THROW(io::timeseries_from_csv("u_0,y_0\n0.1,0.5\n"), IoError);
  EXPECT_THROW(io::timeseries_from_csv("u_0,y_0\n0.1,2\n"), IoError);
  EXPECT_THROW(io::timeseries_from_csv("u_0,y_0\n0.1\n"), IoError);
  EXPECT_THROW(io::timeseries_from_csv("u_0\n0.1\n"), IoError);
  EXPECT_THROW(io::timeseries_from_csv("u_1,y_0\n0.1,1\n"), IoError);
  EXPECT_THROW(io::timeseries_from_csv("w_0,y_0\n0.1,1\n"), IoError);
  EXPECT_THROW(io::timeseries_from_csv("u_0,y_0\nabc,1\n"), IoError);
}

TEST(Io, EmSummaryCarriesTheTrace) {
  EMTrace trace;
  trace.params = SystemParams::zeros(Dimensions{1, 1, 0});
  trace.iterations = {{1, -0.9, 0.5, 0.1}, {2, -0.8, 0.1, 0.2}};
  trace.iters = 2;
  const io::Json j = io::em_summary_to_json(trace);
  EXPECT_EQ(j["elbo_bits"].size(), 2u);
  EXPECT_EQ(j["final_elbo_bits"], -0.8);
  const std::string csv = io::em_trace_csv(trace);
  EXPECT_EQ(csv, "iter,elbo_bits,gain_delta,seconds\n1,-0.9,0.5,0.1\n2,-0.8,0.1,0.2\n");
}

TEST(Io, FilesRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "bestlds_io_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "x.json").string();
  io::write_json(path, io::Json{{"a", 1}});
  EXPECT_EQ(io::read_json(path)["a"], 1);
  io::write_file(path, "{not json");
  EXPECT_THROW(io::read_json(path), IoError);
  EXPECT_THROW(io::read_file((dir / "missing.csv").string()), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace bestlds
