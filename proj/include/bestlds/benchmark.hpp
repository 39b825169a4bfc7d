#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bestlds/laplace_em.hpp"
#include "bestlds/model.hpp"

namespace bestlds {

enum class BenchmarkMode {
  kRecoveryCurves,
  kTable1,
  kEmComparison,
  kSvdSpectrum,
  kRuntime,
  kAblationNonunit,
  kAblationMomconv,
};

BenchmarkMode parse_benchmark_mode(const std::string& name);
std::string benchmark_mode_name(BenchmarkMode mode);

struct BenchmarkConfig {
  BenchmarkMode mode = BenchmarkMode::kRecoveryCurves;
  PresetId preset = PresetId::B;
  PresetOptions preset_options;
  std::vector<Eigen::Index> n_grid{1000, 4000, 16000, 64000};
  int repeats = 10;
  std::uint64_t seed = 0;
  int k = 10;
  int p = 0;  ///< 0: latent dimension of the preset
  int workers = 1;
  int n_trials = 5;              ///< table1
  std::vector<int> k_grid{7, 10};  ///< svd-spectrum
  int random_inits = 5;          ///< em-comparison
  EMConfig em;
  /// Draw a fresh system for every repeat (presets with random parts).
  bool vary_system = true;

  void validate() const;
};

/// One measured value. variant names the estimator or initializer.
struct BenchmarkRow {
  std::string dataset;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  std::string variant;
  std::string metric;
  double value = 0.0;
  double seconds = 0.0;
};

struct Aggregate {
  std::string dataset;
  Eigen::Index n = 0;
  std::string variant;
  std::string metric;
  int count = 0;
  double mean = 0.0;
  std::optional<double> sem;  ///< only with count >= 2
};

struct BenchmarkFailure {
  std::string cell;
  std::string message;
};

struct EmRun {
  Eigen::Index n = 0;
  std::string variant;
  std::uint64_t seed = 0;
  EMTrace trace;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::vector<BenchmarkRow> rows;
  std::vector<Aggregate> aggregates;
  std::vector<BenchmarkFailure> failures;
  std::vector<EmRun> em_runs;  ///< em-comparison only

  /// Aggregate for the key, or nullptr.
  const Aggregate* find(Eigen::Index n, const std::string& variant, const std::string& metric) const;
  /// Rows matching variant and metric, in cell order.
  std::vector<BenchmarkRow> select(const std::string& variant, const std::string& metric) const;
};

/// Mean and standard error of the mean (nullopt for fewer than two values).
std::pair<double, std::optional<double>> mean_sem(const std::vector<double>& values);

/// Groups rows by (dataset, n, variant, metric) in first-seen order.
std::vector<Aggregate> aggregate_rows(const std::vector<BenchmarkRow>& rows);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Runs the sweep. Cells execute on up to cfg.workers threads; a failing
/// cell is recorded and the sweep continues.
BenchmarkReport run_benchmark(const BenchmarkConfig& cfg);

std::string benchmark_rows_csv(const BenchmarkReport& report);
std::string benchmark_aggregates_csv(const BenchmarkReport& report);
nlohmann::ordered_json benchmark_to_json(const BenchmarkReport& report);
nlohmann::ordered_json benchmark_config_to_json(const BenchmarkConfig& cfg);

}  // namespace bestlds
