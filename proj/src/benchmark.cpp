#include "bestlds/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "bestlds/errors.hpp"
#include "bestlds/io.hpp"
#include "bestlds/metrics.hpp"
#include "bestlds/ssid.hpp"

namespace bestlds {
namespace {

using Index = Eigen::Index;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// splitmix64 finaliser; combines the base seed with cell coordinates.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix(mix(mix(mix(base) ^ a) ^ b) ^ c);
}

const std::vector<std::pair<BenchmarkMode, std::string>>& mode_names() {
  static const std::vector<std::pair<BenchmarkMode, std::string>> names{
      {BenchmarkMode::kRecoveryCurves, "recovery-curves"}, {BenchmarkMode::kTable1, "table1"},
      {BenchmarkMode::kEmComparison, "em-comparison"},     {BenchmarkMode::kSvdSpectrum, "svd-spectrum"},
      {BenchmarkMode::kRuntime, "runtime"},                {BenchmarkMode::kAblationNonunit, "ablation-nonunit"},
      {BenchmarkMode::kAblationMomconv, "ablation-momconv"},
  };
  return names;
}

struct CellOutput {
  std::vector<BenchmarkRow> rows;
  std::vector<EmRun> em_runs;
};

struct Cell {
  std::string label;
  std::function<CellOutput()> run;
};

class Sweep {
 public:
  explicit Sweep(const BenchmarkConfig& cfg) : cfg_(cfg), dataset_(preset_name(cfg.preset)) {}

  std::vector<Cell> cells() {
    switch (cfg_.mode) {
      case BenchmarkMode::kRecoveryCurves:
        return recovery_cells(cfg_.preset_options, "bestlds");
      case BenchmarkMode::kAblationNonunit: {
        auto unit = recovery_cells(with_normalization(true), "unit");
        auto nonunit = recovery_cells(with_normalization(false), "nonunit");
        unit.insert(unit.end(), nonunit.begin(), nonunit.end());
        return unit;
      }
      case BenchmarkMode::kTable1:
        return table1_cells();
      case BenchmarkMode::kEmComparison:
        return em_cells();
      case BenchmarkMode::kSvdSpectrum:
        return spectrum_cells();
      case BenchmarkMode::kRuntime:
        return runtime_cells();
      case BenchmarkMode::kAblationMomconv:
        return momconv_cells();
    }
    return {};
  }

  const std::string& dataset() const { return dataset_; }

 private:
  PresetOptions with_normalization(bool on) const {
    PresetOptions o = cfg_.preset_options;
    o.normalize_emissions = on;
    return o;
  }

  std::uint64_t system_seed(int repeat) const {
    return cfg_.vary_system ? derive(cfg_.seed, 1, static_cast<std::uint64_t>(repeat)) : derive(cfg_.seed, 1);
  }

  std::uint64_t data_seed(int repeat, Index n) const {
    return derive(cfg_.seed, 2, static_cast<std::uint64_t>(repeat), static_cast<std::uint64_t>(n));
  }

  int order(const Preset& pre) const { return cfg_.p > 0 ? cfg_.p : pre.params.dims().p; }

  BenchmarkRow row(Index n, std::uint64_t seed, const std::string& variant, const std::string& metric,
                   double value, double seconds = 0.0) const {
    return BenchmarkRow{dataset_, n, seed, variant, metric, value, seconds};
  }

  void push_report(std::vector<BenchmarkRow>& out, Index n, std::uint64_t seed, const std::string& variant,
                   const ErrorReport& rep, double seconds) const {
    out.push_back(row(n, seed, variant, "eig_error", rep.eig_error_A, seconds));
    if (rep.subspace_angle_C) out.push_back(row(n, seed, variant, "subspace_angle", *rep.subspace_angle_C, seconds));
    out.push_back(row(n, seed, variant, "elem_error_D", rep.elem_error_D, seconds));
    out.push_back(row(n, seed, variant, "gain_error", rep.gain_error, seconds));
  }

  std::string label(const std::string& what, Index n, int repeat) const {
    std::ostringstream s;
    s << what << " N=" << n << " repeat=" << repeat;
    return s.str();
  }

  std::vector<Cell> recovery_cells(PresetOptions options, std::string variant) const {
    std::vector<Cell> out;
    for (Index n : cfg_.n_grid) {
      for (int r = 0; r < cfg_.repeats; ++r) {
        out.push_back({label(variant, n, r), [this, n, r, options, variant] {
                         const Preset pre = make_preset(cfg_.preset, system_seed(r), options);
                         const std::uint64_t seed = data_seed(r, n);
                         const TimeSeries ts = simulate(pre.params, pre.inputs, n, seed);
                         const SsidResult fit = fit_bestlds(ts, HankelConfig{cfg_.k}, order(pre));
                         CellOutput o;
                         push_report(o.rows, n, seed, variant, error_report(pre.params, fit.params), fit.seconds);
                         return o;
                       }});
      }
    }
    return out;
  }

  std::vector<Cell> table1_cells() const {
    std::vector<Cell> out;
    for (Index n : cfg_.n_grid) {
      for (int r = 0; r < cfg_.repeats; ++r) {
        for (int held = 0; held < cfg_.n_trials; ++held) {
          out.push_back({label("table1 fold " + std::to_string(held), n, r), [this, n, r, held] {
                           const Preset pre = make_preset(cfg_.preset, system_seed(r), cfg_.preset_options);
                           const TimeSeries all = simulate(pre.params, pre.inputs, n, data_seed(r, n), cfg_.n_trials);
                           std::vector<int> train;
                           for (int t = 0; t < cfg_.n_trials; ++t) {
                             if (t != held) train.push_back(t);
                           }
                           const TimeSeries ts = all.select_segments(train);
                           const HankelConfig hc{cfg_.k};
                           const std::uint64_t id = static_cast<std::uint64_t>(r * cfg_.n_trials + held);
                           CellOutput o;
                           const SsidResult best = fit_bestlds(ts, hc, order(pre));
                           o.rows.push_back(row(n, id, "bestlds", "gain_error",
                                                error_report(pre.params, best.params).gain_error, best.seconds));
                           const auto start = Clock::now();
                           const SsidResult gauss = gauss_baseline(ts, hc, order(pre));
                           o.rows.push_back(row(n, id, "gausslds", "gain_error",
                                                error_report(pre.params, gauss.params).gain_error,
                                                seconds_since(start)));
                           return o;
                         }});
        }
      }
    }
    return out;
  }

  std::vector<Cell> em_cells() const {
    std::vector<Cell> out;
    for (Index n : cfg_.n_grid) {
      for (int r = 0; r < cfg_.repeats; ++r) {
        auto data = [this, n, r] {
          const Preset pre = make_preset(cfg_.preset, system_seed(r), cfg_.preset_options);
          return std::make_pair(pre, simulate(pre.params, pre.inputs, n, data_seed(r, n)));
        };
        const std::uint64_t id = data_seed(r, n);
        auto em_cell = [this, n, id, data](std::string variant, std::uint64_t init_seed) {
          return [this, n, id, data, variant, init_seed] {
            const auto [pre, ts] = data();
            const int p = order(pre);
            const HankelConfig hc{cfg_.k};
            const auto start = Clock::now();
            SystemParams init;
            if (variant == "bestlds") {
              init = bestlds_init(ts, hc, p);
            } else if (variant == "gaussian") {
              init = gaussian_init(ts, hc, p);
            } else {
              init = random_init(Dimensions{p, ts.q(), ts.m()}, init_seed);
            }
            const double init_seconds = seconds_since(start);
            EMConfig em = cfg_.em;
            em.seed = init_seed;
            EMTrace trace = run_em(init, ts, em);
            trace.init_seconds = init_seconds;
            CellOutput o;
            o.em_runs.push_back(EmRun{n, variant, id, trace});
            return o;
          };
        };
        out.push_back({label("em bestlds", n, r), em_cell("bestlds", 0)});
        out.push_back({label("em gaussian", n, r), em_cell("gaussian", 0)});
        for (int i = 0; i < cfg_.random_inits; ++i) {
          const std::string v = "random" + std::to_string(i);
          out.push_back({label("em " + v, n, r), em_cell(v, derive(cfg_.seed, 3, static_cast<std::uint64_t>(r),
                                                                   static_cast<std::uint64_t>(i)))});
        }
      }
    }
    return out;
  }

  std::vector<Cell> spectrum_cells() const {
    std::vector<Cell> out;
    for (Index n : cfg_.n_grid) {
      for (int k : cfg_.k_grid) {
        for (int r = 0; r < cfg_.repeats; ++r) {
          const std::string variant = "k=" + std::to_string(k);
          out.push_back({label(variant, n, r), [this, n, r, k, variant] {
                           const Preset pre = make_preset(cfg_.preset, system_seed(r), cfg_.preset_options);
                           const std::uint64_t seed = data_seed(r, n);
                           const TimeSeries ts = simulate(pre.params, pre.inputs, n, seed);
                           const HankelConfig hc{k};
                           const auto start = Clock::now();
                           const ConvertedMoments cm = convert(build_hankel_moments(ts, hc));
                           const std::vector<double> sv = hankel_spectrum(cm.R, hc, pre.params.dims());
                           const double secs = seconds_since(start);
                           CellOutput o;
                           for (std::size_t i = 0; i < sv.size(); ++i) {
                             o.rows.push_back(row(n, seed, variant, "sv_" + std::to_string(i + 1), sv[i], secs));
                           }
                           const auto p = static_cast<std::size_t>(order(pre));
                           if (p < sv.size() && sv[0] > 0.0) {
                             o.rows.push_back(row(n, seed, variant, "ratio_next_to_first", sv[p] / sv[0], secs));
                           }
                           return o;
                         }});
        }
      }
    }
    return out;
  }

  std::vector<Cell> runtime_cells() const {
    std::vector<Cell> out;
    for (Index n : cfg_.n_grid) {
      for (int r = 0; r < cfg_.repeats; ++r) {
        out.push_back({label("runtime", n, r), [this, n, r] {
                         const Preset pre = make_preset(cfg_.preset, system_seed(r), cfg_.preset_options);
                         const std::uint64_t seed = data_seed(r, n);
                         const TimeSeries ts = simulate(pre.params, pre.inputs, n, seed);
                         const SsidResult fit = fit_bestlds(ts, HankelConfig{cfg_.k}, order(pre));
                         CellOutput o;
                         o.rows.push_back(row(n, seed, "bestlds", "fit_seconds", fit.seconds, fit.seconds));
                         return o;
                       }});
      }
    }
    return out;
  }

  std::vector<Cell> momconv_cells() const {
    std::vector<Cell> out;
    for (Index n : cfg_.n_grid) {
      for (int r = 0; r < cfg_.repeats; ++r) {
        out.push_back({label("momconv", n, r), [this, n, r] {
                         const Preset pre = make_preset(cfg_.preset, system_seed(r), cfg_.preset_options);
                         const std::uint64_t seed = data_seed(r, n);
                         const TimeSeries ts = simulate(pre.params, pre.inputs, n, seed);
                         const HankelConfig hc{cfg_.k};
                         const int p = order(pre);
                         CellOutput o;
                         const SsidResult conv = fit_bestlds(ts, hc, p);
                         push_report(o.rows, n, seed, "converted", error_report(pre.params, conv.params), conv.seconds);
                         const auto start = Clock::now();
                         const ConvertedMoments zm =
                             gaussian_moments(build_hankel_moments_real(ts.u, *ts.z, ts.segments(), hc));
                         const SsidResult direct = fit_from_moments(zm, p, N4sidOptions{});
                         push_report(o.rows, n, seed, "direct_z", error_report(pre.params, direct.params),
                                     seconds_since(start));
                         return o;
                       }});
      }
    }
    return out;
  }

  const BenchmarkConfig& cfg_;
  std::string dataset_;
};

// Iterations until the ELBO first comes within tol of target; max_iters + 1
// when it never does.
int iterations_to_reach(const EMTrace& trace, double target, double tol, int max_iters) {
  for (const EMIteration& it : trace.iterations) {
    if (it.elbo_bits >= target - tol) return it.iter;
  }
  return max_iters + 1;
}

double final_elbo(const EMTrace& trace) {
  return trace.iterations.empty() ? -std::numeric_limits<double>::infinity() : trace.iterations.back().elbo_bits;
}

void summarize_em(BenchmarkReport& report, const std::string& dataset) {
  std::map<std::uint64_t, double> best;
  for (const EmRun& run : report.em_runs) {
    auto [pos, inserted] = best.try_emplace(run.seed, final_elbo(run.trace));
    if (!inserted) pos->second = std::max(pos->second, final_elbo(run.trace));
  }
  for (const EmRun& run : report.em_runs) {
    const EMTrace& t = run.trace;
    auto add = [&](const std::string& metric, double value) {
      report.rows.push_back(BenchmarkRow{dataset, run.n, run.seed, run.variant, metric, value, t.init_seconds + t.em_seconds});
    };
    add("init_seconds", t.init_seconds);
    add("em_seconds", t.em_seconds);
    add("total_seconds", t.init_seconds + t.em_seconds);
    add("iterations", t.iters);
    add("converged_iter", t.converged ? t.converged_iter : report.config.em.max_iters + 1);
    add("iters_to_best", iterations_to_reach(t, best[run.seed], 0.01, report.config.em.max_iters));
    add("first_elbo", t.iterations.empty() ? 0.0 : t.iterations.front().elbo_bits);
    add("final_elbo", final_elbo(t));
    add("flagged_decreases", t.flagged_decreases);
  }
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

BenchmarkMode parse_benchmark_mode(const std::string& name) {
  for (const auto& [mode, text] : mode_names()) {
    if (text == name) return mode;
  }
  throw ConfigError("unknown benchmark mode '" + name + "'");
}

std::string benchmark_mode_name(BenchmarkMode mode) {
  for (const auto& [m, text] : mode_names()) {
    if (m == mode) return text;
  }
  return "unknown";
}

void BenchmarkConfig::validate() const {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (p < 0) throw ConfigError("p must be >= 0");
  if (n_grid.empty()) throw ConfigError("N grid is empty");
  for (Index n : n_grid) {
    if (n < 2) throw ConfigError("every N must be >= 2");
  }
  if (mode == BenchmarkMode::kTable1 && n_trials < 2) throw ConfigError("table1 needs at least 2 trials");
  if (mode == BenchmarkMode::kSvdSpectrum && k_grid.empty()) throw ConfigError("k grid is empty");
  if (mode == BenchmarkMode::kEmComparison) {
    if (random_inits < 0) throw ConfigError("random_inits must be >= 0");
    em.validate();
  }
}

const Aggregate* BenchmarkReport::find(Index n, const std::string& variant, const std::string& metric) const {
  for (const Aggregate& a : aggregates) {
    if (a.n == n && a.variant == variant && a.metric == metric) return &a;
  }
  return nullptr;
}

std::vector<BenchmarkRow> BenchmarkReport::select(const std::string& variant, const std::string& metric) const {
  std::vector<BenchmarkRow> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
               [&](const BenchmarkRow& r) { return r.variant == variant && r.metric == metric; });
  return out;
}

std::pair<double, std::optional<double>> mean_sem(const std::vector<double>& values) {
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::nullopt};
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  if (values.size() < 2) return {mean, std::nullopt};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

std::vector<Aggregate> aggregate_rows(const std::vector<BenchmarkRow>& rows) {
  std::vector<Aggregate> out;
  std::vector<std::vector<double>> values;
  for (const BenchmarkRow& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Aggregate& a) {
      return a.dataset == r.dataset && a.n == r.n && a.variant == r.variant && a.metric == r.metric;
    });
    if (it == out.end()) {
      out.push_back(Aggregate{r.dataset, r.n, r.variant, r.metric, 0, 0.0, std::nullopt});
      values.emplace_back();
      it = out.end() - 1;
    }
    values[static_cast<std::size_t>(it - out.begin())].push_back(r.value);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].count = static_cast<int>(values[i].size());
    std::tie(out[i].mean, out[i].sem) = mean_sem(values[i]);
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("loglog_slope needs two or more matching points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0) throw ConfigError("loglog_slope needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw ConfigError("loglog_slope needs distinct x values");
  return sxy / sxx;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  BenchmarkReport report;
  report.config = cfg;
  Sweep sweep(report.config);
  const std::vector<Cell> cells = sweep.cells();

  std::vector<CellOutput> outputs(cells.size());
  std::vector<std::optional<std::string>> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        outputs[i] = cells[i].run();
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), cells.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (std::thread& t : threads) t.join();

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (errors[i]) {
      report.failures.push_back(BenchmarkFailure{cells[i].label, *errors[i]});
      continue;
    }
    for (BenchmarkRow& r : outputs[i].rows) report.rows.push_back(std::move(r));
    for (EmRun& run : outputs[i].em_runs) report.em_runs.push_back(std::move(run));
  }
  if (cfg.mode == BenchmarkMode::kEmComparison) summarize_em(report, sweep.dataset());
  report.aggregates = aggregate_rows(report.rows);
  return report;
}

std::string benchmark_rows_csv(const BenchmarkReport& report) {
  std::ostringstream s;
  s << "dataset,N,seed,variant,metric,value,seconds\n";
  for (const BenchmarkRow& r : report.rows) {
    s << csv_escape(r.dataset) << ',' << r.n << ',' << r.seed << ',' << csv_escape(r.variant) << ','
      << csv_escape(r.metric) << ',' << io::format_double(r.value) << ',' << io::format_double(r.seconds) << '\n';
  }
  return s.str();
}

std::string benchmark_aggregates_csv(const BenchmarkReport& report) {
  std::ostringstream s;
  s << "dataset,N,variant,metric,count,mean,sem\n";
  for (const Aggregate& a : report.aggregates) {
    s << csv_escape(a.dataset) << ',' << a.n << ',' << csv_escape(a.variant) << ',' << csv_escape(a.metric) << ','
      << a.count << ',' << io::format_double(a.mean) << ',' << (a.sem ? io::format_double(*a.sem) : "") << '\n';
  }
  return s.str();
}

nlohmann::ordered_json benchmark_config_to_json(const BenchmarkConfig& cfg) {
  nlohmann::ordered_json j;
  j["mode"] = benchmark_mode_name(cfg.mode);
  j["preset"] = preset_name(cfg.preset);
  j["normalize_emissions"] = cfg.preset_options.normalize_emissions;
  j["rotation_radius"] = cfg.preset_options.rotation_radius;
  j["n_grid"] = cfg.n_grid;
  j["repeats"] = cfg.repeats;
  j["seed"] = cfg.seed;
  j["k"] = cfg.k;
  j["p"] = cfg.p;
  j["workers"] = cfg.workers;
  j["n_trials"] = cfg.n_trials;
  j["k_grid"] = cfg.k_grid;
  j["random_inits"] = cfg.random_inits;
  j["em_max_iters"] = cfg.em.max_iters;
  j["vary_system"] = cfg.vary_system;
  return j;
}

nlohmann::ordered_json benchmark_to_json(const BenchmarkReport& report) {
  nlohmann::ordered_json j;
  j["config"] = benchmark_config_to_json(report.config);
  auto& aggs = j["aggregates"] = nlohmann::ordered_json::array();
  for (const Aggregate& a : report.aggregates) {
    nlohmann::ordered_json e;
    e["dataset"] = a.dataset;
    e["N"] = a.n;
    e["variant"] = a.variant;
    e["metric"] = a.metric;
    e["count"] = a.count;
    e["mean"] = a.mean;
    e["sem"] = a.sem ? nlohmann::ordered_json(*a.sem) : nlohmann::ordered_json(nullptr);
    aggs.push_back(std::move(e));
  }
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const BenchmarkRow& r : report.rows) {
    rows.push_back({{"dataset", r.dataset}, {"N", r.n}, {"seed", r.seed}, {"variant", r.variant},
                    {"metric", r.metric}, {"value", r.value}, {"seconds", r.seconds}});
  }
  auto& fails = j["failures"] = nlohmann::ordered_json::array();
  for (const BenchmarkFailure& f : report.failures) fails.push_back({{"cell", f.cell}, {"message", f.message}});
  if (!report.em_runs.empty()) {
    auto& runs = j["em_runs"] = nlohmann::ordered_json::array();
    for (const EmRun& run : report.em_runs) {
      nlohmann::ordered_json e = io::em_summary_to_json(run.trace);
      e["variant"] = run.variant;
      e["seed"] = run.seed;
      runs.push_back(std::move(e));
    }
  }
  return j;
}

}  // namespace bestlds
