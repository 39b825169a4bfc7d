#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bestlds/benchmark.hpp"
#include "bestlds/errors.hpp"
#include "bestlds/io.hpp"
#include "bestlds/laplace_em.hpp"
#include "bestlds/metrics.hpp"
#include "bestlds/ssid.hpp"

namespace {

using bestlds::io::Json;
using Index = Eigen::Index;

struct SimulateOpts {
  std::string preset = "B";
  std::string params_path;
  Index n = 1000;
  std::uint64_t seed = 0;
  int trials = 1;
  bool no_normalize = false;
  double rotation_radius = 1.0;
  std::string out_csv = "data.csv";
  std::string out_params = "params.json";
};

struct FitOpts {
  std::string data;
  int k = 10;
  int p = 1;
  std::string baseline = "bestlds";
  bool spectrum_only = false;
  bool em = false;
  std::string init = "bestlds";
  int em_max_iters = 100;
  std::uint64_t seed = 0;
  std::string truth;
  std::string out = "fit.json";
  std::string em_trace;
};

struct BenchOpts {
  std::string mode = "recovery-curves";
  std::string preset = "B";
  std::vector<Index> n_grid{1000, 4000, 16000, 64000};
  int repeats = 10;
  std::uint64_t seed = 0;
  int k = 10;
  int p = 0;
  int workers = 1;
  int trials = 5;
  std::vector<int> k_grid{7, 10};
  int random_inits = 5;
  int em_max_iters = 100;
  bool no_normalize = false;
  double rotation_radius = 1.0;
  bool fixed_system = false;
  std::string out_prefix = "benchmark";
};

struct ImpulseOpts {
  std::string params;
  int horizon = 50;
  std::string out = "impulse.csv";
};

struct PredictOpts {
  std::string params;
  std::string data;
  int folds = 5;
  bool open_loop = false;
  bool refit = false;
  int k = 10;
  int p = 0;
  std::string out_csv = "predictions.csv";
  std::string out_json = "predict.json";
};

Json simulate_config(const SimulateOpts& o) {
  return Json{{"command", "simulate"}, {"preset", o.params_path.empty() ? o.preset : ""},
              {"params", o.params_path}, {"N", o.n}, {"seed", o.seed}, {"trials", o.trials},
              {"normalize_emissions", !o.no_normalize}, {"rotation_radius", o.rotation_radius}};
}

void cmd_simulate(const SimulateOpts& o) {
  bestlds::SystemParams params;
  bestlds::InputSpec inputs;
  if (!o.params_path.empty()) {
    params = bestlds::io::params_from_json(bestlds::io::read_json(o.params_path));
    const int m = params.dims().m;
    inputs = bestlds::InputSpec::gaussian(bestlds::Vec::Zero(m), bestlds::Mat::Identity(m, m));
  } else {
    bestlds::PresetOptions po;
    po.normalize_emissions = !o.no_normalize;
    po.rotation_radius = o.rotation_radius;
    const bestlds::Preset pre = bestlds::make_preset(bestlds::parse_preset(o.preset), o.seed, po);
    params = pre.params;
    inputs = pre.inputs;
  }
  const bestlds::TimeSeries ts = bestlds::simulate(params, inputs, o.n, o.seed, o.trials);
  bestlds::io::write_file(o.out_csv, bestlds::io::timeseries_to_csv(ts));
  Json meta = simulate_config(o);
  meta["input_cov"] = bestlds::io::matrix_to_json(inputs.covariance());
  bestlds::io::write_json(o.out_params, bestlds::io::params_to_json(params, meta));
}

void cmd_fit(const FitOpts& o) {
  const bestlds::TimeSeries ts = bestlds::io::timeseries_from_csv(bestlds::io::read_file(o.data));
  const bestlds::HankelConfig hc{o.k};
  hc.validate(o.p);
  const bestlds::Dimensions dims{o.p, ts.q(), ts.m()};
  Json meta{{"command", "fit"}, {"data", o.data}, {"k", o.k}, {"p", o.p}, {"baseline", o.baseline},
            {"em", o.em}, {"init", o.init}, {"em_max_iters", o.em_max_iters}, {"seed", o.seed}};

  if (o.spectrum_only) {
    const bestlds::ConvertedMoments cm = o.baseline == "gaussian"
                                             ? bestlds::gaussian_moments(bestlds::build_hankel_moments_real(
                                                   ts.u, ts.y, ts.segments(), hc))
                                             : bestlds::convert(bestlds::build_hankel_moments(ts, hc));
    Json out{{"metadata", meta}, {"singular_values", bestlds::hankel_spectrum(cm.R, hc, dims)}};
    bestlds::io::write_json(o.out, out);
    return;
  }

  bestlds::SsidResult result;
  if (o.baseline == "gaussian") {
    result = bestlds::gauss_baseline(ts, hc, o.p);
  } else if (o.baseline == "bestlds") {
    result = bestlds::fit_bestlds(ts, hc, o.p);
  } else {
    throw bestlds::ConfigError("--baseline must be bestlds or gaussian");
  }
  Json out = bestlds::io::ssid_to_json(result, meta);
  if (!o.truth.empty()) {
    const bestlds::SystemParams truth = bestlds::io::params_from_json(bestlds::io::read_json(o.truth));
    out["error_report"] = bestlds::io::error_report_to_json(bestlds::error_report(truth, result.params));
  }
  if (o.em) {
    bestlds::SystemParams init;
    double init_seconds = 0.0;
    if (o.init == o.baseline) {
      init = result.params;
      init_seconds = result.seconds;
    } else if (o.init == "bestlds") {
      const bestlds::SsidResult r = bestlds::fit_bestlds(ts, hc, o.p);
      init = r.params;
      init_seconds = r.seconds;
    } else if (o.init == "gaussian") {
      const bestlds::SsidResult r = bestlds::gauss_baseline(ts, hc, o.p);
      init = r.params;
      init_seconds = r.seconds;
    } else if (o.init == "random") {
      init = bestlds::random_init(dims, o.seed);
    } else {
      throw bestlds::ConfigError("--init must be bestlds, gaussian or random");
    }
    bestlds::EMConfig em;
    em.max_iters = o.em_max_iters;
    em.seed = o.seed;
    bestlds::EMTrace trace = bestlds::run_em(init, ts, em);
    trace.init_seconds = init_seconds;
    out["em"] = bestlds::io::em_summary_to_json(trace);
    if (!o.truth.empty()) {
      const bestlds::SystemParams truth = bestlds::io::params_from_json(bestlds::io::read_json(o.truth));
      out["em"]["error_report"] = bestlds::io::error_report_to_json(bestlds::error_report(truth, trace.params));
    }
    if (!o.em_trace.empty()) bestlds::io::write_file(o.em_trace, bestlds::io::em_trace_csv(trace));
  }
  bestlds::io::write_json(o.out, out);
}

void cmd_benchmark(const BenchOpts& o) {
  bestlds::BenchmarkConfig cfg;
  cfg.mode = bestlds::parse_benchmark_mode(o.mode);
  cfg.preset = bestlds::parse_preset(o.preset);
  cfg.preset_options.normalize_emissions = !o.no_normalize;
  cfg.preset_options.rotation_radius = o.rotation_radius;
  cfg.n_grid = o.n_grid;
  cfg.repeats = o.repeats;
  cfg.seed = o.seed;
  cfg.k = o.k;
  cfg.p = o.p;
  cfg.workers = o.workers;
  cfg.n_trials = o.trials;
  cfg.k_grid = o.k_grid;
  cfg.random_inits = o.random_inits;
  cfg.em.max_iters = o.em_max_iters;
  cfg.vary_system = !o.fixed_system;
  const bestlds::BenchmarkReport report = bestlds::run_benchmark(cfg);
  bestlds::io::write_file(o.out_prefix + "_rows.csv", bestlds::benchmark_rows_csv(report));
  bestlds::io::write_file(o.out_prefix + "_aggregates.csv", bestlds::benchmark_aggregates_csv(report));
  bestlds::io::write_json(o.out_prefix + ".json", bestlds::benchmark_to_json(report));
  for (const auto& f : report.failures) std::cerr << "failed cell " << f.cell << ": " << f.message << '\n';
}

void cmd_impulse(const ImpulseOpts& o) {
  if (o.horizon < 1) throw bestlds::ConfigError("--horizon must be >= 1");
  const bestlds::SystemParams params = bestlds::io::params_from_json(bestlds::io::read_json(o.params));
  const bestlds::Dimensions d = params.dims();
  std::ostringstream s;
  s << "input,t";
  for (int i = 0; i < d.q; ++i) s << ",z_" << i;
  s << '\n';
  for (int j = 0; j < d.m; ++j) {
    const bestlds::Mat trace = bestlds::impulse_response(params, j, o.horizon);
    for (int t = 0; t < o.horizon; ++t) {
      s << j << ',' << t;
      for (int i = 0; i < d.q; ++i) s << ',' << bestlds::io::format_double(trace(i, t));
      s << '\n';
    }
  }
  bestlds::io::write_file(o.out, s.str());
}

// Segment indices of each fold. With at least as many trials as folds the
// folds are contiguous blocks of trials; otherwise the series is cut into
// contiguous time blocks, respecting existing trial boundaries.
std::vector<std::vector<int>> make_folds(bestlds::TimeSeries& ts, int k_folds) {
  const Index n = ts.length();
  auto segs = ts.segments();
  const int n_segs = static_cast<int>(segs.size());
  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k_folds));
  if (n_segs >= k_folds) {
    for (int s = 0; s < n_segs; ++s) folds[static_cast<std::size_t>(s * k_folds / n_segs)].push_back(s);
    return folds;
  }
  std::set<Index> cuts;
  for (const auto& [b, e] : segs) cuts.insert(b);
  for (int f = 0; f < k_folds; ++f) cuts.insert(n * f / k_folds);
  ts.trial_bounds.assign(cuts.begin(), cuts.end());
  segs = ts.segments();
  for (int s = 0; s < static_cast<int>(segs.size()); ++s) {
    const auto f = static_cast<std::size_t>(segs[static_cast<std::size_t>(s)].first * k_folds / n);
    folds[f].push_back(s);
  }
  return folds;
}

struct Perseverative {
  double accuracy = 0.0;
  double bits_per_sample = 0.0;
};

// Repeat the previous choice with probability 0.7; the first step of a
// segment is scored at 0.5.
Perseverative perseverative(const bestlds::TimeSeries& ts) {
  constexpr double kStay = 0.7;
  double hits = 0.0, bits = 0.0, count = 0.0;
  for (const auto& [b, e] : ts.segments()) {
    for (Index t = b; t < e; ++t) {
      for (int i = 0; i < ts.q(); ++i) {
        count += 1.0;
        if (t == b) {
          bits += std::log2(0.5);
          hits += 0.5;
          continue;
        }
        const bool same = ts.y(t, i) == ts.y(t - 1, i);
        hits += same ? 1.0 : 0.0;
        bits += std::log2(same ? kStay : 1.0 - kStay);
      }
    }
  }
  return {hits / count, bits / static_cast<double>(ts.length())};
}

void cmd_predict(const PredictOpts& o) {
  if (o.folds < 1) throw bestlds::ConfigError("--folds must be >= 1");
  bestlds::TimeSeries ts = bestlds::io::timeseries_from_csv(bestlds::io::read_file(o.data));
  std::optional<bestlds::SystemParams> fixed;
  if (!o.params.empty()) fixed = bestlds::io::params_from_json(bestlds::io::read_json(o.params));
  if (!fixed && !o.refit) throw bestlds::ConfigError("predict needs --params or --refit");
  if (o.refit && o.p < 1) throw bestlds::ConfigError("--refit needs -p >= 1");
  if (o.refit && o.folds < 2) throw bestlds::ConfigError("--refit needs at least 2 folds");

  const auto folds = make_folds(ts, o.folds);
  std::ostringstream csv;
  csv << "fold,t";
  for (int i = 0; i < ts.q(); ++i) csv << ",y_" << i << ",prob_" << i << ",pred_" << i;
  csv << '\n';
  Json per_fold = Json::array();
  Index offset = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (folds[f].empty()) throw bestlds::ConfigError("fold " + std::to_string(f) + " is empty");
    const bestlds::TimeSeries test = ts.select_segments(folds[f]);
    if (o.refit && test.length() < 2 * o.k) {
      throw bestlds::ConfigError("fold " + std::to_string(f) + " has " + std::to_string(test.length()) +
                                 " steps, fewer than 2k = " + std::to_string(2 * o.k));
    }
    bestlds::SystemParams params;
    if (o.refit) {
      std::vector<int> train;
      for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
      }
      std::sort(train.begin(), train.end());
      params = bestlds::fit_bestlds(ts.select_segments(train), bestlds::HankelConfig{o.k}, o.p).params;
    } else {
      params = *fixed;
    }
    const bestlds::ChoicePrediction pred = bestlds::predict_choices(params, test, {o.open_loop});
    const Perseverative base = perseverative(test);
    for (Index t = 0; t < test.length(); ++t) {
      csv << f << ',' << offset + t;
      for (int i = 0; i < test.q(); ++i) {
        csv << ',' << test.y(t, i) << ',' << bestlds::io::format_double(pred.probability(t, i)) << ','
            << pred.predicted(t, i);
      }
      csv << '\n';
    }
    offset += test.length();
    per_fold.push_back(Json{{"fold", f},
                            {"steps", test.length()},
                            {"accuracy", pred.accuracy},
                            {"log_evidence_bits", bestlds::log_evidence(params, test)},
                            {"perseverative_accuracy", base.accuracy},
                            {"perseverative_bits", base.bits_per_sample}});
  }
  bestlds::io::write_file(o.out_csv, csv.str());
  Json meta{{"command", "predict"}, {"params", o.params}, {"data", o.data}, {"folds", o.folds},
            {"open_loop", o.open_loop}, {"refit", o.refit}, {"k", o.k}, {"p", o.p}};
  bestlds::io::write_json(o.out_json, Json{{"metadata", meta}, {"folds", per_fold}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probit-Bernoulli LDS identification toolkit"};
  app.require_subcommand(1);

  SimulateOpts sim;
  auto* s = app.add_subcommand("simulate", "Sample a preset or a saved system");
  s->add_option("--preset", sim.preset, "Preset A-G");
  s->add_option("--params", sim.params_path, "Params JSON to simulate instead of a preset");
  s->add_option("-N,--n", sim.n, "Number of time steps")->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "RNG seed");
  s->add_option("--trials", sim.trials, "Equal-length trials with fresh initial states")->check(CLI::PositiveNumber);
  s->add_flag("--no-normalize", sim.no_normalize, "Keep raw emission scale");
  s->add_option("--rotation-radius", sim.rotation_radius, "Radius for rotation presets D, E, G");
  s->add_option("--out-csv", sim.out_csv, "Output time series CSV");
  s->add_option("--out-params", sim.out_params, "Output params JSON");

  FitOpts fit;
  auto* f = app.add_subcommand("fit", "Identify a system from a CSV time series");
  f->add_option("--data", fit.data, "Input CSV")->required();
  f->add_option("-k", fit.k, "Hankel depth");
  f->add_option("-p", fit.p, "Latent dimension");
  f->add_option("--baseline", fit.baseline, "bestlds or gaussian");
  f->add_flag("--spectrum-only", fit.spectrum_only, "Only emit the Hankel singular values");
  f->add_flag("--em", fit.em, "Refine with Laplace-EM");
  f->add_option("--init", fit.init, "EM initializer: bestlds, gaussian or random");
  f->add_option("--em-max-iters", fit.em_max_iters, "EM iteration cap");
  f->add_option("--seed", fit.seed, "Seed for the random initializer");
  f->add_option("--truth", fit.truth, "True params JSON; adds an error report");
  f->add_option("--out", fit.out, "Output JSON");
  f->add_option("--em-trace", fit.em_trace, "EM trace CSV");

  BenchOpts bench;
  auto* b = app.add_subcommand("benchmark", "Run a simulation sweep");
  b->add_option("--mode", bench.mode,
                "recovery-curves, table1, em-comparison, svd-spectrum, runtime, ablation-nonunit, ablation-momconv");
  b->add_option("--preset", bench.preset, "Preset A-G");
  b->add_option("-N,--n", bench.n_grid, "N grid")->delimiter(',');
  b->add_option("--repeats", bench.repeats, "Repeats per cell");
  b->add_option("--seed", bench.seed, "Base seed");
  b->add_option("-k", bench.k, "Hankel depth");
  b->add_option("-p", bench.p, "Latent dimension (0: preset value)");
  b->add_option("--workers", bench.workers, "Worker threads");
  b->add_option("--trials", bench.trials, "Trials for table1");
  b->add_option("--k-grid", bench.k_grid, "Hankel depths for svd-spectrum")->delimiter(',');
  b->add_option("--random-inits", bench.random_inits, "Random initializations for em-comparison");
  b->add_option("--em-max-iters", bench.em_max_iters, "EM iteration cap");
  b->add_flag("--no-normalize", bench.no_normalize, "Keep raw emission scale");
  b->add_option("--rotation-radius", bench.rotation_radius, "Radius for rotation presets D, E, G");
  b->add_flag("--fixed-system", bench.fixed_system, "Use one system for every repeat");
  b->add_option("--out-prefix", bench.out_prefix, "Prefix for _rows.csv, _aggregates.csv and .json");

  ImpulseOpts imp;
  auto* i = app.add_subcommand("impulse", "Impulse responses of a fitted system");
  i->add_option("--params", imp.params, "Params JSON")->required();
  i->add_option("--horizon", imp.horizon, "Number of steps");
  i->add_option("--out", imp.out, "Output CSV");

  PredictOpts pred;
  auto* pr = app.add_subcommand("predict", "Cross-validated choice prediction");
  pr->add_option("--params", pred.params, "Params JSON evaluated on every fold");
  pr->add_option("--data", pred.data, "Input CSV")->required();
  pr->add_option("--folds", pred.folds, "Number of contiguous folds");
  pr->add_flag("--open-loop", pred.open_loop, "Disable the filter measurement update");
  pr->add_flag("--refit", pred.refit, "Fit on the other folds before predicting each fold");
  pr->add_option("-k", pred.k, "Hankel depth for --refit");
  pr->add_option("-p", pred.p, "Latent dimension for --refit");
  pr->add_option("--out-csv", pred.out_csv, "Per-step predictions CSV");
  pr->add_option("--out-json", pred.out_json, "Per-fold summary JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (s->parsed()) cmd_simulate(sim);
    if (f->parsed()) cmd_fit(fit);
    if (b->parsed()) cmd_benchmark(bench);
    if (i->parsed()) cmd_impulse(imp);
    if (pr->parsed()) cmd_predict(pred);
  } catch (const bestlds::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
