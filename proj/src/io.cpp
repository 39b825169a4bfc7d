#include "bestlds/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "bestlds/errors.hpp"

namespace bestlds::io {
namespace {

double parse_double(std::string_view text, std::size_t line) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    std::ostringstream msg;
    msg << "CSV line " << line << ": cannot parse '" << text << "' as a number";
    throw IoError(msg.str());
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

Json vector_to_json(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(x);
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw IoError("cannot format number");
  return std::string(buf, ptr);
}

Json matrix_to_json(const Mat& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Mat matrix_from_json(const Json& j, const std::string& name) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const Json& data = j.at("data");
    if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw IoError("matrix '" + name + "' has " + std::to_string(data.size()) + " entries, expected " +
                    std::to_string(rows * cols));
    }
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)].get<double>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("matrix '" + name + "': " + e.what());
  }
}

Json params_to_json(const SystemParams& params, const Json& metadata) {
  const Dimensions d = params.dims();
  Json j;
  j["p"] = d.p;
  j["q"] = d.q;
  j["m"] = d.m;
  j["A"] = matrix_to_json(params.A);
  j["B"] = matrix_to_json(params.B);
  j["C"] = matrix_to_json(params.C);
  j["D"] = matrix_to_json(params.D);
  j["Q"] = matrix_to_json(params.Q);
  j["mu0"] = matrix_to_json(params.mu0);
  j["Q0"] = matrix_to_json(params.Q0);
  j["metadata"] = metadata;
  return j;
}

SystemParams params_from_json(const Json& j) {
  SystemParams s;
  try {
    s.A = matrix_from_json(j.at("A"), "A");
    s.B = matrix_from_json(j.at("B"), "B");
    s.C = matrix_from_json(j.at("C"), "C");
    s.D = matrix_from_json(j.at("D"), "D");
    s.Q = matrix_from_json(j.at("Q"), "Q");
    s.mu0 = matrix_from_json(j.at("mu0"), "mu0");
    s.Q0 = matrix_from_json(j.at("Q0"), "Q0");
    const Dimensions d{j.at("p").get<int>(), j.at("q").get<int>(), j.at("m").get<int>()};
    if (!(d == s.dims())) throw IoError("params JSON: declared dims disagree with matrix shapes");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("params JSON: ") + e.what());
  }
  s.validate();
  return s;
}

Json moments_to_json(const ConvertedMoments& cm) {
  Json j;
  j["k"] = cm.k;
  j["q"] = cm.q;
  j["m"] = cm.m;
  j["lag_pooled"] = cm.lag_pooled;
  j["mu"] = matrix_to_json(cm.mu);
  j["Sigma"] = matrix_to_json(cm.Sigma);
  j["R"] = matrix_to_json(cm.R);
  j["min_eigenvalue"] = cm.min_eigenvalue;
  j["repaired"] = cm.repaired;
  j["robust_fallbacks"] = cm.robust_fallbacks;
  j["clamped_rates"] = cm.clamped_rates;
  return j;
}

ConvertedMoments moments_from_json(const Json& j) {
  try {
    ConvertedMoments cm;
    cm.k = j.at("k").get<int>();
    cm.q = j.at("q").get<int>();
    cm.m = j.at("m").get<int>();
    cm.lag_pooled = j.value("lag_pooled", false);
    cm.mu = matrix_from_json(j.at("mu"), "mu");
    cm.Sigma = matrix_from_json(j.at("Sigma"), "Sigma");
    cm.R = matrix_from_json(j.at("R"), "R");
    cm.min_eigenvalue = j.value("min_eigenvalue", 0.0);
    cm.repaired = j.value("repaired", false);
    cm.robust_fallbacks = j.value("robust_fallbacks", 0);
    cm.clamped_rates = j.value("clamped_rates", 0);
    return cm;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("moments JSON: ") + e.what());
  }
}

Json ssid_to_json(const SsidResult& result, const Json& metadata) {
  Json j = params_to_json(result.params, metadata);
  j["singular_values"] = vector_to_json(result.singular_values);
  j["chosen_p"] = result.chosen_p;
  j["seconds"] = result.seconds;
  const SsidDiagnostics& d = result.diagnostics;
  j["diagnostics"] = Json{{"weighting", d.weighting},
                          {"a_route", d.a_route},
                          {"cond_future_inputs", d.cond_future_inputs},
                          {"cond_past_projection", d.cond_past_projection},
                          {"state_residual_norm", d.state_residual_norm},
                          {"elbow_advisory", d.elbow},
                          {"scale_restored", d.scale_restored},
                          {"probit_signal_fraction", vector_to_json(d.probit_signal_fraction)}};
  return j;
}

Json error_report_to_json(const ErrorReport& report) {
  Json j;
  j["eig_error_A"] = report.eig_error_A;
  j["subspace_angle_C"] = report.subspace_angle_C ? Json(*report.subspace_angle_C) : Json(nullptr);
  j["elem_error_D"] = report.elem_error_D;
  j["gain_error"] = report.gain_error;
  return j;
}

std::string em_trace_csv(const EMTrace& trace) {
  std::ostringstream out;
  out << "iter,elbo_bits,gain_delta,seconds\n";
  for (const auto& it : trace.iterations) {
    out << it.iter << ',' << format_double(it.elbo_bits) << ',' << format_double(it.gain_delta) << ','
        << format_double(it.seconds) << '\n';
  }
  return out.str();
}

Json em_summary_to_json(const EMTrace& trace) {
  Json j;
  j["iters"] = trace.iters;
  j["converged"] = trace.converged;
  j["converged_iter"] = trace.converged_iter;
  j["conv_mode"] = trace.mode == ConvMode::kGainDelta ? "gain_delta" : "evidence_delta";
  j["flagged_decreases"] = trace.flagged_decreases;
  j["init_seconds"] = trace.init_seconds;
  j["em_seconds"] = trace.em_seconds;
  j["final_elbo_bits"] = trace.iterations.empty() ? Json(nullptr) : Json(trace.iterations.back().elbo_bits);
  Json elbo = Json::array();
  Json delta = Json::array();
  for (const EMIteration& it : trace.iterations) {
    elbo.push_back(it.elbo_bits);
    delta.push_back(it.gain_delta);
  }
  j["elbo_bits"] = std::move(elbo);
  j["gain_delta"] = std::move(delta);
  j["params"] = params_to_json(trace.params);
  return j;
}

std::string timeseries_to_csv(const TimeSeries& ts) {
  std::ostringstream out;
  const int m = ts.m();
  const int q = ts.q();
  const bool trials = !ts.trial_bounds.empty();
  bool first = true;
  auto sep = [&] {
    if (!first) out << ',';
    first = false;
  };
  for (int j = 0; j < m; ++j) sep(), out << "u_" << j;
  for (int i = 0; i < q; ++i) sep(), out << "y_" << i;
  if (trials) sep(), out << "trial_id";
  out << '\n';

  std::size_t trial = 0;
  for (Eigen::Index t = 0; t < ts.length(); ++t) {
    while (trials && trial + 1 < ts.trial_bounds.size() && ts.trial_bounds[trial + 1] <= t) ++trial;
    first = true;
    for (int j = 0; j < m; ++j) sep(), out << format_double(ts.u(t, j));
    for (int i = 0; i < q; ++i) sep(), out << (ts.y(t, i) > 0.5 ? '1' : '0');
    if (trials) sep(), out << trial;
    out << '\n';
  }
  return out.str();
}

TimeSeries timeseries_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  std::vector<int> u_cols, y_cols;
  int trial_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string_view h = header[c];
    auto index_of = [&](std::string_view prefix) {
      return static_cast<std::size_t>(std::stoul(std::string(h.substr(prefix.size()))));
    };
    if (h.starts_with("u_")) {
      if (index_of("u_") != u_cols.size()) throw IoError("CSV header: u_ columns must be numbered from 0 in order");
      u_cols.push_back(static_cast<int>(c));
    } else if (h.starts_with("y_")) {
      if (index_of("y_") != y_cols.size()) throw IoError("CSV header: y_ columns must be numbered from 0 in order");
      y_cols.push_back(static_cast<int>(c));
    } else if (h == "trial_id") {
      trial_col = static_cast<int>(c);
    } else {
      throw IoError("CSV header: unknown column '" + std::string(h) + "'");
    }
  }
  if (y_cols.empty()) throw IoError("CSV header has no y_ columns");

  std::vector<std::vector<double>> rows;
  std::vector<double> trial_ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw IoError("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                    " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    for (int c : u_cols) row.push_back(parse_double(fields[c], line_no));
    for (int c : y_cols) {
      const double v = parse_double(fields[c], line_no);
      if (v != 0.0 && v != 1.0) {
        throw IoError("CSV line " + std::to_string(line_no) + ": binary column holds " + format_double(v) +
                      "; only 0 and 1 are accepted");
      }
      row.push_back(v);
    }
    if (trial_col >= 0) trial_ids.push_back(parse_double(fields[trial_col], line_no));
    rows.push_back(std::move(row));
  }

  TimeSeries ts;
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index m = static_cast<Eigen::Index>(u_cols.size());
  const Eigen::Index q = static_cast<Eigen::Index>(y_cols.size());
  ts.u.resize(n, m);
  ts.y.resize(n, q);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (Eigen::Index j = 0; j < m; ++j) ts.u(t, j) = rows[t][j];
    for (Eigen::Index i = 0; i < q; ++i) ts.y(t, i) = rows[t][m + i];
  }
  if (trial_col >= 0 && n > 0) {
    ts.trial_bounds.push_back(0);
    for (Eigen::Index t = 1; t < n; ++t) {
      if (trial_ids[t] != trial_ids[t - 1]) ts.trial_bounds.push_back(t);
    }
  }
  ts.validate();
  return ts;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("failed writing '" + path + "'");
}

Json read_json(const std::string& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const std::string& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

}  // namespace bestlds::io
