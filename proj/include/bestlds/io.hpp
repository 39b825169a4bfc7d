#pragma once

#include <string>

#include <json.hpp>

#include "bestlds/laplace_em.hpp"
#include "bestlds/metrics.hpp"
#include "bestlds/moments.hpp"
#include "bestlds/ssid.hpp"

namespace bestlds::io {

using Json = nlohmann::ordered_json;

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

Json matrix_to_json(const Mat& m);
Mat matrix_from_json(const Json& j, const std::string& name);

/// {"p","q","m","A",...,"Q0","metadata"}; matrices as {"rows","cols","data"} row-major.
Json params_to_json(const SystemParams& params, const Json& metadata = Json::object());
SystemParams params_from_json(const Json& j);

Json moments_to_json(const ConvertedMoments& cm);
ConvertedMoments moments_from_json(const Json& j);

Json ssid_to_json(const SsidResult& result, const Json& metadata = Json::object());
Json error_report_to_json(const ErrorReport& report);

std::string em_trace_csv(const EMTrace& trace);
Json em_summary_to_json(const EMTrace& trace);

/// Columns u_0..u_{m-1}, y_0..y_{q-1}, plus trial_id when there are trials.
std::string timeseries_to_csv(const TimeSeries& ts);
/// Parses the layout above; a trial_id column defines segment boundaries.
TimeSeries timeseries_from_csv(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& j);

}  // namespace bestlds::io
