#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "leorsma/channel.hpp"
#include "leorsma/geometry.hpp"
#include "leorsma/rates.hpp"
#include "leorsma/wmmse.hpp"

namespace leorsma::io {

using nlohmann::json;

inline constexpr const char* kStatisticsSchema = "leorsma-channel-statistics/1";
inline constexpr const char* kEffectiveSchema = "leorsma-effective-channel/1";

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);
/// Strict inverse of format_double; throws InvalidInput on trailing junk.
double parse_double(std::string_view text);

json complex_to_json(cplx z);  // [re, im]
cplx complex_from_json(const json& j);
json vector_to_json(const CVector& v);
CVector vector_from_json(const json& j);
json matrix_to_json(const CMatrix& m);  // row-major list of rows
CMatrix matrix_from_json(const json& j);
json real_matrix_to_json(const RMatrix& m);

json to_json(const geometry::ScenarioConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
geometry::ScenarioConfig scenario_config_from_json(const json& j);
json to_json(const channel::ArrayConfig& c);
channel::ArrayConfig array_config_from_json(const json& j);

json to_json(const geometry::Scenario& s);
json to_json(const channel::ChannelStatistics& s);
channel::ChannelStatistics statistics_from_json(const json& j);
json to_json(const channel::EffectiveChannel& e);

json to_json(const rates::RateReport& r);
json to_json(const rates::PrecodingMatrix& q);
json to_json(const wmmse::IterationTrace& t);

/// Throws InvalidInput naming the first key of `j` outside `allowed`.
void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where);

}  // namespace leorsma::io
