#include "leorsma/io.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace leorsma::io {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw NumericalError("cannot format double");
  return {buf, res.ptr};
}

double parse_double(std::string_view text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw InvalidInput("not a number: '" + std::string(text) + "'");
  }
  return v;
}

json complex_to_json(cplx z) { return json::array({z.real(), z.imag()}); }

cplx complex_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidInput("complex numbers are [re, im] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

json vector_to_json(const CVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
  return out;
}

CVector vector_from_json(const json& j) {
  if (!j.is_array()) throw InvalidInput("expected a complex vector");
  CVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = complex_from_json(j[i]);
  return v;
}

json matrix_to_json(const CMatrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

CMatrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw InvalidInput("expected a complex matrix");
  if (j.empty()) return CMatrix(0, 0);
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  CMatrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) throw InvalidInput("ragged complex matrix");
    m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r]).transpose();
  }
  return m;
}

json real_matrix_to_json(const RMatrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidInput(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidInput("unknown key '" + key + "' in " + where);
  }
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw InvalidInput(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace

json to_json(const geometry::ScenarioConfig& c) {
  return {{"earth_radius_km", c.earth_radius_km}, {"altitude_km", c.altitude_km},
          {"max_nadir_deg", c.max_nadir_deg},     {"num_satellites", c.num_satellites},
          {"num_uts", c.num_uts},                 {"satellite_spacing_deg", c.satellite_spacing_deg},
          {"rng_seed", c.rng_seed}};
}

geometry::ScenarioConfig scenario_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"earth_radius_km", "altitude_km", "max_nadir_deg", "num_satellites", "num_uts",
                       "satellite_spacing_deg", "rng_seed"},
                      "scenario");
  geometry::ScenarioConfig c;
  read(j, "earth_radius_km", c.earth_radius_km);
  read(j, "altitude_km", c.altitude_km);
  read(j, "max_nadir_deg", c.max_nadir_deg);
  read(j, "num_satellites", c.num_satellites);
  read(j, "num_uts", c.num_uts);
  read(j, "satellite_spacing_deg", c.satellite_spacing_deg);
  read(j, "rng_seed", c.rng_seed);
  c.validate();
  return c;
}

json to_json(const channel::ArrayConfig& c) {
  return {{"sat_x", c.sat_x},
          {"sat_y", c.sat_y},
          {"ut_x", c.ut_x},
          {"ut_y", c.ut_y},
          {"sat_spacing_x", c.sat_spacing_x},
          {"sat_spacing_y", c.sat_spacing_y},
          {"ut_spacing_x", c.ut_spacing_x},
          {"ut_spacing_y", c.ut_spacing_y},
          {"carrier_hz", c.carrier_hz},
          {"bandwidth_hz", c.bandwidth_hz},
          {"noise_temperature_k", c.noise_temperature_k},
          {"sat_gain_dbi", c.sat_gain_dbi},
          {"ut_gain_dbi", c.ut_gain_dbi},
          {"rician_linear", c.rician.linear}};
}

channel::ArrayConfig array_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"sat_x", "sat_y", "ut_x", "ut_y", "sat_spacing_x", "sat_spacing_y", "ut_spacing_x",
                       "ut_spacing_y", "carrier_hz", "bandwidth_hz", "noise_temperature_k", "sat_gain_dbi",
                       "ut_gain_dbi", "rician_linear"},
                      "arrays");
  channel::ArrayConfig c;
  read(j, "sat_x", c.sat_x);
  read(j, "sat_y", c.sat_y);
  read(j, "ut_x", c.ut_x);
  read(j, "ut_y", c.ut_y);
  read(j, "sat_spacing_x", c.sat_spacing_x);
  read(j, "sat_spacing_y", c.sat_spacing_y);
  read(j, "ut_spacing_x", c.ut_spacing_x);
  read(j, "ut_spacing_y", c.ut_spacing_y);
  read(j, "carrier_hz", c.carrier_hz);
  read(j, "bandwidth_hz", c.bandwidth_hz);
  read(j, "noise_temperature_k", c.noise_temperature_k);
  read(j, "sat_gain_dbi", c.sat_gain_dbi);
  read(j, "ut_gain_dbi", c.ut_gain_dbi);
  read(j, "rician_linear", c.rician.linear);
  c.validate();
  return c;
}

json to_json(const geometry::Scenario& s) {
  auto positions = [](const std::vector<Vec3>& v) {
    json out = json::array();
    for (const auto& p : v) out.push_back({p.x(), p.y(), p.z()});
    return out;
  };
  return {{"config", to_json(s.config)},
          {"max_slant_range_km", s.max_slant_range_km},
          {"satellite_spacing_deg", s.satellite_spacing_deg},
          {"satellite_positions_km", positions(s.satellite_positions)},
          {"ut_positions_km", positions(s.ut_positions)},
          {"distances_km", real_matrix_to_json(s.distances_km)},
          {"elevations_deg", real_matrix_to_json(s.elevations_deg)},
          {"served_uts", s.association.served_uts},
          {"serving_sats", s.association.serving_sats}};
}

json to_json(const channel::ChannelStatistics& s) {
  json links = json::array();
  for (int k = 0; k < s.num_uts; ++k) {
    for (int sat = 0; sat < s.num_sats; ++sat) {
      const auto& l = s.link(k, sat);
      links.push_back({{"ut", k},
                       {"sat", sat},
                       {"beta", l.beta},
                       {"kappa", l.kappa},
                       {"g", vector_to_json(l.g)},
                       {"d0", vector_to_json(l.d0)},
                       {"sigma", matrix_to_json(l.sigma)}});
    }
  }
  return {{"schema", kStatisticsSchema},
          {"num_uts", s.num_uts},
          {"num_sats", s.num_sats},
          {"sat_antennas", s.sat_antennas},
          {"ut_antennas", s.ut_antennas},
          {"noise_variance", s.noise_variance},
          {"reference_noise_w", s.reference_noise_w},
          {"links", std::move(links)}};
}

channel::ChannelStatistics statistics_from_json(const json& j) {
  if (j.value("schema", std::string()) != kStatisticsSchema) {
    throw InvalidInput(std::string("expected schema ") + kStatisticsSchema);
  }
  channel::ChannelStatistics s;
  try {
    s.num_uts = j.at("num_uts").get<int>();
    s.num_sats = j.at("num_sats").get<int>();
    s.sat_antennas = j.at("sat_antennas").get<int>();
    s.ut_antennas = j.at("ut_antennas").get<int>();
    s.noise_variance = j.at("noise_variance").get<double>();
    s.reference_noise_w = j.at("reference_noise_w").get<double>();
    const auto& links = j.at("links");
    if (links.size() != static_cast<std::size_t>(s.num_uts * s.num_sats)) throw InvalidInput("link count mismatch");
    s.links.resize(links.size());
    for (const auto& l : links) {
      const int k = l.at("ut").get<int>();
      const int sat = l.at("sat").get<int>();
      if (k < 0 || k >= s.num_uts || sat < 0 || sat >= s.num_sats) throw InvalidInput("link index out of range");
      auto& dst = s.link(k, sat);
      dst.beta = l.at("beta").get<double>();
      dst.kappa = l.at("kappa").get<double>();
      dst.g = vector_from_json(l.at("g"));
      dst.d0 = vector_from_json(l.at("d0"));
      dst.sigma = matrix_from_json(l.at("sigma"));
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed channel statistics: ") + e.what());
  }
  s.validate();
  return s;
}

json to_json(const channel::EffectiveChannel& e) {
  return {{"schema", kEffectiveSchema},
          {"h_hat", matrix_to_json(e.h_hat)},
          {"d_hat", matrix_to_json(e.d_hat)},
          {"g_block", matrix_to_json(e.g_block)}};
}

namespace {

std::vector<double> to_std(const RVector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

json to_json(const rates::RateReport& r) {
  return {{"f_c", to_std(r.f_c)},
          {"f_p", to_std(r.f_p)},
          {"f_c_stderr", to_std(r.f_c_stderr)},
          {"f_p_stderr", to_std(r.f_p_stderr)},
          {"common_share", to_std(r.common_share)},
          {"mmfr", r.mmfr},
          {"mmfr_stderr", r.mmfr_stderr},
          {"num_samples", r.num_samples}};
}

json to_json(const rates::PrecodingMatrix& q) {
  json mask = json::array();
  for (Eigen::Index s = 0; s < q.mask.rows(); ++s) {
    json row = json::array();
    for (Eigen::Index k = 0; k < q.mask.cols(); ++k) row.push_back(static_cast<bool>(q.mask(s, k)));
    mask.push_back(std::move(row));
  }
  return {{"sat_antennas", q.sat_antennas},
          {"num_common", q.layout.num_common},
          {"group_of_ut", q.layout.group_of_ut},
          {"mask", std::move(mask)},
          {"q", matrix_to_json(q.q)}};
}

json to_json(const wmmse::IterationTrace& t) {
  json powers = json::array();
  for (const auto& p : t.satellite_power) powers.push_back(to_std(p));
  json status = json::array();
  for (auto s : t.status) status.push_back(socp::to_string(s));
  return {{"objective", t.objective},
          {"subproblem_objective", t.subproblem_objective},
          {"satellite_power_w", std::move(powers)},
          {"status", std::move(status)},
          {"solver_iterations", t.solver_iterations},
          {"kkt_residual", t.kkt_residual}};
}

}  // namespace leorsma::io
