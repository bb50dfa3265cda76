#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "leorsma/wmmse.hpp"

namespace leorsma::wmmse {

namespace {

constexpr std::array<std::pair<Variant, const char*>, 8> kNames{{
    {Variant::RsmaScsi, "rsma-scsi"},
    {Variant::SdmaScsi, "sdma-scsi"},
    {Variant::RsmaDcsi, "rsma-dcsi"},
    {Variant::SdmaDcsi, "sdma-dcsi"},
    {Variant::RsmaNoncoop, "rsma-noncoop"},
    {Variant::SdmaNoncoop, "sdma-noncoop"},
    {Variant::RsmaIcsi, "rsma-icsi"},
    {Variant::SdmaIcsi, "sdma-icsi"},
}};

constexpr std::uint64_t kIcsiStream = 0x1c510000ULL;

}  // namespace

std::string to_string(Variant v) {
  for (const auto& [var, name] : kNames) {
    if (var == v) return name;
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  for (const auto& [var, n] : kNames) {
    if (name == n) return var;
  }
  throw InvalidInput("unknown variant '" + name + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = [] {
    std::vector<Variant> out;
    for (const auto& [var, name] : kNames) out.push_back(var);
    return out;
  }();
  return v;
}

Scheme scheme_of(Variant v) {
  switch (v) {
    case Variant::RsmaScsi:
    case Variant::RsmaDcsi:
    case Variant::RsmaNoncoop:
    case Variant::RsmaIcsi: return Scheme::Rsma;
    default: return Scheme::Sdma;
  }
}

bool uses_statistics(Variant v) { return v != Variant::RsmaIcsi && v != Variant::SdmaIcsi; }

rates::StreamLayout noncooperative_layout(const std::vector<int>& nearest_satellite, int num_sats) {
  std::vector<int> group_of_sat(static_cast<std::size_t>(num_sats), -1);
  rates::StreamLayout layout;
  layout.num_common = 0;
  for (int s : nearest_satellite) {
    if (s < 0 || s >= num_sats) throw InvalidInput("nearest satellite out of range");
  }
  for (int s = 0; s < num_sats; ++s) {
    if (std::find(nearest_satellite.begin(), nearest_satellite.end(), s) != nearest_satellite.end()) {
      group_of_sat[static_cast<std::size_t>(s)] = layout.num_common++;
    }
  }
  for (int s : nearest_satellite) layout.group_of_ut.push_back(group_of_sat[static_cast<std::size_t>(s)]);
  return layout;
}

VariantInputs VariantInputs::from(const channel::ChannelStatistics& stats, const geometry::Scenario& scenario) {
  if (stats.num_uts != scenario.num_uts() || stats.num_sats != scenario.num_satellites()) {
    throw InvalidInput("statistics do not match the scenario");
  }
  VariantInputs in;
  in.stats = stats.normalized();
  in.mask = rates::mask_from_association(scenario.association);
  for (int k = 0; k < scenario.num_uts(); ++k) in.nearest_satellite.push_back(scenario.nearest_satellite(k));
  return in;
}

namespace {

double true_upper_bound(const channel::ChannelStatistics& stats, const rates::PrecodingMatrix& q) {
  const auto eff = channel::effective_channels(stats);
  const auto ub = rates::rate_upper_bounds(eff, q, stats.noise_variance);
  return rates::allocate_common_rate(ub.common, ub.priv, q.layout).mmfr;
}

VariantResult design_statistical(const VariantInputs& in, const OptimizerSettings& settings,
                                 channel::CsiModel model) {
  const auto design = rates::effective_matrices(channel::effective_channels(in.stats, model));
  auto res = wmmse_optimize(design, in.mask, rates::StreamLayout::single(in.stats.num_uts), settings,
                            in.stats.noise_variance);
  VariantResult out;
  out.variant = settings.variant;
  out.q = std::move(res.q);
  out.mmfr_ub = model == channel::CsiModel::Statistical ? res.allocation.mmfr : true_upper_bound(in.stats, out.q);
  out.iterations = res.trace.iterations();
  out.traces.push_back(std::move(res.trace));
  return out;
}

VariantResult design_noncooperative(const VariantInputs& in, const OptimizerSettings& settings) {
  const int num_sats = in.stats.num_sats;
  const int num_uts = in.stats.num_uts;
  const int m = in.stats.sat_antennas;
  const auto layout = noncooperative_layout(in.nearest_satellite, num_sats);
  rates::Mask mask = rates::Mask::Constant(num_sats, num_uts, false);
  for (int k = 0; k < num_uts; ++k) mask(in.nearest_satellite[static_cast<std::size_t>(k)], k) = true;

  VariantResult out;
  out.variant = settings.variant;
  out.q = rates::PrecodingMatrix::zeros(num_sats, m, mask, layout);
  for (int s = 0; s < num_sats; ++s) {
    std::vector<int> uts;
    for (int k = 0; k < num_uts; ++k) {
      if (in.nearest_satellite[static_cast<std::size_t>(k)] == s) uts.push_back(k);
    }
    if (uts.empty()) continue;
    const auto sub = in.stats.subset(uts, {s});
    const auto design = rates::effective_matrices(channel::effective_channels(sub));
    const rates::Mask sub_mask = rates::Mask::Constant(1, static_cast<Eigen::Index>(uts.size()), true);
    auto res = wmmse_optimize(design, sub_mask, rates::StreamLayout::single(static_cast<int>(uts.size())),
                              settings, sub.noise_variance);
    const int group = layout.group_of_ut[static_cast<std::size_t>(uts.front())];
    out.q.q.block(s * m, group, m, 1) = res.q.q.col(0);
    for (std::size_t i = 0; i < uts.size(); ++i) {
      out.q.q.block(s * m, layout.private_column(uts[i]), m, 1) =
          res.q.q.col(res.q.layout.private_column(static_cast<int>(i)));
    }
    out.iterations = std::max(out.iterations, res.trace.iterations());
    out.traces.push_back(std::move(res.trace));
  }
  out.mmfr_ub = true_upper_bound(in.stats, out.q);
  return out;
}

VariantResult design_instantaneous(const VariantInputs& in, const OptimizerSettings& settings) {
  const channel::RealizationSampler sampler(in.stats);
  const int n = settings.design_realizations;
  RVector mmfr(n);
  VariantResult out;
  out.variant = settings.variant;
  for (int r = 0; r < n; ++r) {
    Rng rng = substream(settings.seed, kIcsiStream + static_cast<std::uint64_t>(r));
    const auto real = sampler.sample_realizations(rng);
    std::vector<CMatrix> h;
    h.reserve(real.size());
    for (const auto& x : real) h.push_back(x.h);
    auto res = wmmse_optimize(h, in.mask, rates::StreamLayout::single(in.stats.num_uts), settings,
                              in.stats.noise_variance);
    mmfr(r) = res.allocation.mmfr;
    out.iterations = std::max(out.iterations, res.trace.iterations());
    out.traces.push_back(std::move(res.trace));
  }
  out.icsi_mmfr = mmfr.mean();
  out.mmfr_ub = out.icsi_mmfr;
  if (n > 1) {
    const double var = (mmfr.array() - out.icsi_mmfr).square().sum() / static_cast<double>(n - 1);
    out.icsi_stderr = std::sqrt(var / static_cast<double>(n));
  }
  return out;
}

}  // namespace

VariantResult optimize_variant(const VariantInputs& inputs, const OptimizerSettings& settings) {
  settings.validate();
  inputs.stats.validate();
  switch (settings.variant) {
    case Variant::RsmaScsi:
    case Variant::SdmaScsi: return design_statistical(inputs, settings, channel::CsiModel::Statistical);
    case Variant::RsmaDcsi:
    case Variant::SdmaDcsi: return design_statistical(inputs, settings, channel::CsiModel::Directional);
    case Variant::RsmaNoncoop:
    case Variant::SdmaNoncoop: return design_noncooperative(inputs, settings);
    case Variant::RsmaIcsi:
    case Variant::SdmaIcsi: return design_instantaneous(inputs, settings);
  }
  throw InvalidInput("unknown variant");
}

}  // namespace leorsma::wmmse
