#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "leorsma/channel.hpp"
#include "leorsma/geometry.hpp"
#include "leorsma/rates.hpp"
#include "leorsma/socp.hpp"

namespace leorsma::wmmse {

enum class Scheme { Rsma, Sdma };

enum class Variant {
  RsmaScsi,
  SdmaScsi,
  RsmaDcsi,
  SdmaDcsi,
  RsmaNoncoop,
  SdmaNoncoop,
  RsmaIcsi,
  SdmaIcsi,
};

std::string to_string(Variant v);
/// Parses names such as "rsma-scsi"; throws InvalidInput otherwise.
Variant variant_from_string(const std::string& name);
const std::vector<Variant>& all_variants();
Scheme scheme_of(Variant v);
/// False only for the instantaneous-CSI baselines.
bool uses_statistics(Variant v);

struct OptimizerSettings {
  int max_iters = 50;
  double rel_obj_tol = 1e-5;
  double solver_tol = 1e-7;
  double power_budget = 31.622776601683793;  // W (15 dBW)
  Variant variant = Variant::RsmaScsi;
  /// Restrict each satellite block to the span of its channel rows.
  bool reduce_basis = true;
  /// iCSI: number of designed realizations averaged per instance.
  int design_realizations = 50;
  std::uint64_t seed = 1;

  void validate() const;
};

struct IterationTrace {
  /// UB max-min rate after each iteration; entry 0 is the initial point.
  std::vector<double> objective;
  /// Epigraph value t returned by each subproblem.
  std::vector<double> subproblem_objective;
  std::vector<RVector> satellite_power;  // W, one entry per objective entry
  std::vector<socp::Status> status;
  std::vector<int> solver_iterations;
  std::vector<double> kkt_residual;  // max(primal, dual, relative gap) per solve

  int iterations() const { return static_cast<int>(status.size()); }
};

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(int iteration, socp::Status status, const std::string& what)
      : std::runtime_error(what), iteration_(iteration), status_(status) {}
  int iteration() const { return iteration_; }
  socp::Status status() const { return status_; }

 private:
  int iteration_;
  socp::Status status_;
};

/// Squared Frobenius norm of the rows of satellite s.
double per_satellite_power(const rates::PrecodingMatrix& q, int s);
RVector per_satellite_powers(const rates::PrecodingMatrix& q);

/// Masked dominant-eigenvector start with every non-empty satellite block at
/// power P(1 - 1e-6). Throws InvalidInput when no stream reaches any satellite.
rates::PrecodingMatrix initialize_precoder(std::span<const CMatrix> channels, const rates::Mask& mask,
                                           const rates::StreamLayout& layout, Scheme scheme, double power);

/// Orthonormal per-satellite bases for the precoder blocks.
struct SubproblemBasis {
  int sat_antennas = 0;
  std::vector<CMatrix> per_sat;  // M x r_s

  static SubproblemBasis identity(int num_sats, int sat_antennas);
  /// Span of the satellite-s columns of every channel.
  static SubproblemBasis channel_span(std::span<const CMatrix> channels, int num_sats);
};

struct Subproblem {
  socp::ConicProgram program;
  SubproblemBasis basis;
  rates::Mask mask;
  rates::StreamLayout layout;
  Scheme scheme = Scheme::Rsma;
  double power = 0.0;
  int num_uts = 0;
  std::vector<int> block_offset;  // column * S + s; -1 when the block has no variables
  int rc_offset = -1;             // -1 for SDMA
  int rp_offset = -1;
  int t_offset = -1;

  /// Offset of the (Re, Im) pair of basis coefficient i of column j at satellite s.
  int coef_index(int column, int s, int i) const;
  /// Precoder at a solver point; masked entries snapped to zero and any
  /// over-budget satellite block scaled back onto the power sphere.
  rates::PrecodingMatrix precoder(const RVector& x) const;
  RVector common_rates(const RVector& x) const;
  RVector private_rates(const RVector& x) const;
  /// Solver point representing Q (projected onto the basis) with the given rates.
  RVector point(const rates::PrecodingMatrix& q, const RVector& r_c, const RVector& r_p, double t) const;
};

/// Convex subproblem for fixed combiners and weights.
Subproblem build_subproblem(const rates::CombinerSet& uv, std::span<const CMatrix> channels,
                            const rates::Mask& mask, const rates::StreamLayout& layout, Scheme scheme,
                            double power, double noise_variance, const SubproblemBasis& basis);

struct WmmseResult {
  rates::PrecodingMatrix q;
  RVector r_c;
  RVector r_p;
  rates::StreamRates upper_bounds;  // rates at q through the design channels
  rates::Allocation allocation;
  IterationTrace trace;
  bool converged = false;
};

/// Alternating optimization over the design channels (effective or instantaneous).
/// `start` replaces the default initial precoder; it must respect the mask and budget.
WmmseResult wmmse_optimize(std::span<const CMatrix> channels, const rates::Mask& mask,
                           const rates::StreamLayout& layout, const OptimizerSettings& settings,
                           double noise_variance, const rates::PrecodingMatrix* start = nullptr);

/// Inputs shared by every variant: normalized true statistics and the association.
struct VariantInputs {
  channel::ChannelStatistics stats;
  rates::Mask mask;
  /// Nearest satellite of every UT (non-cooperative partition).
  std::vector<int> nearest_satellite;

  static VariantInputs from(const channel::ChannelStatistics& stats, const geometry::Scenario& scenario);
};

struct VariantResult {
  Variant variant = Variant::RsmaScsi;
  rates::PrecodingMatrix q;  // empty for iCSI
  /// UB max-min rate of q under the true statistics; for iCSI the mean
  /// optimized instantaneous max-min rate.
  double mmfr_ub = 0.0;
  /// iCSI only: mean per-realization max-min rate and its standard error.
  double icsi_mmfr = 0.0;
  double icsi_stderr = 0.0;
  int iterations = 0;
  std::vector<IterationTrace> traces;
};

VariantResult optimize_variant(const VariantInputs& inputs, const OptimizerSettings& settings);

/// Non-cooperative layout: one common stream per satellite that is nearest to some UT.
rates::StreamLayout noncooperative_layout(const std::vector<int>& nearest_satellite, int num_sats);

}  // namespace leorsma::wmmse
