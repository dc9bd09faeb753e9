#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "uavedge/models.hpp"
#include "uavedge/scenario.hpp"

namespace uavedge {

/// Jitter offsets, samples x points x 3, row-major.
struct JitterTensor {
  int samples = 0;
  int points = 0;
  std::vector<double> data;

  Vec3 at(int sample, int point) const {
    const size_t i = 3 * (static_cast<size_t>(sample) * static_cast<size_t>(points) + static_cast<size_t>(point));
    return Vec3(data[i], data[i + 1], data[i + 2]);
  }
};

/// i.i.d. N(0, sigma^2) per coordinate for waypoints 0..N. Sample i is drawn
/// from RandomStream(seed, i), so any subset of samples can be regenerated.
JitterTensor sample_jitter(std::uint64_t seed, int samples, int N, double sigma);

struct Histogram {
  std::vector<double> low, high;
  std::vector<long long> counts;
};

/// Equal-width bins over [min, max]; throws std::invalid_argument on empty
/// input or bin_count < 1.
Histogram histogram(const std::vector<double>& values, int bin_count);

/// Streaming variant for data that is produced twice (range pass, then fill).
class HistogramBuilder {
 public:
  void observe_range(double v);
  void start_fill(int bin_count);
  void add(double v);
  Histogram result() const;

 private:
  double lo_ = 0.0, hi_ = 0.0;
  bool seen_ = false;
  Histogram h_;
};

void write_histogram_csv(std::ostream& out, const Histogram& h);

struct CompletionStats {
  int slot = 0;
  int node = 0;
  double planned_bits = 0.0;
  double min = 0.0;
  double mean = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
  double violation_freq = 0.0;  // fraction of samples with ratio < 1
};

struct ValidationReport {
  int samples = 0;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  std::vector<double> speed_violation_freq;  // per slot
  double worst_speed_freq = 0.0;
  int worst_speed_slot = -1;
  std::vector<CompletionStats> completion;  // pairs with planned offload
  double worst_offload_freq = 0.0;
  double mean_completion_ratio = 0.0;  // over all pairs and samples; 0 without offloading
  EnergyBreakdown energy;
  Histogram speed_hist;  // realized speed, m/s
  Histogram ratio_hist;  // completion ratio
};

struct ValidationOptions {
  int bins = 50;
  /// Upper bound on buffered completion ratios (controls memory, not results).
  std::size_t buffer_values = std::size_t{1} << 23;
};

/// Planned offloads below this are ignored by the completion statistics.
inline constexpr double kMinTrackedOffloadBits = 1e-6;

/// Monte Carlo of the realized speed and offloading completion under
/// waypoint jitter with the scenario's deviation. Deterministic in
/// (plan, s, samples, seed). Throws std::invalid_argument when samples < 1.
ValidationReport validate_plan(const Plan& plan, const Scenario& s, int samples, std::uint64_t seed,
                               const ValidationOptions& opts = {});

/// rho + 3 sqrt(rho (1 - rho) / samples)
double frequency_bound(double rho, int samples);

/// True when every speed frequency is within the bound of its slot budget and
/// every offload frequency within the bound of its pair budget.
bool within_budget(const ValidationReport& r, const Scenario& s);

}  // namespace uavedge
