#include "uavedge/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "uavedge/rng.hpp"

namespace uavedge {

namespace {

void draw(std::uint64_t seed, int sample, int points, double sigma, std::vector<Vec3>& out) {
  out.resize(static_cast<size_t>(points));
  RandomStream rng(seed, static_cast<std::uint64_t>(sample));
  for (Vec3& v : out) {
    v.x() = sigma * rng.normal();
    v.y() = sigma * rng.normal();
    v.z() = sigma * rng.normal();
  }
}

struct Pair {
  int n, k;
  double planned;
  double coef;   // tau * slot * B / d_off
  double snr1;   // p * ref_gain / noise
};

double quantile(std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const size_t i = static_cast<size_t>(std::floor(pos));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(i), v.end());
  const double a = v[i];
  if (i + 1 >= v.size()) return a;
  const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(i) + 1, v.end());
  return a + (pos - static_cast<double>(i)) * (b - a);
}

}  // namespace

JitterTensor sample_jitter(std::uint64_t seed, int samples, int N, double sigma) {
  JitterTensor t;
  t.samples = samples;
  t.points = N + 1;
  t.data.reserve(3 * static_cast<size_t>(samples) * static_cast<size_t>(t.points));
  std::vector<Vec3> row;
  for (int i = 0; i < samples; ++i) {
    draw(seed, i, t.points, sigma, row);
    for (const Vec3& v : row) t.data.insert(t.data.end(), {v.x(), v.y(), v.z()});
  }
  return t;
}

void HistogramBuilder::observe_range(double v) {
  if (!seen_) {
    lo_ = hi_ = v;
    seen_ = true;
  } else {
    lo_ = std::min(lo_, v);
    hi_ = std::max(hi_, v);
  }
}

void HistogramBuilder::start_fill(int bin_count) {
  if (bin_count < 1) throw std::invalid_argument("histogram needs at least one bin");
  if (!seen_) throw std::invalid_argument("histogram of an empty sample");
  h_ = Histogram{};
  const double width = (hi_ - lo_) / bin_count;
  for (int b = 0; b < bin_count; ++b) {
    h_.low.push_back(lo_ + b * width);
    h_.high.push_back(b + 1 == bin_count ? hi_ : lo_ + (b + 1) * width);
  }
  h_.counts.assign(static_cast<size_t>(bin_count), 0);
}

void HistogramBuilder::add(double v) {
  const int bins = static_cast<int>(h_.counts.size());
  int b = 0;
  if (hi_ > lo_) b = std::clamp(static_cast<int>((v - lo_) / (hi_ - lo_) * bins), 0, bins - 1);
  ++h_.counts[static_cast<size_t>(b)];
}

Histogram HistogramBuilder::result() const { return h_; }

Histogram histogram(const std::vector<double>& values, int bin_count) {
  if (values.empty()) throw std::invalid_argument("histogram of an empty sample");
  HistogramBuilder b;
  for (double v : values) b.observe_range(v);
  b.start_fill(bin_count);
  for (double v : values) b.add(v);
  return b.result();
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "bin_low,bin_high,count\n";
  out.precision(17);
  for (size_t i = 0; i < h.counts.size(); ++i) out << h.low[i] << ',' << h.high[i] << ',' << h.counts[i] << '\n';
}

double frequency_bound(double rho, int samples) {
  return rho + 3.0 * std::sqrt(rho * (1.0 - rho) / samples);
}

ValidationReport validate_plan(const Plan& plan, const Scenario& s, int samples, std::uint64_t seed,
                               const ValidationOptions& opts) {
  check_dimensions(plan, s);
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  const int N = s.N();
  const double slot = s.time.slot_s();
  const double reach = s.uav.v_max * slot;
  const double sigma = s.robust.jitter_sigma_m;

  std::vector<Pair> pairs;
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < s.K(); ++k) {
      const double d = plan.d_off(n, k);
      if (!(d > kMinTrackedOffloadBits)) continue;
      pairs.push_back({n, k, d, plan.tau(n, k) * slot * s.channel.bandwidth_hz / d,
                       plan.power(n, k) * s.channel.ref_gain / s.channel.noise_power_w});
    }
  }
  auto ratio = [&](const Pair& p, const Vec3& q) {
    const double r2 = std::max((q - s.nodes[static_cast<size_t>(p.k)].position).squaredNorm(), 1.0);
    return p.coef * std::log2(1.0 + p.snr1 / r2);
  };
  auto realized = [&](const std::vector<Vec3>& j, int n) {
    return plan.waypoints[static_cast<size_t>(n)] + j[static_cast<size_t>(n)];
  };

  ValidationReport r;
  r.samples = samples;
  r.seed = seed;
  r.sigma = sigma;
  r.energy = total_energy(plan, s);

  // Pass 1: frequencies, means and histogram ranges.
  std::vector<long long> speed_viol(static_cast<size_t>(N), 0);
  std::vector<long long> ratio_viol(pairs.size(), 0);
  std::vector<double> ratio_sum(pairs.size(), 0.0), ratio_min(pairs.size(), INFINITY);
  HistogramBuilder speed_h, ratio_h;
  std::vector<Vec3> j;
  for (int i = 0; i < samples; ++i) {
    draw(seed, i, N + 1, sigma, j);
    for (int n = 0; n < N; ++n) {
      const double dist = (realized(j, n + 1) - realized(j, n)).norm();
      if (dist > reach) ++speed_viol[static_cast<size_t>(n)];
      speed_h.observe_range(dist / slot);
    }
    for (size_t p = 0; p < pairs.size(); ++p) {
      const double c = ratio(pairs[p], realized(j, pairs[p].n + 1));
      if (c < 1.0) ++ratio_viol[p];
      ratio_sum[p] += c;
      ratio_min[p] = std::min(ratio_min[p], c);
      ratio_h.observe_range(c);
    }
  }
  r.speed_violation_freq.resize(static_cast<size_t>(N));
  for (int n = 0; n < N; ++n) {
    const double f = static_cast<double>(speed_viol[static_cast<size_t>(n)]) / samples;
    r.speed_violation_freq[static_cast<size_t>(n)] = f;
    if (r.worst_speed_slot < 0 || f > r.worst_speed_freq) {
      r.worst_speed_freq = f;
      r.worst_speed_slot = n;
    }
  }
  double total = 0.0;
  for (size_t p = 0; p < pairs.size(); ++p) {
    CompletionStats c;
    c.slot = pairs[p].n;
    c.node = pairs[p].k;
    c.planned_bits = pairs[p].planned;
    c.min = ratio_min[p];
    c.mean = ratio_sum[p] / samples;
    c.violation_freq = static_cast<double>(ratio_viol[p]) / samples;
    r.worst_offload_freq = std::max(r.worst_offload_freq, c.violation_freq);
    total += ratio_sum[p];
    r.completion.push_back(c);
  }
  if (!pairs.empty()) r.mean_completion_ratio = total / (static_cast<double>(samples) * static_cast<double>(pairs.size()));

  // Later passes regenerate the same draws: histogram fill and exact
  // per-pair quantiles, a chunk of pairs at a time.
  speed_h.start_fill(opts.bins);
  if (!pairs.empty()) ratio_h.start_fill(opts.bins);
  const size_t per_chunk = std::max<size_t>(1, opts.buffer_values / static_cast<size_t>(samples));
  std::vector<double> buffer;
  size_t first = 0;
  bool speed_filled = false;
  do {
    const size_t last = std::min(pairs.size(), first + per_chunk);
    const size_t width = last - first;
    buffer.assign(width * static_cast<size_t>(samples), 0.0);
    for (int i = 0; i < samples; ++i) {
      draw(seed, i, N + 1, sigma, j);
      if (!speed_filled) {
        for (int n = 0; n < N; ++n) speed_h.add((realized(j, n + 1) - realized(j, n)).norm() / slot);
      }
      for (size_t p = first; p < last; ++p) {
        const double c = ratio(pairs[p], realized(j, pairs[p].n + 1));
        buffer[(p - first) * static_cast<size_t>(samples) + static_cast<size_t>(i)] = c;
        ratio_h.add(c);
      }
    }
    speed_filled = true;
    for (size_t p = first; p < last; ++p) {
      std::vector<double> v(buffer.begin() + static_cast<std::ptrdiff_t>((p - first) * static_cast<size_t>(samples)),
                            buffer.begin() + static_cast<std::ptrdiff_t>((p - first + 1) * static_cast<size_t>(samples)));
      r.completion[p].q05 = quantile(v, 0.05);
      r.completion[p].q50 = quantile(v, 0.50);
      r.completion[p].q95 = quantile(v, 0.95);
    }
    first = last;
  } while (first < pairs.size());
  r.speed_hist = speed_h.result();
  if (!pairs.empty()) r.ratio_hist = ratio_h.result();
  return r;
}

bool within_budget(const ValidationReport& r, const Scenario& s) {
  for (size_t n = 0; n < r.speed_violation_freq.size(); ++n) {
    if (r.speed_violation_freq[n] > frequency_bound(s.robust.trj(static_cast<int>(n)), r.samples)) return false;
  }
  for (const CompletionStats& c : r.completion) {
    if (c.violation_freq > frequency_bound(s.robust.off(c.slot, c.node), r.samples)) return false;
  }
  return true;
}

}  // namespace uavedge
