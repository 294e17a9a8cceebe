#pragma once

#include <string_view>
#include <variant>
#include <vector>

#include "chronotact/model.hpp"

namespace chronotact {

enum class Provenance { kNormOptimal, kTimeOptimal, kManual };

std::string_view to_string(Provenance provenance);

struct BangBangChannel {
  double level = 0.0;
  int initial_sign = 1;
  std::vector<double> switch_times;  // strictly increasing, inside (0, T)
};

/// Piecewise-constant control stored by structure: each channel takes the
/// value level * (+-1), flipping sign at every switch time. Values at a switch
/// time follow the right limit.
struct BangBangControl {
  double T = 0.0;
  std::vector<BangBangChannel> channels;
  Provenance provenance = Provenance::kManual;

  int d() const { return static_cast<int>(channels.size()); }
  double value(int channel, double t) const;
  Vector value(double t) const;
  /// Sorted union of all switch times.
  std::vector<double> breakpoints() const;
  /// Distance from t to the nearest switch time of any channel (inf if none).
  double distance_to_switch(double t) const;
};

/// Control given by uniformly spaced samples over [t_begin, t_end], one row per
/// channel. Linear interpolation between samples.
struct SampledControl {
  double t_begin = 0.0;
  double t_end = 0.0;
  Matrix samples;  // d x n

  int d() const { return static_cast<int>(samples.rows()); }
  Vector value(double t) const;
};

using Control = std::variant<BangBangControl, SampledControl>;

/// L2(0, horizon) distance between two bang-bang controls, each extended by
/// zero beyond its own horizon. Exact: integrates over merged breakpoints.
double l2_distance(const BangBangControl& a, const BangBangControl& b,
                   double horizon);

}  // namespace chronotact
