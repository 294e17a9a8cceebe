#include "chronotact/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chronotact {

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::kNormOptimal: return "norm-optimal";
    case Provenance::kTimeOptimal: return "time-optimal";
    case Provenance::kManual: return "manual";
  }
  return "manual";
}

double BangBangControl::value(int channel, double t) const {
  if (t < 0.0 || t > T) return 0.0;
  const auto& ch = channels[channel];
  const auto flips = std::upper_bound(ch.switch_times.begin(),
                                      ch.switch_times.end(), t) -
                     ch.switch_times.begin();
  const int sign = (flips % 2 == 0) ? ch.initial_sign : -ch.initial_sign;
  return sign * ch.level;
}

Vector BangBangControl::value(double t) const {
  Vector u(d());
  for (int i = 0; i < d(); ++i) u[i] = value(i, t);
  return u;
}

std::vector<double> BangBangControl::breakpoints() const {
  std::vector<double> out;
  for (const auto& ch : channels) {
    out.insert(out.end(), ch.switch_times.begin(), ch.switch_times.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double BangBangControl::distance_to_switch(double t) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ch : channels) {
    for (double s : ch.switch_times) best = std::min(best, std::abs(t - s));
  }
  return best;
}

Vector SampledControl::value(double t) const {
  const auto n = samples.cols();
  if (n == 0 || t < t_begin || t > t_end) return Vector::Zero(samples.rows());
  if (n == 1) return samples.col(0);
  const double pos = (t - t_begin) / (t_end - t_begin) * static_cast<double>(n - 1);
  const auto j = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(pos), 0, n - 2);
  const double w = pos - static_cast<double>(j);
  return (1.0 - w) * samples.col(j) + w * samples.col(j + 1);
}

double l2_distance(const BangBangControl& a, const BangBangControl& b,
                   double horizon) {
  std::vector<double> nodes{0.0, horizon};
  for (const auto* c : {&a, &b}) {
    if (c->T < horizon) nodes.push_back(c->T);
    for (double s : c->breakpoints()) {
      if (s > 0.0 && s < horizon) nodes.push_back(s);
    }
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  const int d = std::max(a.d(), b.d());
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < nodes.size(); ++j) {
    const double mid = 0.5 * (nodes[j] + nodes[j + 1]);
    const double width = nodes[j + 1] - nodes[j];
    for (int i = 0; i < d; ++i) {
      const double ua = i < a.d() ? a.value(i, mid) : 0.0;
      const double ub = i < b.d() ? b.value(i, mid) : 0.0;
      sum += (ua - ub) * (ua - ub) * width;
    }
  }
  return std::sqrt(sum);
}

}  // namespace chronotact
