// SPDX-License-Identifier: Apache-2.0

#include "xlmimo/channel.hpp"

#include <cmath>

namespace xlm {

double subcarrier_freq(const CarrierConfig& c, int k) {
  if (c.n_sc < 1) throw InvalidParameter("carrier: n_sc must be >= 1");
  if (k < 0 || k >= c.n_sc) throw InvalidParameter("carrier: subcarrier index out of range");
  return c.fc - c.bw / 2.0 + static_cast<double>(k) * c.bw / c.n_sc;
}

double element_distance(double big_r, double phi, double xq) {
  const double arg = big_r * big_r + xq * xq - 2.0 * big_r * xq * std::cos(phi);
  if (arg < 0.0) {
    if (arg < -1e-15)
      throw std::domain_error("element_distance: negative squared distance");
    return 0.0;
  }
  return std::sqrt(arg);
}

std::vector<cdouble> steering_vector(const ArrayLayout& layout, double big_r,
                                     double phi, double f) {
  if (!(big_r > 0.0)) throw InvalidParameter("steering: distance must be positive");
  const int n = layout.n();
  std::vector<cdouble> a(static_cast<std::size_t>(n));
  const double wave = kTwoPi * f / kSpeedOfLight;
  for (int q = 0; q < n; ++q) {
    const double rq = element_distance(big_r, phi, layout.positions[q]);
    const double ph = -wave * rq;
    a[q] = cdouble(std::cos(ph), std::sin(ph));
  }
  return a;
}

double los_gain(double big_r, double q_db_per_m) {
  if (!(big_r > 0.0)) throw InvalidParameter("los_gain: distance must be positive");
  return std::pow(10.0, q_db_per_m * big_r / 10.0) / (4.0 * kPi * big_r);
}

std::vector<Scatterer> sample_scatterers(Rng& rng, const SceneConfig& scene,
                                         int n_sc) {
  if (scene.l_min < 0 || scene.l_max < scene.l_min)
    throw InvalidParameter("scene: need 0 <= l_min <= l_max");
  if (scene.rays_per_cluster < 1)
    throw InvalidParameter("scene: rays_per_cluster must be >= 1");
  const int n_clusters =
      static_cast<int>(rng.uniform_int(scene.l_min, scene.l_max));
  std::vector<Scatterer> rays;
  rays.reserve(static_cast<std::size_t>(n_clusters) * scene.rays_per_cluster);
  for (int l = 0; l < n_clusters; ++l) {
    for (int g = 0; g < scene.rays_per_cluster; ++g) {
      Scatterer s;
      s.pos.r = rng.uniform(scene.r_min, scene.r_max);
      s.pos.theta = rng.uniform(scene.theta_min, scene.theta_max);
      s.gain.resize(static_cast<std::size_t>(n_sc));
      for (int k = 0; k < n_sc; ++k)
        s.gain[k] = rng.cnormal() * scene.nlos_scale;
      rays.push_back(std::move(s));
    }
  }
  return rays;
}

CMat los_channel(const ArrayLayout& layout, const CarrierConfig& carrier,
                 const Polar& ue) {
  const int n = layout.n();
  CMat h(carrier.n_sc, n);
  for (int k = 0; k < carrier.n_sc; ++k) {
    const double fk = subcarrier_freq(carrier, k);
    const double a0 = los_gain(ue.r, carrier.q_db_per_m);
    const std::vector<cdouble> a = steering_vector(layout, ue.r, ue.theta, fk);
    cdouble* row = h.row(k);
    for (int q = 0; q < n; ++q) row[q] = a0 * a[q];
  }
  return h;
}

ChannelRealization synthesize_channel(const ArrayLayout& layout,
                                      const CarrierConfig& carrier,
                                      const Polar& ue,
                                      const std::vector<Scatterer>& clusters) {
  const int n = layout.n();
  const int n_sc = carrier.n_sc;
  ChannelRealization ch;
  ch.ue = ue;
  ch.h_los = los_channel(layout, carrier, ue);
  ch.h_nlos = CMat(n_sc, n);
  for (const Scatterer& s : clusters) {
    if (static_cast<int>(s.gain.size()) != n_sc)
      throw InvalidParameter("channel: scatterer gain length mismatch");
    for (int k = 0; k < n_sc; ++k) {
      const double fk = subcarrier_freq(carrier, k);
      const std::vector<cdouble> a =
          steering_vector(layout, s.pos.r, s.pos.theta, fk);
      const cdouble g = s.gain[k];
      cdouble* row = ch.h_nlos.row(k);
      for (int q = 0; q < n; ++q) row[q] += g * a[q];
    }
  }
  ch.h = CMat(n_sc, n);
  for (std::size_t i = 0; i < ch.h.size(); ++i)
    ch.h.a[i] = ch.h_los.a[i] + ch.h_nlos.a[i];
  return ch;
}

}  // namespace xlm
