// SPDX-License-Identifier: Apache-2.0

#include "xlmimo/pilot.hpp"

#include <cmath>

namespace xlm {

CombinerSet draw_combiner(Rng& rng, int n_slots, int n_rf, int n_ant) {
  if (n_slots < 1 || n_rf < 1 || n_ant < 1)
    throw InvalidParameter("combiner: all dimensions must be >= 1");
  CombinerSet cs;
  cs.n_slots = n_slots;
  cs.n_rf = n_rf;
  cs.n_ant = n_ant;
  cs.stacked = CMat(n_slots * n_rf, n_ant);
  const double amp = 1.0 / std::sqrt(static_cast<double>(n_rf));
  for (int r = 0; r < cs.stacked.rows; ++r) {
    cdouble* row = cs.stacked.row(r);
    for (int c = 0; c < n_ant; ++c) {
      const double ph = kTwoPi * rng.u01();
      row[c] = cdouble(amp * std::cos(ph), amp * std::sin(ph));
    }
  }
  return cs;
}

CMat compress(const CombinerSet& cs, const CMat& h) {
  if (h.cols != cs.n_ant)
    throw InvalidParameter("compress: channel antenna count mismatch");
  CMat y(h.rows, cs.rows());
  for (int k = 0; k < h.rows; ++k) {
    const cdouble* hk = h.row(k);
    cdouble* yk = y.row(k);
    for (int r = 0; r < cs.rows(); ++r) {
      const cdouble* wr = cs.stacked.row(r);
      cdouble acc = 0.0;
      for (int q = 0; q < cs.n_ant; ++q) acc += wr[q] * hk[q];
      yk[r] = acc;
    }
  }
  return y;
}

double snr_to_sigma2(const CombinerSet& cs, const CMat& h, double snr_db) {
  const CMat clean = compress(cs, h);
  double energy = 0.0;
  for (const cdouble& v : clean.a) energy += std::norm(v);
  const double mean_energy = energy / h.rows;
  return mean_energy /
         (static_cast<double>(cs.rows()) * std::pow(10.0, snr_db / 10.0));
}

PilotObservation observe(const CombinerSet& cs, const CMat& h, double snr_db,
                         Rng& rng) {
  if (h.cols != cs.n_ant)
    throw InvalidParameter("observe: channel antenna count mismatch");
  const int n_sc = h.rows;
  PilotObservation obs;
  obs.snr_db = snr_db;
  obs.sigma2 = snr_to_sigma2(cs, h, snr_db);
  obs.y = compress(cs, h);
  const double sigma = std::sqrt(obs.sigma2);
  // Element noise, drawn slot-major so the stream layout is documented and
  // stable: for each slot p, for each subcarrier k, N antenna values.
  std::vector<cdouble> nbar(static_cast<std::size_t>(cs.n_ant));
  for (int p = 0; p < cs.n_slots; ++p) {
    for (int k = 0; k < n_sc; ++k) {
      for (int q = 0; q < cs.n_ant; ++q) nbar[q] = sigma * rng.cnormal();
      cdouble* yk = obs.y.row(k);
      for (int r = 0; r < cs.n_rf; ++r) {
        const cdouble* wr = cs.slot_row(p, r);
        cdouble acc = 0.0;
        for (int q = 0; q < cs.n_ant; ++q) acc += wr[q] * nbar[q];
        yk[p * cs.n_rf + r] += acc;
      }
    }
  }
  return obs;
}

}  // namespace xlm
