// SPDX-License-Identifier: Apache-2.0
//
// Compressed pilot observation.
//
// During P pilot slots the N-element array is read through an analog
// combining matrix W[p] in C^{N_RF x N} whose entries have constant
// modulus 1/sqrt(N_RF) and i.i.d. uniform phases.  Stacking the slots
// gives Wbar in C^{P*N_RF x N} and the observation on subcarrier k is
//
//   y[k] = Wbar h[k] + n[k],   n[k] = blockdiag(W[1]..W[P]) nbar[k]
//
// with nbar[k] ~ CN(0, sigma^2 I_N) drawn independently per slot: the
// combiner colors the noise inside each slot block.  The noise level for a
// target SNR is calibrated against the mean received pilot energy:
//
//   sigma^2 = mean_k ||Wbar h[k]||^2 / (P * N_RF * 10^(snr_db/10)).

#pragma once

#include <vector>

#include "xlmimo/common.hpp"
#include "xlmimo/linalg.hpp"
#include "xlmimo/rng.hpp"

namespace xlm {

struct CombinerSet {
  int n_slots = 0;   // P
  int n_rf = 0;      // chains per slot
  int n_ant = 0;     // N
  CMat stacked;      // (P*N_RF) x N; slot p occupies rows [p*n_rf, (p+1)*n_rf)

  int rows() const { return n_slots * n_rf; }
  const cdouble* slot_row(int p, int r) const {
    return stacked.row(p * n_rf + r);
  }
};

// Entries (1/sqrt(N_RF)) exp(j 2 pi u), u ~ U[0,1), drawn row-major within
// each slot, slots in order.
CombinerSet draw_combiner(Rng& rng, int n_slots, int n_rf, int n_ant);

struct PilotObservation {
  CMat y;          // K x (P*N_RF)
  double sigma2 = 0.0;
  double snr_db = 0.0;
};

// Noise variance that realizes `snr_db` for this channel/combiner pair.
double snr_to_sigma2(const CombinerSet& cs, const CMat& h, double snr_db);

// Compressed observation with fresh noise.  Noise is drawn in a fixed
// order (slot-major, then subcarrier, then antenna) from `rng`.
PilotObservation observe(const CombinerSet& cs, const CMat& h, double snr_db,
                         Rng& rng);

// Noiseless compression Wbar h, one output row per subcarrier.
CMat compress(const CombinerSet& cs, const CMat& h);

}  // namespace xlm
