// SPDX-License-Identifier: Apache-2.0
//
// Model checkpoint container (XLMW): network config, normalization scales,
// the hash of the dataset config the model was trained on, and every named
// parameter as float32.  The loader rebuilds the model from the embedded
// config and validates each tensor's name and shape, so a checkpoint is
// sufficient on its own to reconstruct the network exactly.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "xlmimo/net.hpp"

namespace xlm {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-dataset normalization applied around the network (see pipeline):
// pilot images are divided by y_rms, channel images by h_rms, and
// coordinates by r_max.
struct NormScales {
  double y_rms = 1.0;
  double h_rms = 1.0;
  double r_max = 1.0;
};

struct CheckpointMeta {
  ad::NetConfig cfg;
  NormScales scales;
  std::uint64_t dataset_hash = 0;
};

void save_checkpoint(const std::string& path,
                     const ad::CpMambaModel<float>& model,
                     const NormScales& scales, std::uint64_t dataset_hash);

// Throws CheckpointError on malformed containers, io::TruncatedFile on
// short reads.  `meta`, when non-null, receives the header fields.
ad::CpMambaModel<float> load_checkpoint(const std::string& path,
                                        CheckpointMeta* meta = nullptr);

}  // namespace xlm
