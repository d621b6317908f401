// SPDX-License-Identifier: Apache-2.0

#include "xlmimo/checkpoint.hpp"

#include <fstream>
#include <vector>

#include "xlmimo/io.hpp"

namespace xlm {

namespace {

constexpr char kMagic[4] = {'X', 'L', 'M', 'W'};
constexpr std::uint32_t kVersion = 1;

void write_config(std::ostream& os, const ad::NetConfig& cfg) {
  io::put_u8(os, static_cast<std::uint8_t>(cfg.head));
  io::put_i32(os, cfg.in_ch);
  io::put_i32(os, cfg.out_ch);
  io::put_i32(os, cfg.in_h);
  io::put_i32(os, cfg.in_w);
  io::put_i32(os, cfg.stages);
  io::put_i32(os, cfg.c0);
  io::put_i32(os, cfg.d_state);
  io::put_i32(os, cfg.dt_rank);
  io::put_i32(os, cfg.k_conv);
  io::put_u8(os, cfg.raster_transpose ? 1 : 0);
}

ad::NetConfig read_config(std::istream& is) {
  ad::NetConfig cfg;
  const std::uint8_t head = io::get_u8(is);
  if (head > 1) throw CheckpointError("checkpoint: unknown head kind");
  cfg.head = static_cast<ad::HeadKind>(head);
  cfg.in_ch = io::get_i32(is);
  cfg.out_ch = io::get_i32(is);
  cfg.in_h = io::get_i32(is);
  cfg.in_w = io::get_i32(is);
  cfg.stages = io::get_i32(is);
  cfg.c0 = io::get_i32(is);
  cfg.d_state = io::get_i32(is);
  cfg.dt_rank = io::get_i32(is);
  cfg.k_conv = io::get_i32(is);
  cfg.raster_transpose = io::get_u8(is) != 0;
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const ad::CpMambaModel<float>& model,
                     const NormScales& scales, std::uint64_t dataset_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("checkpoint: cannot open " + path);
  io::put_bytes(os, kMagic, 4);
  io::put_u32(os, kVersion);
  write_config(os, model.cfg);
  io::put_f64(os, scales.y_rms);
  io::put_f64(os, scales.h_rms);
  io::put_f64(os, scales.r_max);
  io::put_u64(os, dataset_hash);
  const auto params = ad::named_params(model);
  io::put_u64(os, params.size());
  for (const auto& [name, arr] : params) {
    io::put_string(os, name);
    io::put_u32(os, static_cast<std::uint32_t>(arr->shape.size()));
    for (int e : arr->shape) io::put_i32(os, e);
    for (float v : arr->val) io::put_f32(os, v);
  }
  os.flush();
  if (!os) throw CheckpointError("checkpoint: write failed for " + path);
}

namespace {

ad::CpMambaModel<float> load_checkpoint_impl(std::istream& is,
                                             CheckpointMeta* meta) {
  char magic[4];
  io::get_bytes(is, magic, 4);
  if (std::string(magic, 4) != std::string(kMagic, 4))
    throw CheckpointError("checkpoint: bad magic");
  const std::uint32_t version = io::get_u32(is);
  if (version != kVersion)
    throw CheckpointError("checkpoint: unsupported version " +
                          std::to_string(version));
  const ad::NetConfig cfg = read_config(is);
  try {
    cfg.validate();
  } catch (const InvalidParameter& e) {
    throw CheckpointError(std::string("checkpoint: invalid config: ") +
                          e.what());
  }
  NormScales scales;
  scales.y_rms = io::get_f64(is);
  scales.h_rms = io::get_f64(is);
  scales.r_max = io::get_f64(is);
  const std::uint64_t dataset_hash = io::get_u64(is);

  Rng rng(0);  // every parameter is overwritten below
  ad::CpMambaModel<float> model = ad::build_model<float>(cfg, rng);
  const auto params = ad::named_params(model);
  const std::uint64_t count = io::get_u64(is);
  if (count != params.size())
    throw CheckpointError("checkpoint: parameter count " +
                          std::to_string(count) + ", expected " +
                          std::to_string(params.size()));
  for (const auto& [name, arr] : params) {
    const std::string stored = io::get_string(is);
    if (stored != name)
      throw CheckpointError("checkpoint: parameter '" + stored +
                            "' where '" + name + "' was expected");
    const std::uint32_t rank = io::get_u32(is);
    if (rank != arr->shape.size())
      throw CheckpointError("checkpoint: rank mismatch for " + name);
    for (int e : arr->shape)
      if (io::get_i32(is) != e)
        throw CheckpointError("checkpoint: shape mismatch for " + name);
    for (float& v : arr->val) v = io::get_f32(is);
  }
  if (meta) *meta = CheckpointMeta{cfg, scales, dataset_hash};
  return model;
}

}  // namespace

ad::CpMambaModel<float> load_checkpoint(const std::string& path,
                                        CheckpointMeta* meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open " + path);
  try {
    return load_checkpoint_impl(is, meta);
  } catch (const io::TruncatedFile&) {
    throw CheckpointError("checkpoint: truncated file: " + path);
  }
}

}  // namespace xlm
