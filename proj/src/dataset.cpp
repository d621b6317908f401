// SPDX-License-Identifier: Apache-2.0

#include "xlmimo/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "xlmimo/io.hpp"

namespace xlm {

namespace {

constexpr char kMagic[4] = {'X', 'L', 'M', 'D'};
constexpr std::uint32_t kVersion = 1;

void validate(const GenConfig& cfg) {
  if (cfg.carrier.fc <= 0.0 || cfg.carrier.bw <= 0.0 || cfg.carrier.n_sc < 1)
    throw InvalidParameter("gen: carrier parameters out of range");
  if (cfg.n_slots < 1 || cfg.n_rf < 1)
    throw InvalidParameter("gen: pilot dimensions out of range");
  if (!(cfg.ue.r_min > 0.0) || cfg.ue.r_max < cfg.ue.r_min)
    throw InvalidParameter("gen: UE radial bounds out of range");
  if (cfg.ue.theta_max < cfg.ue.theta_min)
    throw InvalidParameter("gen: UE angular bounds out of range");
  if (cfg.snr_max < cfg.snr_min)
    throw InvalidParameter("gen: SNR bounds out of range");
  if (!(cfg.scene.nlos_scale >= 0.0))
    throw InvalidParameter("gen: nlos_scale must be non-negative");
}

std::vector<float> pack(const CMat& m) {
  std::vector<float> out(m.size() * 2);
  for (std::size_t i = 0; i < m.size(); ++i) {
    out[2 * i] = static_cast<float>(m.a[i].real());
    out[2 * i + 1] = static_cast<float>(m.a[i].imag());
  }
  return out;
}

std::vector<float> add_f32(const std::vector<float>& a,
                           const std::vector<float>& b) {
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

// Quantize a freshly drawn combiner to storage precision so that the
// in-memory object and its serialized form are the same numbers.
void quantize_combiner(CombinerSet& cs) {
  for (cdouble& v : cs.stacked.a)
    v = cdouble(static_cast<float>(v.real()), static_cast<float>(v.imag()));
}

void write_config_block(std::ostream& os, const GenConfig& cfg,
                        const ArrayLayout& layout) {
  io::put_u64(os, cfg.master_seed);
  io::put_u64(os, cfg.count);
  io::put_f64(os, cfg.carrier.fc);
  io::put_f64(os, cfg.carrier.bw);
  io::put_i32(os, cfg.carrier.n_sc);
  io::put_f64(os, cfg.carrier.q_db_per_m);
  io::put_u8(os, static_cast<std::uint8_t>(cfg.kind.tag));
  io::put_i32(os, cfg.kind.p1);
  io::put_i32(os, cfg.kind.p2);
  io::put_i32(os, cfg.kind.p3);
  io::put_i32(os, cfg.kind.p4);
  io::put_f64(os, layout.d);
  io::put_i32(os, cfg.n_slots);
  io::put_i32(os, cfg.n_rf);
  io::put_i32(os, cfg.scene.l_min);
  io::put_i32(os, cfg.scene.l_max);
  io::put_i32(os, cfg.scene.rays_per_cluster);
  io::put_f64(os, cfg.scene.nlos_scale);
  io::put_f64(os, cfg.scene.r_min);
  io::put_f64(os, cfg.scene.r_max);
  io::put_f64(os, cfg.scene.theta_min);
  io::put_f64(os, cfg.scene.theta_max);
  io::put_f64(os, cfg.ue.r_min);
  io::put_f64(os, cfg.ue.r_max);
  io::put_f64(os, cfg.ue.theta_min);
  io::put_f64(os, cfg.ue.theta_max);
  io::put_f64(os, cfg.snr_min);
  io::put_f64(os, cfg.snr_max);
}

GenConfig read_config_block(std::istream& is) {
  GenConfig cfg;
  cfg.master_seed = io::get_u64(is);
  cfg.count = io::get_u64(is);
  cfg.carrier.fc = io::get_f64(is);
  cfg.carrier.bw = io::get_f64(is);
  cfg.carrier.n_sc = io::get_i32(is);
  cfg.carrier.q_db_per_m = io::get_f64(is);
  cfg.kind.tag = static_cast<ArrayKindTag>(io::get_u8(is));
  cfg.kind.p1 = io::get_i32(is);
  cfg.kind.p2 = io::get_i32(is);
  cfg.kind.p3 = io::get_i32(is);
  cfg.kind.p4 = io::get_i32(is);
  cfg.d = io::get_f64(is);
  cfg.n_slots = io::get_i32(is);
  cfg.n_rf = io::get_i32(is);
  cfg.scene.l_min = io::get_i32(is);
  cfg.scene.l_max = io::get_i32(is);
  cfg.scene.rays_per_cluster = io::get_i32(is);
  cfg.scene.nlos_scale = io::get_f64(is);
  cfg.scene.r_min = io::get_f64(is);
  cfg.scene.r_max = io::get_f64(is);
  cfg.scene.theta_min = io::get_f64(is);
  cfg.scene.theta_max = io::get_f64(is);
  cfg.ue.r_min = io::get_f64(is);
  cfg.ue.r_max = io::get_f64(is);
  cfg.ue.theta_min = io::get_f64(is);
  cfg.ue.theta_max = io::get_f64(is);
  cfg.snr_min = io::get_f64(is);
  cfg.snr_max = io::get_f64(is);
  return cfg;
}

void write_f32_array(std::ostream& os, const std::vector<float>& v) {
  for (float x : v) io::put_f32(os, x);
}

std::vector<float> read_f32_array(std::istream& is, std::size_t n) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = io::get_f32(is);
  return v;
}

}  // namespace

SampleRecord generate_sample(const GenConfig& cfg, const ArrayLayout& layout,
                             const CombinerSet& combiner, std::uint64_t index) {
  SampleRecord rec;
  rec.seed = sample_seed(cfg.master_seed, index + 1);
  Rng rng(rec.seed);
  Polar ue;
  ue.r = rng.uniform(cfg.ue.r_min, cfg.ue.r_max);
  ue.theta = rng.uniform(cfg.ue.theta_min, cfg.ue.theta_max);
  const std::vector<Scatterer> clusters =
      sample_scatterers(rng, cfg.scene, cfg.carrier.n_sc);
  const double snr_db = rng.uniform(cfg.snr_min, cfg.snr_max);
  const ChannelRealization ch =
      synthesize_channel(layout, cfg.carrier, ue, clusters);
  const PilotObservation obs = observe(combiner, ch.h, snr_db, rng);
  rec.r = ue.r;
  rec.theta = ue.theta;
  rec.x = ue.x();
  rec.y = ue.y();
  rec.snr_db = snr_db;
  rec.sigma2 = obs.sigma2;
  rec.y_pilot = pack(obs.y);
  rec.h_los = pack(ch.h_los);
  rec.h_nlos = pack(ch.h_nlos);
  rec.h = add_f32(rec.h_los, rec.h_nlos);
  return rec;
}

Dataset generate_dataset(const GenConfig& cfg) {
  validate(cfg);
  Dataset ds;
  ds.cfg = cfg;
  ds.cfg.d = cfg.resolved_d();
  ds.layout = build_array(cfg.kind, ds.cfg.d);
  Rng comb_rng(sample_seed(cfg.master_seed, 0));
  ds.combiner = draw_combiner(comb_rng, cfg.n_slots, cfg.n_rf, ds.layout.n());
  quantize_combiner(ds.combiner);
  ds.samples.resize(cfg.count);
  const auto count = static_cast<std::int64_t>(cfg.count);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i)
    ds.samples[static_cast<std::size_t>(i)] = generate_sample(
        ds.cfg, ds.layout, ds.combiner, static_cast<std::uint64_t>(i));
  return ds;
}

std::string config_bytes(const GenConfig& cfg, const ArrayLayout& layout) {
  std::ostringstream os;
  write_config_block(os, cfg, layout);
  return os.str();
}

std::uint64_t config_hash(const GenConfig& cfg) {
  const ArrayLayout layout = build_array(cfg.kind, cfg.resolved_d());
  const std::string bytes = config_bytes(cfg, layout);
  return io::fnv1a(bytes.data(), bytes.size());
}

void write_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw DatasetError(DatasetError::Code::io_failure,
                       "cannot open for writing: " + path);
  io::put_bytes(os, kMagic, 4);
  io::put_u32(os, kVersion);
  write_config_block(os, ds.cfg, ds.layout);
  write_f32_array(os, pack(ds.combiner.stacked));
  io::put_u64(os, ds.samples.size());
  for (const SampleRecord& rec : ds.samples) {
    io::put_u64(os, rec.seed);
    io::put_f64(os, rec.r);
    io::put_f64(os, rec.theta);
    io::put_f64(os, rec.x);
    io::put_f64(os, rec.y);
    io::put_f64(os, rec.snr_db);
    io::put_f64(os, rec.sigma2);
    write_f32_array(os, rec.y_pilot);
    write_f32_array(os, rec.h_los);
    write_f32_array(os, rec.h_nlos);
  }
  if (!os)
    throw DatasetError(DatasetError::Code::io_failure,
                       "write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw DatasetError(DatasetError::Code::io_failure,
                       "cannot open for reading: " + path);
  try {
    char magic[4];
    io::get_bytes(is, magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
      throw DatasetError(DatasetError::Code::bad_magic,
                         "not a dataset file: " + path);
    const std::uint32_t version = io::get_u32(is);
    if (version != kVersion)
      throw DatasetError(DatasetError::Code::bad_version,
                         "unsupported dataset version " +
                             std::to_string(version));
    Dataset ds;
    ds.cfg = read_config_block(is);
    if (ds.cfg.carrier.n_sc < 1 || ds.cfg.n_slots < 1 || ds.cfg.n_rf < 1 ||
        !(ds.cfg.d > 0.0))
      throw DatasetError(DatasetError::Code::dimension_mismatch,
                         "config block has invalid dimensions");
    ds.layout = build_array(ds.cfg.kind, ds.cfg.d);
    const int n_ant = ds.layout.n();
    const int n_meas = ds.cfg.n_slots * ds.cfg.n_rf;
    ds.combiner.n_slots = ds.cfg.n_slots;
    ds.combiner.n_rf = ds.cfg.n_rf;
    ds.combiner.n_ant = n_ant;
    ds.combiner.stacked = CMat(n_meas, n_ant);
    {
      const std::vector<float> w =
          read_f32_array(is, static_cast<std::size_t>(n_meas) * n_ant * 2);
      for (std::size_t i = 0; i < ds.combiner.stacked.size(); ++i)
        ds.combiner.stacked.a[i] = cdouble(w[2 * i], w[2 * i + 1]);
    }
    const std::uint64_t count = io::get_u64(is);
    if (count != ds.cfg.count)
      throw DatasetError(DatasetError::Code::dimension_mismatch,
                         "sample count disagrees with the header");
    const int n_sc = ds.cfg.carrier.n_sc;
    ds.samples.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      SampleRecord& rec = ds.samples[i];
      rec.seed = io::get_u64(is);
      rec.r = io::get_f64(is);
      rec.theta = io::get_f64(is);
      rec.x = io::get_f64(is);
      rec.y = io::get_f64(is);
      rec.snr_db = io::get_f64(is);
      rec.sigma2 = io::get_f64(is);
      rec.y_pilot =
          read_f32_array(is, static_cast<std::size_t>(n_sc) * n_meas * 2);
      rec.h_los =
          read_f32_array(is, static_cast<std::size_t>(n_sc) * n_ant * 2);
      rec.h_nlos =
          read_f32_array(is, static_cast<std::size_t>(n_sc) * n_ant * 2);
      rec.h = add_f32(rec.h_los, rec.h_nlos);
    }
    return ds;
  } catch (const io::TruncatedFile& e) {
    throw DatasetError(DatasetError::Code::truncated,
                       std::string("truncated dataset: ") + e.what());
  } catch (const InvalidParameter& e) {
    throw DatasetError(DatasetError::Code::dimension_mismatch,
                       std::string("invalid dataset header: ") + e.what());
  }
}

Split split_indices(std::uint64_t n, double f_train, double f_val,
                    double f_test, std::uint64_t seed) {
  if (f_train < 0.0 || f_val < 0.0 || f_test < 0.0 ||
      std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
    throw InvalidParameter("split: fractions must be >= 0 and sum to 1");
  std::vector<std::uint32_t> idx(n);
  for (std::uint64_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
  Rng rng(seed);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j =
        static_cast<std::uint64_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
  auto n_train = static_cast<std::uint64_t>(std::llround(f_train * static_cast<double>(n)));
  auto n_val = static_cast<std::uint64_t>(std::llround(f_val * static_cast<double>(n)));
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
               idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  return s;
}

CMat to_cmat(const std::vector<float>& interleaved, int rows, int cols) {
  if (interleaved.size() != static_cast<std::size_t>(rows) * cols * 2)
    throw InvalidParameter("to_cmat: size mismatch");
  CMat m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.a[i] = cdouble(interleaved[2 * i], interleaved[2 * i + 1]);
  return m;
}

}  // namespace xlm
