// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "xlmimo/checkpoint.hpp"
#include "xlmimo/net.hpp"
#include "xlmimo/rng.hpp"

using namespace xlm;

namespace {

ad::NetConfig tiny_cfg(ad::HeadKind head) {
  ad::NetConfig cfg;
  cfg.in_ch = head == ad::HeadKind::position ? 2 : 4;
  cfg.out_ch = 2;
  cfg.in_h = 8;
  cfg.in_w = 8;
  cfg.stages = 2;
  cfg.c0 = 2;
  cfg.d_state = 2;
  cfg.dt_rank = 1;
  cfg.k_conv = 2;
  cfg.head = head;
  cfg.raster_transpose = head == ad::HeadKind::channel;
  return cfg;
}

std::string temp_path(const char* stem) {
  return std::string("ckpt_test_") + stem + ".bin";
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(bool(f));
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void dump(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  REQUIRE(bool(f));
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("save and load round-trip both head kinds bitwise") {
  for (const auto head : {ad::HeadKind::position, ad::HeadKind::channel}) {
    const auto cfg = tiny_cfg(head);
    Rng rng(123);
    auto model = ad::build_model<float>(cfg, rng);
    // Give the zero-initialized head distinctive values so the round trip
    // is checked on every parameter.
    for (std::size_t i = 0; i < model.head_w->val.size(); ++i)
      model.head_w->val[i] = 0.25f * static_cast<float>(i + 1);

    NormScales sc{1.5, 2.5e-4, 10.0};
    const std::string path = temp_path("roundtrip");
    save_checkpoint(path, model, sc, 0xFEEDFACEull);

    CheckpointMeta meta;
    auto loaded = load_checkpoint(path, &meta);

    CHECK(meta.cfg.in_ch == cfg.in_ch);
    CHECK(meta.cfg.out_ch == cfg.out_ch);
    CHECK(meta.cfg.in_h == cfg.in_h);
    CHECK(meta.cfg.in_w == cfg.in_w);
    CHECK(meta.cfg.stages == cfg.stages);
    CHECK(meta.cfg.c0 == cfg.c0);
    CHECK(meta.cfg.d_state == cfg.d_state);
    CHECK(meta.cfg.dt_rank == cfg.dt_rank);
    CHECK(meta.cfg.k_conv == cfg.k_conv);
    CHECK(meta.cfg.head == cfg.head);
    CHECK(meta.cfg.raster_transpose == cfg.raster_transpose);
    CHECK(meta.scales.y_rms == sc.y_rms);
    CHECK(meta.scales.h_rms == sc.h_rms);
    CHECK(meta.scales.r_max == sc.r_max);
    CHECK(meta.dataset_hash == 0xFEEDFACEull);

    const auto a = ad::named_params(model);
    const auto b = ad::named_params(loaded);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].first == b[i].first);
      REQUIRE(a[i].second->shape == b[i].second->shape);
      CHECK(a[i].second->val == b[i].second->val);  // bitwise float equality
    }
    std::remove(path.c_str());
  }
}

TEST_CASE("loading a missing file fails") {
  CHECK_THROWS_AS(load_checkpoint("no_such_checkpoint.bin", nullptr),
                  CheckpointError);
}

TEST_CASE("malformed containers are rejected") {
  const auto cfg = tiny_cfg(ad::HeadKind::position);
  Rng rng(9);
  auto model = ad::build_model<float>(cfg, rng);
  const std::string path = temp_path("good");
  save_checkpoint(path, model, NormScales{}, 7);
  const std::string good = slurp(path);
  const std::string bad = temp_path("bad");

  SUBCASE("corrupted magic") {
    std::string b = good;
    b[0] = 'Z';
    dump(bad, b);
    CHECK_THROWS_AS(load_checkpoint(bad, nullptr), CheckpointError);
  }
  SUBCASE("unsupported version") {
    std::string b = good;
    b[4] = 9;  // version u32 little-endian starts at byte 4
    dump(bad, b);
    CHECK_THROWS_AS(load_checkpoint(bad, nullptr), CheckpointError);
  }
  SUBCASE("unknown head kind") {
    std::string b = good;
    b[8] = 7;  // head byte follows magic + version
    dump(bad, b);
    CHECK_THROWS_AS(load_checkpoint(bad, nullptr), CheckpointError);
  }
  SUBCASE("config that cannot build a network") {
    std::string b = good;
    // in_h i32 sits after magic(4) + version(4) + head(1) + in_ch/out_ch(8).
    b[17] = b[18] = b[19] = b[20] = 0;
    dump(bad, b);
    CHECK_THROWS_AS(load_checkpoint(bad, nullptr), CheckpointError);
  }
  SUBCASE("parameter name mismatch") {
    std::string b = good;
    const auto at = b.find("enc0.conv1.w");
    REQUIRE(at != std::string::npos);
    b[at] = 'x';
    dump(bad, b);
    CHECK_THROWS_AS(load_checkpoint(bad, nullptr), CheckpointError);
  }
  SUBCASE("parameter shape mismatch") {
    std::string b = good;
    const auto at = b.find("enc0.conv1.w");
    REQUIRE(at != std::string::npos);
    // name bytes, then rank u32, then the first extent's low byte.
    b[at + 12 + 4] = static_cast<char>(b[at + 12 + 4] + 1);
    dump(bad, b);
    CHECK_THROWS_AS(load_checkpoint(bad, nullptr), CheckpointError);
  }
  SUBCASE("truncated payload") {
    dump(bad, good.substr(0, good.size() - 3));
    CHECK_THROWS_AS(load_checkpoint(bad, nullptr), CheckpointError);
  }
  std::remove(path.c_str());
  std::remove(bad.c_str());
}

}  // TEST_SUITE
