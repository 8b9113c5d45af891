#include <filesystem>

#include <catch2/catch_amalgamated.hpp>

#include "s2pd/io/checkpoint.hpp"
#include "s2pd/io/config.hpp"
#include "s2pd/io/container.hpp"
#include "s2pd/scene/dataset.hpp"

using namespace s2pd;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir() {
  static const fs::path p = [] {
    auto d = fs::temp_directory_path() / "s2pd_io_tests";
    fs::create_directories(d);
    return d;
  }();
  return p;
}

scene::LabeledDataset small_dataset() {
  scene::GridSpec grid{400, 250, 200};
  return scene::generate_dataset(*scene::find_object("red-cube"), grid,
                                 scene::DomainParams::real_proxy(5), scene::SceneOptions{}, 11);
}

}  // namespace

TEST_CASE("dataset container round trip is bit-exact") {
  auto ds = small_dataset();
  const auto bytes = io::serialize_dataset(ds);
  auto back = io::parse_dataset(bytes, "mem");
  REQUIRE(back.size() == ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    REQUIRE(back.images[i] == ds.images[i]);
    REQUIRE(back.labels_mm[i][0] == Catch::Approx(ds.labels_mm[i][0]));
    REQUIRE(back.labels_mm[i][1] == Catch::Approx(ds.labels_mm[i][1]));
  }
  REQUIRE(back.domain == ds.domain);
  // write(read(write(d))) is byte-identical
  REQUIRE(io::serialize_dataset(back) == bytes);
}

TEST_CASE("dataset header fields are laid out as documented") {
  auto ds = small_dataset();
  const auto bytes = io::serialize_dataset(ds);
  REQUIRE(bytes[0] == 'S');
  REQUIRE(bytes[1] == '2');
  REQUIRE(bytes[2] == 'P');
  REQUIRE(bytes[3] == 'D');
  REQUIRE(bytes[4] == 1);    // version lo
  REQUIRE(bytes[5] == 0);    // version hi
  REQUIRE(bytes[6] == 32);   // width lo
  REQUIRE(bytes[10] == 4);   // channels
  REQUIRE(bytes[15] == 2);   // label_dim
}

TEST_CASE("malformed dataset files fail with a byte offset") {
  auto ds = small_dataset();
  auto bytes = io::serialize_dataset(ds);
  SECTION("bad magic") {
    bytes[1] = 'X';
    REQUIRE_THROWS_WITH(io::parse_dataset(bytes, "f"),
                        Catch::Matchers::ContainsSubstring("byte offset 0"));
  }
  SECTION("truncated payload") {
    bytes.resize(bytes.size() / 2);
    REQUIRE_THROWS_WITH(io::parse_dataset(bytes, "f"),
                        Catch::Matchers::ContainsSubstring("byte offset"));
  }
}

TEST_CASE("dataset file round trip through disk") {
  auto ds = small_dataset();
  const fs::path p = tmpdir() / "ds.s2pd";
  io::write_dataset(p, ds);
  auto back = io::read_dataset(p);
  REQUIRE(io::serialize_dataset(back) == io::serialize_dataset(ds));
}

TEST_CASE("checkpoint round trip preserves parameters exactly") {
  io::Checkpoint ck;
  ck.kind = io::NetworkKind::cnn;
  ck.stage = io::StageTag::baseline;
  ck.arch_fingerprint = 0xabcdef12345678ULL;
  ck.seed = 99;
  nd::Rng rng(3);
  ck.params.push_back(nd::Tensor::zeros({4, 3}));
  for (auto& v : ck.params.back().data) v = rng.normal();
  ck.params.push_back(nd::Tensor::zeros({7}));
  for (auto& v : ck.params.back().data) v = rng.normal();

  const auto bytes = io::serialize_checkpoint(ck);
  auto back = io::parse_checkpoint(bytes, "mem");
  REQUIRE(back.kind == ck.kind);
  REQUIRE(back.stage == ck.stage);
  REQUIRE(back.arch_fingerprint == ck.arch_fingerprint);
  REQUIRE(back.seed == ck.seed);
  REQUIRE(back.params.size() == 2);
  REQUIRE(back.params[0].shape == nd::Shape{4, 3});
  REQUIRE(back.params[0].data == ck.params[0].data);
  REQUIRE(back.params[1].data == ck.params[1].data);
}

TEST_CASE("corrupted checkpoints are rejected by the checksum") {
  io::Checkpoint ck;
  ck.params.push_back(nd::Tensor::full({3}, 1.5));
  auto bytes = io::serialize_checkpoint(ck);
  bytes[bytes.size() / 2] ^= 0x40;
  REQUIRE_THROWS_WITH(io::parse_checkpoint(bytes, "f"),
                      Catch::Matchers::ContainsSubstring("checksum"));
}

TEST_CASE("config round trips through JSON") {
  io::RunConfig c;
  c.epochs = 12;
  c.seed = 777;
  c.beta = 2.5e-4;
  c.out_dir = "elsewhere";
  c.cnn_sampled_z = true;
  const auto j = io::to_json(c);
  const auto back = io::run_config_from_json(j, "mem");
  REQUIRE(back == c);
}

TEST_CASE("unknown config keys are rejected") {
  auto j = io::to_json(io::RunConfig{});
  j["learning_rte"] = 0.1;  // typo must not pass silently
  REQUIRE_THROWS_WITH(io::run_config_from_json(j, "mem"),
                      Catch::Matchers::ContainsSubstring("learning_rte"));
}

TEST_CASE("out-of-range config values are rejected") {
  auto j = io::to_json(io::RunConfig{});
  j["batch_size"] = 0;
  REQUIRE_THROWS_AS(io::run_config_from_json(j, "mem"), io::IoError);
}
