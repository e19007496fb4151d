#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <doctest.h>
#include <openssl/sha.h>

#include "rlnst/checkpoint.hpp"

using namespace rlnst;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  std::string hex;
  char buf[3];
  for (unsigned char c : digest) {
    std::snprintf(buf, sizeof(buf), "%02x", c);
    hex += buf;
  }
  return hex;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("rlnst_ckpt_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

CheckpointError::Kind load_error_kind(const fs::path& p) {
  try {
    load_checkpoint<float>(p);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("load unexpectedly succeeded");
  return CheckpointError::Kind::io;
}

}  // namespace

TEST_CASE("checkpoint round trip is byte identical") {
  TempDir dir;
  Networks<float> nets(ArchConfig{}, 42);
  save_checkpoint(nets.params, dir.path / "a.ckpt");
  auto loaded = load_checkpoint<float>(dir.path / "a.ckpt");
  save_checkpoint(loaded, dir.path / "b.ckpt");
  CHECK(read_bytes(dir.path / "a.ckpt") == read_bytes(dir.path / "b.ckpt"));

  REQUIRE(loaded.size() == nets.params.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded.entries()[i].name == nets.params.entries()[i].name);
    CHECK(bitwise_equal(loaded.entries()[i].tensor, nets.params.entries()[i].tensor));
  }
  CHECK(infer_arch(loaded) == ArchConfig{});
}

TEST_CASE("checkpoint of the seed-42 initialization has a frozen digest") {
  TempDir dir;
  Networks<float> nets(ArchConfig{}, 42);
  save_checkpoint(nets.params, dir.path / "seed42.ckpt");
  const auto bytes = read_bytes(dir.path / "seed42.ckpt");
  CHECK(bytes.substr(0, 6) == "RLNST1");
  CHECK(bytes[6] == 0);
  CHECK(sha256_hex(bytes) == "b63097f5b7779194bf5baaf27d695fbcfea5157ef55a7a589122fedc51d70c4b");
}

TEST_CASE("loading into live networks") {
  TempDir dir;
  Networks<float> source(ArchConfig{}, 1);
  Networks<float> dest(ArchConfig{}, 2);
  save_checkpoint(source.params, dir.path / "s.ckpt");
  apply_checkpoint(dest, load_checkpoint<float>(dir.path / "s.ckpt"));
  for (std::size_t i = 0; i < dest.params.size(); ++i) {
    CHECK(bitwise_equal(dest.params.entries()[i].tensor, source.params.entries()[i].tensor));
  }

  SUBCASE("double networks accept a float checkpoint") {
    Networks<double> wide(ArchConfig{}, 3);
    apply_checkpoint(wide, load_checkpoint<float>(dir.path / "s.ckpt"));
    CHECK(wide.params.at("actor.conv1.weight").data()[5] ==
          static_cast<double>(source.params.at("actor.conv1.weight").data()[5]));
  }
  SUBCASE("architecture mismatch is reported") {
    ArchConfig video;
    video.step_gru = video.frame_gru = true;
    Networks<float> other(video, 1);
    try {
      apply_checkpoint(other, load_checkpoint<float>(dir.path / "s.ckpt"));
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::missing_entry);
    }
    ArchConfig wide;
    wide.width3 = 48;
    Networks<float> narrow(wide, 1);
    try {
      apply_checkpoint(narrow, load_checkpoint<float>(dir.path / "s.ckpt"));
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::shape_mismatch);
    }
  }
  SUBCASE("a feature-only file updates only the feature net") {
    ParamRegistry<float> feats;
    for (const auto& e : source.params.entries()) {
      if (e.owner == Owner::featnet) {
        auto t = e.tensor.clone();
        for (auto& v : t.data()) v *= 2.0f;
        feats.add(e.name, t);
      }
    }
    save_checkpoint(feats, dir.path / "f.ckpt");
    auto before = dest.params.at("actor.conv1.weight").clone();
    apply_checkpoint(dest, load_checkpoint<float>(dir.path / "f.ckpt"));
    CHECK(bitwise_equal(before, dest.params.at("actor.conv1.weight")));
    CHECK(dest.params.at("featnet.conv1.weight").data()[0] ==
          2.0f * source.params.at("featnet.conv1.weight").data()[0]);
  }
}

TEST_CASE("corrupt checkpoints are rejected with distinct errors") {
  TempDir dir;
  Networks<float> nets(ArchConfig{}, 42);
  save_checkpoint(nets.params, dir.path / "good.ckpt");
  const auto good = read_bytes(dir.path / "good.ckpt");

  auto bad_magic = good;
  bad_magic[0] = 'X';
  write_bytes(dir.path / "magic.ckpt", bad_magic);
  CHECK(load_error_kind(dir.path / "magic.ckpt") == CheckpointError::Kind::bad_magic);

  auto bad_dtype = good;
  bad_dtype[6] = 7;
  write_bytes(dir.path / "dtype.ckpt", bad_dtype);
  CHECK(load_error_kind(dir.path / "dtype.ckpt") == CheckpointError::Kind::bad_version);

  write_bytes(dir.path / "short.ckpt", good.substr(0, good.size() - 5));
  CHECK(load_error_kind(dir.path / "short.ckpt") == CheckpointError::Kind::truncated);

  write_bytes(dir.path / "long.ckpt", good + "xx");
  CHECK(load_error_kind(dir.path / "long.ckpt") == CheckpointError::Kind::truncated);

  CHECK(load_error_kind(dir.path / "missing.ckpt") == CheckpointError::Kind::io);
}

TEST_CASE("double registries round trip in float64") {
  TempDir dir;
  ParamRegistry<double> reg;
  reg.add("alpha.log_alpha", Tensor<double>::from({1}, {0.1234567890123}));
  save_checkpoint(reg, dir.path / "d.ckpt");
  CHECK(read_bytes(dir.path / "d.ckpt")[6] == 1);
  auto back = load_checkpoint<double>(dir.path / "d.ckpt");
  CHECK(back.at("alpha.log_alpha").data()[0] == 0.1234567890123);
}
