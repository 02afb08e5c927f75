#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "ettckge/checkpoint.hpp"
#include "ettckge/rng.hpp"

using namespace ettckge;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("ck-ckpt-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static inline int counter = 0;
};

template <typename S>
CheckpointState<S> sample_state(std::uint64_t seed) {
  auto rng = make_engine(seed, 31);
  CheckpointState<S> st;
  ModelState<S>& m = st.model;
  m.entities = init_uniform<S>(7, 4, rng);
  m.relations = init_uniform<S>(3, 4, rng);
  m.ent_tokens = init_uniform<S>(2, 4, rng);
  m.rel_tokens = init_uniform<S>(2, 4, rng);
  m.ent_adam = AdamState<S>(7, 4);
  m.rel_adam = AdamState<S>(3, 4);
  m.ent_tok_adam = AdamState<S>(2, 4);
  m.rel_tok_adam = AdamState<S>(2, 4);
  std::uniform_real_distribution<double> unif(-1, 1);
  for (AdamState<S>* a : {&m.ent_adam, &m.rel_adam, &m.ent_tok_adam, &m.rel_tok_adam}) {
    for (S& v : a->m.data()) v = S(unif(rng));
    for (S& v : a->v.data()) v = S(std::abs(unif(rng)));
    a->step = 17;
  }
  m.snapshot = 2;
  st.metadata = {{"seed", seed}, {"mode", "ett"}};
  return st;
}

template <typename S>
void check_roundtrip() {
  TempDir dir;
  const auto file = dir.path / "model.ckpt";
  CheckpointState<S> orig = sample_state<S>(9);
  save_checkpoint(file, orig);
  CheckpointState<S> back = load_checkpoint<S>(file);

  CHECK(back.model.entities == orig.model.entities);
  CHECK(back.model.relations == orig.model.relations);
  CHECK(back.model.ent_tokens == orig.model.ent_tokens);
  CHECK(back.model.rel_tokens == orig.model.rel_tokens);
  CHECK(back.model.ent_adam.m == orig.model.ent_adam.m);
  CHECK(back.model.ent_adam.v == orig.model.ent_adam.v);
  CHECK(back.model.rel_tok_adam.step == 17);
  CHECK(back.model.snapshot == 2);
  CHECK(back.metadata == orig.metadata);

  // saving the loaded state reproduces the file byte for byte
  const auto file2 = dir.path / "model2.ckpt";
  save_checkpoint(file2, back);
  std::ifstream a(file, std::ios::binary), b(file2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  SUBCASE("32-bit") { check_roundtrip<float>(); }
  SUBCASE("64-bit") { check_roundtrip<double>(); }
}

TEST_CASE("checkpoint rejects a float width mismatch") {
  TempDir dir;
  const auto file = dir.path / "model.ckpt";
  save_checkpoint(file, sample_state<double>(4));
  CHECK_THROWS_AS(load_checkpoint<float>(file), FormatError);
}

TEST_CASE("checkpoint rejects bad magic") {
  TempDir dir;
  const auto file = dir.path / "model.ckpt";
  std::ofstream(file, std::ios::binary) << "NOTACKPTlots of junk follows here";
  CHECK_THROWS_AS(load_checkpoint<float>(file), FormatError);
}

TEST_CASE("checkpoint rejects truncation anywhere") {
  TempDir dir;
  const auto file = dir.path / "model.ckpt";
  save_checkpoint(file, sample_state<float>(5));
  const auto full = std::filesystem::file_size(file);

  for (std::uintmax_t keep : {std::uintmax_t(8), std::uintmax_t(20), full / 2, full - 1}) {
    const auto cut = dir.path / "cut.ckpt";
    {
      std::ifstream in(file, std::ios::binary);
      std::string bytes(keep, '\0');
      in.read(bytes.data(), std::streamsize(keep));
      std::ofstream out(cut, std::ios::binary);
      out.write(bytes.data(), std::streamsize(keep));
    }
    CHECK_THROWS_AS(load_checkpoint<float>(cut), FormatError);
  }
}

TEST_CASE("checkpoint rejects a missing file") {
  CHECK_THROWS_AS(load_checkpoint<float>("/nonexistent/model.ckpt"), FormatError);
}

TEST_CASE("dimension guard catches config mismatches") {
  CheckpointState<float> st = sample_state<float>(6);
  CHECK_NOTHROW(check_checkpoint_dims(st, 4, 2));
  CHECK_THROWS_AS(check_checkpoint_dims(st, 8, 2), ShapeError);
  CHECK_THROWS_AS(check_checkpoint_dims(st, 4, 3), ShapeError);
}

TEST_CASE("table hash separates distinct tables") {
  Matrix<float> a(3, 3, 1.0f), b(3, 3, 1.0f);
  CHECK(table_hash(a) == table_hash(b));
  b(2, 2) = std::nextafter(1.0f, 2.0f);
  CHECK(table_hash(a) != table_hash(b));
}
