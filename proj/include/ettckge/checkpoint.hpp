#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "ettckge/adam.hpp"
#include "ettckge/error.hpp"
#include "ettckge/matrix.hpp"
#include "ettckge/trainer.hpp"

namespace ettckge {

// Binary checkpoint: magic, version, float width, dims (N_E, N_R, T, D),
// row-major little-endian tables (entities, relations, both token sets,
// then Adam moments and step counters), snapshot index, and a JSON metadata
// trailer (length-prefixed).
inline constexpr char kCheckpointMagic[8] = {'E', 'T', 'T', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename S>
struct CheckpointState {
  ModelState<S> model;
  nlohmann::json metadata;  // config echo, snapshot index, config hash
};

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("checkpoint: truncated file");
}

template <typename S>
void write_matrix(std::ostream& out, const Matrix<S>& m) {
  out.write(reinterpret_cast<const char*>(m.data().data()),
            std::streamsize(m.size() * sizeof(S)));
}

template <typename S>
Matrix<S> read_matrix(std::istream& in, std::size_t rows, std::size_t cols) {
  Matrix<S> m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data().data()), std::streamsize(m.size() * sizeof(S)));
  if (!in) throw FormatError("checkpoint: truncated table data");
  return m;
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::filesystem::path& path, const CheckpointState<S>& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("checkpoint: cannot write " + path.string());
  const ModelState<S>& m = state.model;
  if (!m.ent_adam.m.same_shape(m.entities) || !m.rel_adam.m.same_shape(m.relations) ||
      !m.ent_tok_adam.m.same_shape(m.ent_tokens) ||
      !m.rel_tok_adam.m.same_shape(m.rel_tokens)) {
    throw ShapeError("checkpoint: optimizer state shapes do not match their tables");
  }
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod(out, kCheckpointVersion);
  detail::write_pod(out, std::uint32_t(sizeof(S) * 8));
  detail::write_pod(out, std::uint64_t(m.entities.rows()));
  detail::write_pod(out, std::uint64_t(m.relations.rows()));
  detail::write_pod(out, std::uint64_t(m.ent_tokens.rows()));
  detail::write_pod(out, std::uint64_t(m.entities.cols()));
  detail::write_matrix(out, m.entities);
  detail::write_matrix(out, m.relations);
  detail::write_matrix(out, m.ent_tokens);
  detail::write_matrix(out, m.rel_tokens);
  for (const AdamState<S>* a : {&m.ent_adam, &m.rel_adam, &m.ent_tok_adam, &m.rel_tok_adam}) {
    detail::write_matrix(out, a->m);
    detail::write_matrix(out, a->v);
    detail::write_pod(out, std::uint64_t(a->step));
  }
  detail::write_pod(out, std::uint64_t(m.snapshot));
  const std::string meta = state.metadata.dump();
  detail::write_pod(out, std::uint64_t(meta.size()));
  out.write(meta.data(), std::streamsize(meta.size()));
  if (!out) throw FormatError("checkpoint: write failed for " + path.string());
}

template <typename S>
CheckpointState<S> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("checkpoint: bad magic in " + path.string());
  }
  std::uint32_t version = 0, width = 0;
  detail::read_pod(in, version);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  detail::read_pod(in, width);
  if (width != sizeof(S) * 8) {
    throw FormatError("checkpoint: stores " + std::to_string(width) +
                      "-bit floats, run requested " + std::to_string(sizeof(S) * 8) + "-bit");
  }
  std::uint64_t ne = 0, nr = 0, t = 0, d = 0;
  detail::read_pod(in, ne);
  detail::read_pod(in, nr);
  detail::read_pod(in, t);
  detail::read_pod(in, d);

  CheckpointState<S> state;
  ModelState<S>& m = state.model;
  m.entities = detail::read_matrix<S>(in, ne, d);
  m.relations = detail::read_matrix<S>(in, nr, d);
  m.ent_tokens = detail::read_matrix<S>(in, t, d);
  m.rel_tokens = detail::read_matrix<S>(in, t, d);
  for (AdamState<S>* a : {&m.ent_adam, &m.rel_adam, &m.ent_tok_adam, &m.rel_tok_adam}) {
    const std::size_t rows = a == &m.ent_adam ? ne : a == &m.rel_adam ? nr : t;
    a->m = detail::read_matrix<S>(in, rows, d);
    a->v = detail::read_matrix<S>(in, rows, d);
    std::uint64_t step = 0;
    detail::read_pod(in, step);
    a->step = step;
  }
  std::uint64_t snapshot = 0;
  detail::read_pod(in, snapshot);
  m.snapshot = snapshot;
  std::uint64_t meta_len = 0;
  detail::read_pod(in, meta_len);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), std::streamsize(meta_len));
  if (!in) throw FormatError("checkpoint: truncated metadata trailer");
  try {
    state.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad metadata JSON: ") + e.what());
  }
  return state;
}

// Shape guard for loading against a run configuration.
template <typename S>
void check_checkpoint_dims(const CheckpointState<S>& state, std::size_t dim,
                           std::size_t num_tokens) {
  if (state.model.entities.cols() != dim) {
    throw ShapeError("checkpoint: embedding dim " +
                     std::to_string(state.model.entities.cols()) +
                     " does not match configured " + std::to_string(dim));
  }
  if (state.model.ent_tokens.rows() != num_tokens) {
    throw ShapeError("checkpoint: token count " +
                     std::to_string(state.model.ent_tokens.rows()) +
                     " does not match configured " + std::to_string(num_tokens));
  }
}

// FNV-1a over a tensor's raw bytes; the freeze contracts compare these.
template <typename S>
std::uint64_t table_hash(const Matrix<S>& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data().data());
  for (std::size_t i = 0; i < m.size() * sizeof(S); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ettckge
