#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gclrec/params.hpp"

namespace gclrec {

/// Binary checkpoint, bit-exact:
///   magic "GCLREC01"
///   u64 n_users, u64 n_items, u64 dim          (little endian)
///   f64 user embeddings, row major             (n_users * dim)
///   f64 item embeddings, row major             (n_items * dim)
///   optional section: magic "EOPMLP01",
///     u64 n_tensors, then per tensor: u64 ndim, u64 dims[ndim], f64 data[]
struct Checkpoint {
  std::int64_t n_users = 0;
  std::int64_t n_items = 0;
  std::int64_t dim = 0;
  /// (n_users + n_items) x dim table; user rows first.
  Mat embeddings;
  /// Edge-operator MLP tensors in fixed order, when present.
  std::optional<std::vector<ParamTensor>> mlp;
};

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated u64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void write_f64s(std::ostream& out, const double* data, std::int64_t n) {
  for (std::int64_t k = 0; k < n; ++k) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[k], 8);
    write_u64(out, bits);
  }
}

inline void read_f64s(std::istream& in, double* data, std::int64_t n) {
  for (std::int64_t k = 0; k < n; ++k) {
    const std::uint64_t bits = read_u64(in);
    std::memcpy(&data[k], &bits, 8);
  }
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
  out.write("GCLREC01", 8);
  detail::write_u64(out, static_cast<std::uint64_t>(ckpt.n_users));
  detail::write_u64(out, static_cast<std::uint64_t>(ckpt.n_items));
  detail::write_u64(out, static_cast<std::uint64_t>(ckpt.dim));
  detail::write_f64s(out, ckpt.embeddings.data(),
                     ckpt.embeddings.rows() * ckpt.embeddings.cols());
  if (ckpt.mlp) {
    out.write("EOPMLP01", 8);
    detail::write_u64(out, ckpt.mlp->size());
    for (const ParamTensor& t : *ckpt.mlp) {
      detail::write_u64(out, t.shape.size());
      for (const std::int64_t d : t.shape)
        detail::write_u64(out, static_cast<std::uint64_t>(d));
      detail::write_f64s(out, t.values.data(), t.size());
    }
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "GCLREC01", 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  Checkpoint ckpt;
  ckpt.n_users = static_cast<std::int64_t>(detail::read_u64(in));
  ckpt.n_items = static_cast<std::int64_t>(detail::read_u64(in));
  ckpt.dim = static_cast<std::int64_t>(detail::read_u64(in));
  if (ckpt.n_users < 0 || ckpt.n_items < 0 || ckpt.dim <= 0)
    throw std::runtime_error("load_checkpoint: bad header in " + path);
  ckpt.embeddings.resize(ckpt.n_users + ckpt.n_items, ckpt.dim);
  detail::read_f64s(in, ckpt.embeddings.data(),
                    ckpt.embeddings.rows() * ckpt.embeddings.cols());

  char section[8];
  in.read(section, 8);
  if (in.gcount() == 0) return ckpt;  // no optional section
  if (in.gcount() != 8 || std::memcmp(section, "EOPMLP01", 8) != 0)
    throw std::runtime_error("load_checkpoint: bad section tag in " + path);
  const std::uint64_t n_tensors = detail::read_u64(in);
  std::vector<ParamTensor> mlp;
  static const char* kNames[] = {"mlp.w1", "mlp.b1", "mlp.w2", "mlp.b2"};
  for (std::uint64_t t = 0; t < n_tensors; ++t) {
    const std::uint64_t ndim = detail::read_u64(in);
    std::vector<std::int64_t> shape;
    for (std::uint64_t d = 0; d < ndim; ++d)
      shape.push_back(static_cast<std::int64_t>(detail::read_u64(in)));
    ParamTensor tensor(t < 4 ? kNames[t] : "mlp.t" + std::to_string(t),
                       std::move(shape));
    detail::read_f64s(in, tensor.values.data(), tensor.size());
    mlp.push_back(std::move(tensor));
  }
  ckpt.mlp = std::move(mlp);
  return ckpt;
}

}  // namespace gclrec
