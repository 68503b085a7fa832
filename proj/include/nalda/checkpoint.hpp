#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nalda/errors.hpp"
#include "nalda/matrix.hpp"
#include "nalda/trainer.hpp"

namespace nalda {

// Model container, format v1: an 8-byte magic, a tensor count, then
// length-prefixed named tensors of little-endian 64-bit floats. Scalars are
// 1-element tensors. Byte-identical for identical models.
inline constexpr char kCheckpointMagic[8] = {'N', 'A', 'L', 'D', 'A', 'C', 'P', '1'};

struct Checkpoint {
  Model model;
  LabelKind label_kind = LabelKind::classification;
  Matrix word_topic_mass;          // W x K, from the trained cache
  std::optional<Matrix> messages;  // NNZ x K when requested
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw ParseError("truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

struct NamedTensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

inline void put_tensor(std::string& out, const std::string& name,
                       const std::vector<std::uint64_t>& dims, const double* data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  std::uint64_t n = 1;
  for (auto d : dims) {
    put_u64(out, d);
    n *= d;
  }
  for (std::uint64_t i = 0; i < n; ++i) put_f64(out, data[i]);
}

inline void put_scalar(std::string& out, const std::string& name, double v) {
  put_tensor(out, name, {1}, &v);
}

inline void put_matrix(std::string& out, const std::string& name, const Matrix& m) {
  put_tensor(out, name, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
             m.data().data());
}

inline void put_vector(std::string& out, const std::string& name, const std::vector<double>& v) {
  put_tensor(out, name, {static_cast<std::uint64_t>(v.size())}, v.data());
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const Model& m = ckpt.model;
  std::string body;
  std::uint32_t count = 0;
  auto scalar = [&](const std::string& name, double v) {
    detail::put_scalar(body, name, v);
    ++count;
  };
  auto matrix = [&](const std::string& name, const Matrix& mat) {
    detail::put_matrix(body, name, mat);
    ++count;
  };
  auto vec = [&](const std::string& name, const std::vector<double>& v) {
    detail::put_vector(body, name, v);
    ++count;
  };

  scalar("k", m.K);
  scalar("alpha", m.lda.alpha);
  scalar("beta", m.lda.beta);
  scalar("eta", m.sup.eta);
  scalar("epsilon", m.sup.epsilon);
  scalar("mix_target", m.mix_target == MixTarget::doc ? 0.0 : 1.0);
  scalar("label_kind", ckpt.label_kind == LabelKind::classification ? 0.0 : 1.0);
  scalar("head_enabled", m.head_enabled ? 1.0 : 0.0);
  vec("ws_raw", m.sup.ws_raw);
  matrix("wc", m.emb.wc);
  if (m.head_enabled) {
    scalar("dropout_p", m.head.dropout_p);
    matrix("head_sa", m.head.s_a);
    vec("head_ta", m.head.t_a);
    matrix("head_sb", m.head.s_b);
    vec("head_tb", m.head.t_b);
    matrix("head_sc", m.head.s_c);
    vec("head_tc", m.head.t_c);
  }
  matrix("word_topic_mass", ckpt.word_topic_mass);
  if (ckpt.messages) matrix("messages", *ckpt.messages);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  std::string header;
  detail::put_u32(header, count);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw ParseError("not a model checkpoint (bad magic)");
  detail::Reader r{buf, sizeof(kCheckpointMagic)};

  const std::uint32_t count = r.u32();
  std::map<std::string, detail::NamedTensor> tensors;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const std::uint32_t rank = r.u32();
    detail::NamedTensor tensor;
    std::uint64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      tensor.dims.push_back(r.u64());
      n *= tensor.dims.back();
    }
    tensor.data.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) tensor.data[i] = r.f64();
    tensors.emplace(name, std::move(tensor));
  }

  auto get = [&](const std::string& name) -> const detail::NamedTensor& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ParseError("checkpoint is missing tensor: " + name);
    return it->second;
  };
  auto scalar = [&](const std::string& name) { return get(name).data.at(0); };
  auto matrix = [&](const std::string& name) {
    const auto& t = get(name);
    if (t.dims.size() != 2) throw ParseError("checkpoint tensor is not a matrix: " + name);
    Matrix m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    m.data() = t.data;
    return m;
  };

  Checkpoint ckpt;
  Model& m = ckpt.model;
  m.K = static_cast<int>(scalar("k"));
  m.lda.alpha = scalar("alpha");
  m.lda.beta = scalar("beta");
  m.sup.eta = scalar("eta");
  m.sup.epsilon = scalar("epsilon");
  m.mix_target = scalar("mix_target") == 0.0 ? MixTarget::doc : MixTarget::word;
  ckpt.label_kind = scalar("label_kind") == 0.0 ? LabelKind::classification : LabelKind::regression;
  m.head_enabled = scalar("head_enabled") != 0.0;
  m.sup.ws_raw = get("ws_raw").data;
  m.emb.wc = matrix("wc");
  if (m.head_enabled) {
    m.head.dropout_p = scalar("dropout_p");
    m.head.s_a = matrix("head_sa");
    m.head.t_a = get("head_ta").data;
    m.head.s_b = matrix("head_sb");
    m.head.t_b = get("head_tb").data;
    m.head.s_c = matrix("head_sc");
    m.head.t_c = get("head_tc").data;
  }
  ckpt.word_topic_mass = matrix("word_topic_mass");
  if (tensors.count("messages")) ckpt.messages = matrix("messages");
  return ckpt;
}

}  // namespace nalda
