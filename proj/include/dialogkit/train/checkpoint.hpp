#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialogkit/errors.hpp"
#include "dialogkit/train/tiny_lm.hpp"

namespace dialogkit::train {

inline constexpr const char* kCheckpointFormat = "dialogkit-checkpoint-1";

struct Checkpoint {
  TinyLM model;
  // Optional string vocabulary; empty for purely numeric corpora.
  std::vector<std::string> vocab;
};

namespace detail {

inline void put_le_double(std::ostream& out, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline double get_le_double(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

/// One JSON header line (shapes, model dims, optional vocabulary), then every
/// tensor as column-major little-endian float64 in header order.
inline void save_checkpoint(std::ostream& out, const TinyLM& model, const std::vector<std::string>& vocab = {}) {
  nlohmann::ordered_json h;
  h["format"] = kCheckpointFormat;
  h["vocab_size"] = model.vocab_size();
  h["hidden"] = model.hidden_size();
  if (auto a = model.adapter()) {
    h["lora_rank"] = a->rank;
    h["lora_alpha"] = a->alpha;
  }
  auto tensors = nlohmann::ordered_json::array();
  for (const auto& p : model.parameters())
    tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  h["tensors"] = tensors;
  h["vocab"] = vocab;
  out << h.dump() << '\n';
  for (const auto& p : model.parameters())
    for (Eigen::Index j = 0; j < p.value.cols(); ++j)
      for (Eigen::Index i = 0; i < p.value.rows(); ++i) detail::put_le_double(out, p.value(i, j));
  if (!out) throw IoError("failed writing checkpoint", 0);
}

inline void save_checkpoint(const std::string& path, const TinyLM& model, const std::vector<std::string>& vocab = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing", 0);
  save_checkpoint(out, model, vocab);
}

inline Checkpoint load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("checkpoint header missing", 0);
  const std::uint64_t header_bytes = line.size() + 1;
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint header is not JSON: ") + e.what(), 0);
  }
  if (h.value("format", "") != kCheckpointFormat) throw IoError("unknown checkpoint format", 0);

  Checkpoint c;
  try {
    c.model = TinyLM(h.at("vocab_size").get<int>(), h.at("hidden").get<int>(), 0);
    if (h.contains("lora_rank")) {
      LoraAdapter a = LoraAdapter::init(c.model.vocab_size(), c.model.hidden_size(), h.at("lora_rank").get<int>(),
                                        h.at("lora_alpha").get<double>(), 0);
      c.model.attach_adapter(a);
    }
    c.vocab = h.value("vocab", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what(), 0);
  }

  auto& params = c.model.parameters();
  const auto& tensors = h.at("tensors");
  if (tensors.size() != params.size()) throw IoError("checkpoint tensor count mismatch", 0);
  std::uint64_t offset = header_bytes;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    const auto& t = tensors[k];
    if (t.at("name").get<std::string>() != p.name || t.at("rows").get<Eigen::Index>() != p.value.rows() ||
        t.at("cols").get<Eigen::Index>() != p.value.cols())
      throw IoError("checkpoint tensor " + std::to_string(k) + " does not match model layout", offset);
    std::vector<unsigned char> buf(static_cast<std::size_t>(p.value.size()) * 8);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
      throw IoError("checkpoint truncated in tensor " + p.name, offset + static_cast<std::uint64_t>(in.gcount()));
    std::size_t at = 0;
    for (Eigen::Index j = 0; j < p.value.cols(); ++j)
      for (Eigen::Index i = 0; i < p.value.rows(); ++i, at += 8) p.value(i, j) = detail::get_le_double(&buf[at]);
    offset += buf.size();
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes after checkpoint tensors", offset);
  return c;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path, 0);
  return load_checkpoint(in);
}

}  // namespace dialogkit::train
