#pragma once

// Embedding dump ("PLND") reader and writer.
//
// Layout, all integers little-endian:
//   bytes 0..3   magic "PLND"
//   u32          format version (1)
//   u64          header length in bytes
//   header       UTF-8 JSON object
//   data         float32 little-endian row-major matrices, one per
//                (trial, layer); each header matrix entry gives its byte
//                offset relative to the first data byte.
//
// Token grid: every trial is a repetition of (number_part, comma, space),
// one cycle per numeric sample. The final sample may stop after its number or
// after its comma. Dumps whose tokens break the cycle are rejected.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "planprobe/error.hpp"

namespace planprobe::dump {

inline constexpr std::array<char, 4> kMagic{'P', 'L', 'N', 'D'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kPreambleBytes = 4 + 4 + 8;
// Sanity bound; real headers for 69 trials are a few hundred KiB.
inline constexpr std::uint64_t kMaxHeaderBytes = 1ULL << 30;

enum class TokenRole { number_part, comma, space, other };

inline std::string_view to_string(TokenRole role) {
  switch (role) {
    case TokenRole::number_part: return "number_part";
    case TokenRole::comma: return "comma";
    case TokenRole::space: return "space";
    case TokenRole::other: return "other";
  }
  return "other";
}

inline std::optional<TokenRole> parse_role(std::string_view text) {
  if (text == "number_part") return TokenRole::number_part;
  if (text == "comma") return TokenRole::comma;
  if (text == "space") return TokenRole::space;
  if (text == "other") return TokenRole::other;
  return std::nullopt;
}

/// Dense tokens x hidden_dim float32 block.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }

  bool operator==(const EmbeddingMatrix&) const = default;
};

struct TrialEmbedding {
  std::int64_t trial_id = 0;
  std::vector<std::string> token_texts;
  std::vector<TokenRole> token_roles;
  std::vector<std::int64_t> numeric_values;
  std::vector<EmbeddingMatrix> matrices;  // parallel to EmbeddingDump::layer_indices

  bool operator==(const TrialEmbedding&) const = default;
};

struct EmbeddingDump {
  std::string model_name;
  std::size_t hidden_dim = 0;
  std::vector<int> layer_indices;
  std::optional<std::size_t> samples_per_trial;
  std::vector<TrialEmbedding> trials;

  std::optional<std::size_t> layer_slot(int layer) const {
    auto it = std::find(layer_indices.begin(), layer_indices.end(), layer);
    if (it == layer_indices.end()) return std::nullopt;
    return static_cast<std::size_t>(it - layer_indices.begin());
  }

  bool operator==(const EmbeddingDump&) const = default;
};

/// Per-token sample membership derived from the validated grid.
struct TokenGrid {
  std::vector<int> sample_of_token;  // -1 unless the token is a number part
  std::size_t sample_count = 0;
};

namespace detail {

inline std::optional<std::int64_t> parse_integer_text(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

/// Validates the (number, comma, space) cycle and the value count for one
/// trial. Throws AlignmentError naming the trial and offending token.
inline TokenGrid validate_token_grid(const TrialEmbedding& trial,
                                     std::optional<std::size_t> expected_samples = std::nullopt) {
  const std::size_t tokens = trial.token_roles.size();
  if (trial.token_texts.size() != tokens)
    throw AlignmentError(fmt::format("trial {}: {} token texts but {} token roles", trial.trial_id,
                                     trial.token_texts.size(), tokens));
  if (tokens == 0) throw AlignmentError(fmt::format("trial {}: no tokens", trial.trial_id));

  static constexpr std::array<TokenRole, 3> kCycle{TokenRole::number_part, TokenRole::comma,
                                                   TokenRole::space};
  TokenGrid grid;
  grid.sample_of_token.assign(tokens, -1);
  for (std::size_t t = 0; t < tokens; ++t) {
    const TokenRole want = kCycle[t % 3];
    if (trial.token_roles[t] != want)
      throw AlignmentError(fmt::format("trial {}: token {} ('{}') has role {}, grid expects {}",
                                       trial.trial_id, t, trial.token_texts[t],
                                       to_string(trial.token_roles[t]), to_string(want)));
    if (want == TokenRole::number_part) grid.sample_of_token[t] = static_cast<int>(t / 3);
  }
  grid.sample_count = (tokens + 2) / 3;

  if (trial.numeric_values.size() != grid.sample_count)
    throw AlignmentError(fmt::format("trial {}: {} numeric values but token grid holds {} samples",
                                     trial.trial_id, trial.numeric_values.size(),
                                     grid.sample_count));
  if (expected_samples && grid.sample_count != *expected_samples)
    throw AlignmentError(fmt::format("trial {}: {} samples, dump declares {} per trial",
                                     trial.trial_id, grid.sample_count, *expected_samples));
  for (std::size_t t = 0; t < tokens; t += 3) {
    const auto parsed = detail::parse_integer_text(trial.token_texts[t]);
    if (parsed && *parsed != trial.numeric_values[t / 3])
      throw AlignmentError(fmt::format("trial {}: token {} reads {} but recorded value is {}",
                                       trial.trial_id, t, *parsed, trial.numeric_values[t / 3]));
  }
  return grid;
}

inline void validate(const EmbeddingDump& dump) {
  if (dump.hidden_dim == 0) throw FormatError("hidden_dim must be > 0");
  if (dump.layer_indices.empty()) throw FormatError("dump has no layers");
  std::set<int> layers(dump.layer_indices.begin(), dump.layer_indices.end());
  if (layers.size() != dump.layer_indices.size()) throw FormatError("duplicate layer index");
  std::set<std::int64_t> ids;
  for (const auto& trial : dump.trials) {
    if (!ids.insert(trial.trial_id).second)
      throw FormatError(fmt::format("duplicate trial id {}", trial.trial_id));
    validate_token_grid(trial, dump.samples_per_trial);
    if (trial.matrices.size() != dump.layer_indices.size())
      throw FormatError(fmt::format("trial {}: {} matrices for {} layers", trial.trial_id,
                                    trial.matrices.size(), dump.layer_indices.size()));
    for (std::size_t s = 0; s < trial.matrices.size(); ++s) {
      const auto& m = trial.matrices[s];
      if (m.rows != trial.token_roles.size() || m.cols != dump.hidden_dim ||
          m.data.size() != m.rows * m.cols)
        throw FormatError(fmt::format("trial {} layer {}: matrix is {}x{}, expected {}x{}",
                                      trial.trial_id, dump.layer_indices[s], m.rows, m.cols,
                                      trial.token_roles.size(), dump.hidden_dim));
    }
  }
}

inline void write_dump(const EmbeddingDump& dump, const std::filesystem::path& path) {
  validate(dump);
  nlohmann::json header;
  header["model_name"] = dump.model_name;
  header["hidden_dim"] = dump.hidden_dim;
  header["layer_indices"] = dump.layer_indices;
  header["dtype"] = "float32";
  header["byte_order"] = "little";
  if (dump.samples_per_trial) header["samples_per_trial"] = *dump.samples_per_trial;
  std::uint64_t offset = 0;
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& trial : dump.trials) {
    nlohmann::json t;
    t["trial_id"] = trial.trial_id;
    t["token_texts"] = trial.token_texts;
    std::vector<std::string> roles;
    for (auto r : trial.token_roles) roles.emplace_back(to_string(r));
    t["token_roles"] = roles;
    t["numeric_values"] = trial.numeric_values;
    nlohmann::json mats = nlohmann::json::array();
    for (std::size_t s = 0; s < trial.matrices.size(); ++s) {
      const auto& m = trial.matrices[s];
      mats.push_back({{"layer", dump.layer_indices[s]},
                      {"offset", offset},
                      {"rows", m.rows},
                      {"cols", m.cols}});
      offset += static_cast<std::uint64_t>(m.data.size()) * 4;
    }
    t["matrices"] = mats;
    trials.push_back(std::move(t));
  }
  header["trials"] = std::move(trials);
  const std::string header_text = header.dump();

  std::string preamble(kMagic.begin(), kMagic.end());
  detail::put_u32(preamble, kVersion);
  detail::put_u64(preamble, header_text.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write " + path.string());
  out.write(preamble.data(), static_cast<std::streamsize>(preamble.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  std::vector<unsigned char> buffer;
  for (const auto& trial : dump.trials) {
    for (const auto& m : trial.matrices) {
      buffer.resize(m.data.size() * 4);
      for (std::size_t k = 0; k < m.data.size(); ++k) {
        const auto bits = std::bit_cast<std::uint32_t>(m.data[k]);
        for (int b = 0; b < 4; ++b) buffer[k * 4 + b] = static_cast<unsigned char>(bits >> (8 * b));
      }
      out.write(reinterpret_cast<const char*>(buffer.data()),
                static_cast<std::streamsize>(buffer.size()));
    }
  }
  if (!out) throw FileError("write failed for " + path.string());
}

/// Reads and fully validates a dump. When `layers` is given only those layers
/// are loaded (all must exist in the file). Nothing is returned on failure.
inline EmbeddingDump read_dump(const std::filesystem::path& path,
                               const std::optional<std::vector<int>>& layers = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  if (file_size < kPreambleBytes) throw FormatError("file too short for a PLND preamble");

  std::array<unsigned char, kPreambleBytes> preamble{};
  in.read(reinterpret_cast<char*>(preamble.data()), preamble.size());
  if (std::memcmp(preamble.data(), kMagic.data(), kMagic.size()) != 0)
    throw FormatError("bad magic: not a PLND embedding dump");
  const auto version = static_cast<std::uint32_t>(detail::get_le(preamble.data() + 4, 4));
  if (version != kVersion)
    throw FormatError(fmt::format("unsupported dump version {} (expected {})", version, kVersion));
  const std::uint64_t header_len = detail::get_le(preamble.data() + 8, 8);
  if (header_len > kMaxHeaderBytes || header_len > file_size - kPreambleBytes)
    throw FormatError("truncated dump: header extends past end of file");

  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw FormatError("truncated dump: could not read header");
  const std::uint64_t data_start = kPreambleBytes + header_len;
  const std::uint64_t data_size = file_size - data_start;

  EmbeddingDump dump;
  std::vector<std::vector<std::pair<std::uint64_t, std::size_t>>> placements;
  try {
    const auto header = nlohmann::json::parse(header_text);
    dump.model_name = header.at("model_name").get<std::string>();
    dump.hidden_dim = header.at("hidden_dim").get<std::size_t>();
    dump.layer_indices = header.at("layer_indices").get<std::vector<int>>();
    if (header.contains("dtype") && header["dtype"] != "float32")
      throw FormatError("unsupported dtype " + header["dtype"].dump());
    if (header.contains("byte_order") && header["byte_order"] != "little")
      throw FormatError("unsupported byte order " + header["byte_order"].dump());
    if (header.contains("samples_per_trial"))
      dump.samples_per_trial = header["samples_per_trial"].get<std::size_t>();
    for (const auto& t : header.at("trials")) {
      TrialEmbedding trial;
      trial.trial_id = t.at("trial_id").get<std::int64_t>();
      trial.token_texts = t.at("token_texts").get<std::vector<std::string>>();
      for (const auto& r : t.at("token_roles")) {
        const auto role = parse_role(r.get<std::string>());
        if (!role) throw FormatError(fmt::format("trial {}: unknown token role {}", trial.trial_id,
                                                 r.dump()));
        trial.token_roles.push_back(*role);
      }
      trial.numeric_values = t.at("numeric_values").get<std::vector<std::int64_t>>();
      const auto& mats = t.at("matrices");
      if (mats.size() != dump.layer_indices.size())
        throw FormatError(fmt::format("trial {}: {} matrix entries for {} layers", trial.trial_id,
                                      mats.size(), dump.layer_indices.size()));
      std::vector<std::pair<std::uint64_t, std::size_t>> where;
      for (std::size_t s = 0; s < mats.size(); ++s) {
        const auto& m = mats[s];
        if (m.at("layer").get<int>() != dump.layer_indices[s])
          throw FormatError(fmt::format("trial {}: matrix {} is for layer {}, expected {}",
                                        trial.trial_id, s, m.at("layer").get<int>(),
                                        dump.layer_indices[s]));
        const auto rows = m.at("rows").get<std::size_t>();
        const auto cols = m.contains("cols") ? m["cols"].get<std::size_t>() : dump.hidden_dim;
        if (cols != dump.hidden_dim)
          throw FormatError(fmt::format("trial {}: layer {} has {} columns, hidden_dim is {}",
                                        trial.trial_id, dump.layer_indices[s], cols,
                                        dump.hidden_dim));
        const auto offset = m.at("offset").get<std::uint64_t>();
        const std::uint64_t bytes = static_cast<std::uint64_t>(rows) * cols * 4;
        if (offset > data_size || bytes > data_size - offset)
          throw FormatError(fmt::format("truncated dump: trial {} layer {} extends past end of file",
                                        trial.trial_id, dump.layer_indices[s]));
        trial.matrices.emplace_back();
        trial.matrices.back().rows = rows;
        trial.matrices.back().cols = cols;
        where.emplace_back(offset, rows * cols);
      }
      placements.push_back(std::move(where));
      dump.trials.push_back(std::move(trial));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dump header: ") + e.what());
  }

  std::vector<std::size_t> keep;
  if (layers) {
    for (int layer : *layers) {
      const auto slot = dump.layer_slot(layer);
      if (!slot) throw InvalidParameterError(fmt::format("layer {} not present in dump", layer));
      keep.push_back(*slot);
    }
  } else {
    for (std::size_t s = 0; s < dump.layer_indices.size(); ++s) keep.push_back(s);
  }

  std::vector<unsigned char> buffer;
  for (std::size_t i = 0; i < dump.trials.size(); ++i) {
    auto& trial = dump.trials[i];
    std::vector<EmbeddingMatrix> loaded;
    for (std::size_t s : keep) {
      auto m = trial.matrices[s];
      const auto [offset, count] = placements[i][s];
      buffer.resize(count * 4);
      in.seekg(static_cast<std::streamoff>(data_start + offset));
      in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
      if (!in) throw FormatError("truncated dump: short read of matrix data");
      m.data.resize(count);
      for (std::size_t k = 0; k < count; ++k)
        m.data[k] = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(&buffer[k * 4], 4)));
      loaded.push_back(std::move(m));
    }
    trial.matrices = std::move(loaded);
  }
  if (layers) dump.layer_indices = *layers;

  validate(dump);
  return dump;
}

}  // namespace planprobe::dump
