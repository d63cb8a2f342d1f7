// Copyright 2026 The flowgraph Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLOWGRAPH_ENCODER_HPP_
#define FLOWGRAPH_ENCODER_HPP_

#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowgraph/corpus.hpp"
#include "flowgraph/error.hpp"

namespace flowgraph {

// Row-major n x d float32 sentence features; row i belongs to sentence i.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t n, std::size_t d)
      : rows(n), cols(d), values(n * d, 0.0f) {}

  float& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  float at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }

  bool all_finite() const {
    for (float v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const EmbeddingMatrix&) const = default;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace detail

// Lowercased runs of ASCII alphanumerics; bytes >= 0x80 count as word
// characters so UTF-8 words survive intact.
inline std::vector<std::string> hash_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Feature-hashing encoder: unigrams and bigrams land in d signed buckets,
/// then each row is scaled to unit L2 norm. Rows depend only on the
/// sentence text, d and seed.
inline EmbeddingMatrix hash_encode(const std::vector<std::string>& sentences,
                                   std::size_t d, std::uint64_t seed) {
  if (d < 8) throw ValidationError("hash_encode needs d >= 8");
  EmbeddingMatrix m(sentences.size(), d);
  const std::uint64_t basis =
      detail::splitmix64(seed) ^ 0xCBF29CE484222325ull;
  std::vector<double> acc(d);
  for (std::size_t r = 0; r < sentences.size(); ++r) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const auto tokens = hash_tokens(sentences[r]);
    auto add = [&](std::uint64_t h) {
      h = detail::splitmix64(h);
      acc[h % d] += (h >> 63) ? -1.0 : 1.0;
    };
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      add(detail::fnv1a(tokens[t], basis));
      if (t + 1 < tokens.size()) {
        std::uint64_t h = detail::fnv1a(tokens[t], basis);
        h = detail::fnv1a("\x1f", h);
        add(detail::fnv1a(tokens[t + 1], h));
      }
    }
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (std::size_t c = 0; c < d; ++c) {
        m.at(r, c) = static_cast<float>(acc[c] / norm);
      }
    }
  }
  return m;
}

inline constexpr char kEmbeddingMagic[4] = {'F', 'G', 'E', 'M'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

inline void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

// Bounds-checked little-endian cursor over a byte buffer.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string context)
      : data_(data), context_(std::move(context)) {}

  std::size_t remaining() const { return data_.size() - pos_; }

  std::string_view bytes(std::size_t n) {
    if (n > remaining()) {
      throw FormatError(context_ + ": truncated (need " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_) + ", have " +
                        std::to_string(remaining()) + ")");
    }
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32() {
    const auto b = bytes(4);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[k]);
    return v;
  }

  std::uint64_t u64() {
    const auto b = bytes(8);
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[k]);
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string context_;
};

// Writes and fsyncs before returning.
inline void write_file_synced(const std::filesystem::path& path,
                              std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) {
    throw IoError("cannot open '" + path.string() +
                  "' for writing: " + std::strerror(errno));
  }
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t w = ::write(fd, bytes.data() + off, bytes.size() - off);
    if (w < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw IoError("write failed on '" + path.string() +
                    "': " + std::strerror(err));
    }
    off += static_cast<std::size_t>(w);
  }
  if (::fsync(fd) != 0) {
    const int err = errno;
    ::close(fd);
    throw IoError("fsync failed on '" + path.string() +
                  "': " + std::strerror(err));
  }
  if (::close(fd) != 0) {
    throw IoError("close failed on '" + path.string() +
                  "': " + std::strerror(errno));
  }
}

}  // namespace detail

// Metadata trailer: at least doc_id and provider; producers may add keys.
struct EmbeddingTrailer {
  std::string doc_id;
  std::string provider;
  nlohmann::json extra = nlohmann::json::object();
};

inline std::string encode_embeddings(const EmbeddingMatrix& m,
                                     const EmbeddingTrailer& trailer) {
  if (m.rows == 0) throw ValidationError("empty embedding file: zero rows");
  if (m.values.size() != m.rows * m.cols) {
    throw ValidationError("embedding matrix shape does not match its values");
  }
  if (!m.all_finite()) {
    throw ValidationError("embedding matrix contains NaN or infinite values");
  }
  std::string out(kEmbeddingMagic, 4);
  detail::put_u32(out, kEmbeddingVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(m.rows));
  detail::put_u32(out, static_cast<std::uint32_t>(m.cols));
  for (float v : m.values) detail::put_f32(out, v);
  nlohmann::json j = trailer.extra.is_object() ? trailer.extra
                                               : nlohmann::json::object();
  j["doc_id"] = trailer.doc_id;
  j["provider"] = trailer.provider;
  const std::string text = j.dump();
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  return out;
}

inline void write_embeddings(const EmbeddingMatrix& m,
                             const std::filesystem::path& path,
                             const EmbeddingTrailer& trailer = {}) {
  detail::write_file_synced(path, encode_embeddings(m, trailer));
}

struct EmbeddingFile {
  EmbeddingMatrix matrix;
  EmbeddingTrailer trailer;
};

inline EmbeddingFile decode_embeddings(std::string_view bytes,
                                       const std::string& context) {
  detail::ByteReader r(bytes, context);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) {
    throw FormatError(context + ": bad magic, not an embedding file");
  }
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kEmbeddingVersion) {
    throw FormatError(context + ": unsupported embedding format version " +
                      std::to_string(version));
  }
  EmbeddingFile f;
  const std::uint64_t n = r.u32();
  const std::uint64_t d = r.u32();
  if (n == 0) throw FormatError(context + ": empty embedding file");
  if (d == 0) throw FormatError(context + ": zero feature dimension");
  if (n * d * 4 + 4 > r.remaining()) {
    throw FormatError(context + ": truncated payload, header declares " +
                      std::to_string(n) + "x" + std::to_string(d) +
                      " floats but only " + std::to_string(r.remaining()) +
                      " bytes follow the header");
  }
  f.matrix = EmbeddingMatrix(n, d);
  for (auto& v : f.matrix.values) v = r.f32();
  const std::uint32_t len = r.u32();
  if (len != r.remaining()) {
    throw FormatError(context + ": payload size mismatch, trailer declares " +
                      std::to_string(len) + " bytes but " +
                      std::to_string(r.remaining()) + " remain");
  }
  const auto text = r.bytes(len);
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw FormatError(context + ": trailer is not an object");
    f.trailer.doc_id = j.value("doc_id", "");
    f.trailer.provider = j.value("provider", "");
    j.erase("doc_id");
    j.erase("provider");
    f.trailer.extra = std::move(j);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(context + ": malformed trailer JSON: " + e.what());
  }
  if (!f.matrix.all_finite()) {
    throw ValidationError(context + ": embedding values contain NaN or Inf");
  }
  return f;
}

inline EmbeddingFile inspect_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_file(path), path.string());
}

inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  return inspect_embeddings(path).matrix;
}

// Where node features come from: "hash" (built-in encoder) or "file:<dir>"
// holding <doc_id>.fgem embedding files.
struct FeatureSpec {
  std::string source = "hash";
  std::size_t hash_dim = 64;
  std::uint64_t hash_seed = 0;

  bool is_hash() const { return source == "hash"; }
  std::filesystem::path directory() const {
    if (source.rfind("file:", 0) != 0) {
      throw ValidationError("feature source '" + source +
                            "' is neither 'hash' nor 'file:<dir>'");
    }
    return source.substr(5);
  }
};

/// Features for one document from the configured source. File features
/// are read from <dir>/<doc_id>.fgem and must have one row per sentence.
inline EmbeddingMatrix load_features(const Document& doc,
                                     const FeatureSpec& spec) {
  if (spec.is_hash()) {
    return hash_encode(doc.texts(), spec.hash_dim, spec.hash_seed);
  }
  const auto path = spec.directory() / (doc.id + ".fgem");
  if (!std::filesystem::exists(path)) {
    throw IoError("missing embedding file '" + path.string() + "'");
  }
  auto m = load_embeddings(path);
  if (m.rows != doc.size()) {
    throw ValidationError("embedding file '" + path.string() + "' has " +
                          std::to_string(m.rows) + " rows for " +
                          std::to_string(doc.size()) + " sentences");
  }
  return m;
}

}  // namespace flowgraph

#endif  // FLOWGRAPH_ENCODER_HPP_
