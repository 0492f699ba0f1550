#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "perspective/tensor.hpp"

namespace perspective {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Builds a checkpoint file image:
///
///   bytes 0..7    magic "PTLCKPT\0"
///   bytes 8..11   format version, uint32 little-endian
///   bytes 12..19  header length N, uint64 little-endian
///   next N bytes  UTF-8 JSON header
///   remainder     payload; each segment is located by the header's
///                 "offset"/"bytes" fields, relative to the payload start.
///
/// Tensor segments hold raw little-endian f32 or f64 values in row-major order.
class CheckpointWriter {
 public:
  explicit CheckpointWriter(nlohmann::json meta = nlohmann::json::object());

  template <typename T>
  void add_tensor(const std::string& name, const Tensor<T>& t);
  /// Adds every entry as "<prefix><name>".
  template <typename T>
  void add_params(const std::string& prefix, const ParamSet<T>& p);
  void add_blob(const std::string& name, std::vector<std::uint8_t> bytes);

  nlohmann::json& meta() { return meta_; }
  std::vector<std::uint8_t> bytes() const;
  void write(const std::filesystem::path& path) const;

 private:
  void add_segment(nlohmann::json seg, const void* data, std::size_t n);

  nlohmann::json meta_;
  nlohmann::json segments_ = nlohmann::json::array();
  std::vector<std::uint8_t> payload_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(std::vector<std::uint8_t> bytes);
  static CheckpointReader read(const std::filesystem::path& path);

  const nlohmann::json& meta() const { return meta_; }
  bool has(const std::string& name) const;

  /// Throws CheckpointError on a dtype or missing-segment problem.
  template <typename T>
  Tensor<T> tensor(const std::string& name) const;
  /// Loads "<prefix><name>" for every entry of `into`, checking shapes.
  template <typename T>
  void load_params(const std::string& prefix, ParamSet<T>& into) const;
  std::vector<std::uint8_t> blob(const std::string& name) const;

 private:
  const nlohmann::json& segment(const std::string& name) const;

  std::vector<std::uint8_t> bytes_;
  std::size_t payload_offset_ = 0;
  nlohmann::json meta_;
  nlohmann::json segments_;
};

/// Little-endian byte stream helpers used for blob payloads.
class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const std::vector<std::uint8_t>& b) {
    put<std::uint64_t>(b.size());
    bytes_.insert(bytes_.end(), b.begin(), b.end());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw CheckpointError("truncated blob");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::vector<std::uint8_t> get_bytes();
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace perspective
