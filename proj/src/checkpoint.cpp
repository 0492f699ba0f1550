#include "perspective/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace perspective {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

namespace {
constexpr char kMagic[8] = {'P', 'T', 'L', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
const char* dtype_name();
template <>
const char* dtype_name<float>() { return "f32"; }
template <>
const char* dtype_name<double>() { return "f64"; }
}  // namespace

CheckpointWriter::CheckpointWriter(nlohmann::json meta) : meta_(std::move(meta)) {}

void CheckpointWriter::add_segment(nlohmann::json seg, const void* data, std::size_t n) {
  for (const auto& s : segments_)
    if (s.at("name") == seg.at("name")) throw CheckpointError("duplicate segment '" + seg.at("name").get<std::string>() + "'");
  seg["offset"] = payload_.size();
  seg["bytes"] = n;
  const auto* p = static_cast<const std::uint8_t*>(data);
  payload_.insert(payload_.end(), p, p + n);
  segments_.push_back(std::move(seg));
}

template <typename T>
void CheckpointWriter::add_tensor(const std::string& name, const Tensor<T>& t) {
  add_segment({{"name", name}, {"kind", "tensor"}, {"dtype", dtype_name<T>()}, {"shape", t.shape()}}, t.data(),
              t.size() * sizeof(T));
}

template <typename T>
void CheckpointWriter::add_params(const std::string& prefix, const ParamSet<T>& p) {
  for (const auto& [name, t] : p) add_tensor(prefix + name, t);
}

void CheckpointWriter::add_blob(const std::string& name, std::vector<std::uint8_t> bytes) {
  add_segment({{"name", name}, {"kind", "blob"}}, bytes.data(), bytes.size());
}

std::vector<std::uint8_t> CheckpointWriter::bytes() const {
  nlohmann::json header{{"format", "perspective-checkpoint"},
                        {"version", kCheckpointVersion},
                        {"meta", meta_},
                        {"segments", segments_}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  ByteWriter w;
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(text.size());
  auto head = w.take();
  out.insert(out.end(), head.begin(), head.end());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload_.begin(), payload_.end());
  return out;
}

void CheckpointWriter::write(const std::filesystem::path& path) const {
  const auto b = bytes();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!f) throw CheckpointError("failed writing " + path.string());
}

CheckpointReader::CheckpointReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
  if (bytes_.size() < 20 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes_.begin(),
                                        [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }))
    throw CheckpointError("not a checkpoint file");
  std::uint32_t version;
  std::uint64_t header_len;
  std::memcpy(&version, bytes_.data() + 8, 4);
  std::memcpy(&header_len, bytes_.data() + 12, 8);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  if (20 + header_len > bytes_.size()) throw CheckpointError("truncated checkpoint header");
  const std::string text(bytes_.begin() + 20, bytes_.begin() + 20 + static_cast<std::ptrdiff_t>(header_len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  if (header.value("version", 0u) != kCheckpointVersion) throw CheckpointError("header version mismatch");
  meta_ = header.at("meta");
  segments_ = header.at("segments");
  payload_offset_ = 20 + header_len;
  for (const auto& s : segments_)
    if (payload_offset_ + s.at("offset").get<std::size_t>() + s.at("bytes").get<std::size_t>() > bytes_.size())
      throw CheckpointError("truncated checkpoint payload");
}

CheckpointReader CheckpointReader::read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return CheckpointReader(std::move(b));
}

bool CheckpointReader::has(const std::string& name) const {
  for (const auto& s : segments_)
    if (s.at("name") == name) return true;
  return false;
}

const nlohmann::json& CheckpointReader::segment(const std::string& name) const {
  for (const auto& s : segments_)
    if (s.at("name") == name) return s;
  throw CheckpointError("checkpoint has no segment '" + name + "'");
}

template <typename T>
Tensor<T> CheckpointReader::tensor(const std::string& name) const {
  const auto& s = segment(name);
  if (s.at("kind") != "tensor") throw CheckpointError("segment '" + name + "' is not a tensor");
  if (s.at("dtype") != dtype_name<T>())
    throw CheckpointError("segment '" + name + "' has dtype " + s.at("dtype").get<std::string>() + ", expected " +
                          dtype_name<T>());
  auto shape = s.at("shape").get<std::vector<int>>();
  const std::size_t n = Tensor<T>::count(shape);
  if (n * sizeof(T) != s.at("bytes").get<std::size_t>()) throw CheckpointError("segment '" + name + "' size mismatch");
  std::vector<T> values(n);
  std::memcpy(values.data(), bytes_.data() + payload_offset_ + s.at("offset").get<std::size_t>(), n * sizeof(T));
  return Tensor<T>(std::move(shape), std::move(values));
}

template <typename T>
void CheckpointReader::load_params(const std::string& prefix, ParamSet<T>& into) const {
  for (auto& [name, t] : into) {
    Tensor<T> loaded = tensor<T>(prefix + name);
    if (loaded.shape() != t.shape())
      throw CheckpointError("shape mismatch for '" + prefix + name + "': checkpoint has " +
                            shape_string(loaded.shape()) + ", run expects " + shape_string(t.shape()));
    t = std::move(loaded);
  }
}

std::vector<std::uint8_t> CheckpointReader::blob(const std::string& name) const {
  const auto& s = segment(name);
  if (s.at("kind") != "blob") throw CheckpointError("segment '" + name + "' is not a blob");
  const auto begin = bytes_.begin() + static_cast<std::ptrdiff_t>(payload_offset_ + s.at("offset").get<std::size_t>());
  return {begin, begin + static_cast<std::ptrdiff_t>(s.at("bytes").get<std::size_t>())};
}

std::vector<std::uint8_t> ByteReader::get_bytes() {
  const auto n = get<std::uint64_t>();
  if (pos_ + n > bytes_.size()) throw CheckpointError("truncated blob");
  std::vector<std::uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

template void CheckpointWriter::add_tensor<float>(const std::string&, const Tensor<float>&);
template void CheckpointWriter::add_tensor<double>(const std::string&, const Tensor<double>&);
template void CheckpointWriter::add_params<float>(const std::string&, const ParamSet<float>&);
template void CheckpointWriter::add_params<double>(const std::string&, const ParamSet<double>&);
template Tensor<float> CheckpointReader::tensor<float>(const std::string&) const;
template Tensor<double> CheckpointReader::tensor<double>(const std::string&) const;
template void CheckpointReader::load_params<float>(const std::string&, ParamSet<float>&) const;
template void CheckpointReader::load_params<double>(const std::string&, ParamSet<double>&) const;

}  // namespace perspective
