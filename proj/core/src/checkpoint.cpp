#include "narrsum/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace narrsum::ad {
namespace {

constexpr char kMagic[8] = {'N', 'S', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(T));
  }
  return v;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  write_u64(out, bits);
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return to_little(v);
}

}  // namespace

const NamedTensor* CheckpointData::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const PrefixedSets& sets,
                     const std::string& config_hash, const nlohmann::json& meta) {
  nlohmann::ordered_json header;
  header["config_hash"] = config_hash;
  header["meta"] = meta;
  header["tensors"] = nlohmann::ordered_json::array();
  for (const auto& [prefix, set] : sets) {
    for (const Parameter* p : set->all()) {
      header["tensors"].push_back(
          {{"name", prefix + "/" + p->name()}, {"shape", {p->shape().rows, p->shape().cols}}});
    }
  }
  const std::string text = header.dump();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    write_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [prefix, set] : sets) {
      for (const Parameter* p : set->all()) {
        for (double v : p->data()) write_f64(out, v);
      }
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const std::uint64_t length = read_u64(in);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(text);

  CheckpointData data;
  data.config_hash = header.at("config_hash").get<std::string>();
  data.meta = header.at("meta");
  for (const auto& t : header.at("tensors")) {
    NamedTensor tensor;
    tensor.name = t.at("name").get<std::string>();
    tensor.shape = {t.at("shape").at(0).get<std::size_t>(), t.at("shape").at(1).get<std::size_t>()};
    tensor.values.resize(tensor.shape.size());
    for (double& v : tensor.values) v = std::bit_cast<double>(read_u64(in));
    data.tensors.push_back(std::move(tensor));
  }
  return data;
}

void load_parameters(const CheckpointData& data, const std::string& prefix,
                     ParameterSet& params) {
  for (Parameter* p : params.all()) {
    const std::string name = prefix + "/" + p->name();
    const NamedTensor* t = data.find(name);
    if (!t) throw std::runtime_error("checkpoint is missing tensor " + name);
    if (!(t->shape == p->shape())) {
      throw ShapeError("checkpoint tensor " + name + " has shape " + t->shape.str() +
                       ", expected " + p->shape().str());
    }
    std::copy(t->values.begin(), t->values.end(), p->data().begin());
  }
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

}  // namespace narrsum::ad
