#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "narrsum/autodiff.hpp"

namespace narrsum::ad {

// Binary layout: 8-byte magic "NSCKPT01", little-endian uint64 header length,
// JSON header, then every tensor's float64 values (little-endian, row-major)
// in header order. Header: {"config_hash", "meta", "tensors": [{"name",
// "shape": [rows, cols]}]}.

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct CheckpointData {
  std::string config_hash;
  nlohmann::json meta;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

/// Parameter sets keyed by a prefix; tensor names become "<prefix>/<name>".
using PrefixedSets = std::vector<std::pair<std::string, const ParameterSet*>>;

void save_checkpoint(const std::filesystem::path& path, const PrefixedSets& sets,
                     const std::string& config_hash, const nlohmann::json& meta);

CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Copies "<prefix>/<name>" tensors into `params`; every parameter must be
/// present with a matching shape.
void load_parameters(const CheckpointData& data, const std::string& prefix,
                     ParameterSet& params);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace narrsum::ad
