#include "impactbench/model/weights_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"

namespace impactbench::model {

namespace {

constexpr const char* kWeightsFormat = "impactbench-toycnn";

std::uint64_t to_little_endian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(bits);
  return bits;
}

}  // namespace

void write_header_and_doubles(std::ostream& out, const nlohmann::json& header, std::span<const double> values) {
  out << header.dump() << '\n';
  for (double v : values) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
    char bytes[8];
    std::memcpy(bytes, &bits, sizeof bits);
    out.write(bytes, sizeof bytes);
  }
}

nlohmann::json read_header(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw IoError(fmt::format("{}: missing header line", what));
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("{}: malformed header: {}", what, e.what()));
  }
}

std::vector<double> read_doubles(std::istream& in, std::size_t count, const std::string& what) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    char bytes[8];
    if (!in.read(bytes, sizeof bytes)) {
      throw IoError(fmt::format("{}: payload truncated at value {} of {}", what, i, count));
    }
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes, sizeof bits);
    out[i] = std::bit_cast<double>(to_little_endian(bits));
  }
  return out;
}

nlohmann::json architecture_to_json(const Architecture& arch) {
  return {{"in_channels", arch.in_channels}, {"height", arch.height},         {"width", arch.width},
          {"conv_channels", arch.conv_channels}, {"kernel", arch.kernel},     {"num_classes", arch.num_classes},
          {"activation", to_string(arch.activation)}, {"pool", "avg2x2"},     {"padding", "same"}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
  try {
    Architecture arch;
    arch.in_channels = j.at("in_channels").get<int>();
    arch.height = j.at("height").get<int>();
    arch.width = j.at("width").get<int>();
    arch.conv_channels = j.at("conv_channels").get<int>();
    arch.kernel = j.at("kernel").get<int>();
    arch.num_classes = j.at("num_classes").get<int>();
    arch.activation = activation_from_string(j.value("activation", std::string("relu")));
    arch.validate();
    return arch;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("invalid architecture descriptor: {}", e.what()));
  }
}

void save_weights(const std::filesystem::path& path, const ToyCnn& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write weights file {}", path.string()));
  const Parameters& p = model.parameters();
  nlohmann::json header = {
      {"format", kWeightsFormat},
      {"version", 1},
      {"architecture", architecture_to_json(model.architecture())},
      {"counts",
       {{"conv_weights", p.conv_weights.size()},
        {"conv_bias", p.conv_bias.size()},
        {"dense_weights", p.dense_weights.size()},
        {"dense_bias", p.dense_bias.size()}}},
  };
  std::vector<double> flat;
  for (const auto* block : {&p.conv_weights, &p.conv_bias, &p.dense_weights, &p.dense_bias}) {
    flat.insert(flat.end(), block->begin(), block->end());
  }
  write_header_and_doubles(out, header, flat);
  if (!out) throw IoError(fmt::format("failed writing weights file {}", path.string()));
}

ToyCnn load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open weights file {}", path.string()));
  const std::string what = path.string();
  const nlohmann::json header = read_header(in, what);
  if (header.value("format", std::string()) != kWeightsFormat) {
    throw IoError(fmt::format("{}: not a toy CNN weights file", what));
  }
  const Architecture arch = architecture_from_json(header.at("architecture"));
  Parameters p = Parameters::zeros(arch);
  const auto& counts = header.at("counts");
  for (auto [name, block] : {std::pair{"conv_weights", &p.conv_weights}, std::pair{"conv_bias", &p.conv_bias},
                             std::pair{"dense_weights", &p.dense_weights}, std::pair{"dense_bias", &p.dense_bias}}) {
    const auto count = counts.at(name).get<std::size_t>();
    if (count != block->size()) {
      throw IoError(fmt::format("{}: {} count {} does not match architecture ({})", what, name, count, block->size()));
    }
    *block = read_doubles(in, count, what);
  }
  return ToyCnn(arch, std::move(p));
}

}  // namespace impactbench::model
