#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "impactbench/model/toy_cnn.hpp"

namespace impactbench::model {

// Binary payload files: one JSON header line, then little-endian float64s.
void write_header_and_doubles(std::ostream& out, const nlohmann::json& header, std::span<const double> values);
nlohmann::json read_header(std::istream& in, const std::string& what);
std::vector<double> read_doubles(std::istream& in, std::size_t count, const std::string& what);

nlohmann::json architecture_to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

// Header: {"format":"impactbench-toycnn","version":1,"architecture":{...},"counts":{...}}
void save_weights(const std::filesystem::path& path, const ToyCnn& model);
ToyCnn load_weights(const std::filesystem::path& path);

}  // namespace impactbench::model
