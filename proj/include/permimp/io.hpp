#pragma once

#include <json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "permimp/randomness.hpp"

namespace permimp::io {

std::string read_file(const std::string& path);

/// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomic(const std::string& path, std::string_view content);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

double parse_double(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(std::string_view text);

nlohmann::json seed_to_json(const SeedSpec& seed);
SeedSpec seed_from_json(const nlohmann::json& j);

}  // namespace permimp::io
