#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace segadv::io {

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Little-endian IEEE-754 bytes as lowercase hex; decodes back bit-exactly.
std::string encode_hex(std::span<const double> values);
std::vector<double> decode_hex(const std::string& hex);

}  // namespace segadv::io
