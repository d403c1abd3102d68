#include "segadv/json_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "segadv/errors.hpp"

namespace segadv::io {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string encode_hex(std::span<const double> values) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(values.size() * 16);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int byte = 0; byte < 8; ++byte) {
      const auto b = static_cast<unsigned>((bits >> (8 * byte)) & 0xffu);
      out.push_back(kDigits[b >> 4]);
      out.push_back(kDigits[b & 0xfu]);
    }
  }
  return out;
}

std::vector<double> decode_hex(const std::string& hex) {
  if (hex.size() % 16 != 0) throw InputError("hex block length is not a multiple of 16");
  auto nibble = [](char c) -> std::uint64_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint64_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint64_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint64_t>(c - 'A' + 10);
    throw InputError(std::string("invalid hex digit '") + c + "'");
  };
  std::vector<double> out(hex.size() / 16);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::uint64_t bits = 0;
    for (int byte = 0; byte < 8; ++byte) {
      const std::size_t pos = 16 * k + 2 * static_cast<std::size_t>(byte);
      bits |= ((nibble(hex[pos]) << 4) | nibble(hex[pos + 1])) << (8 * byte);
    }
    out[k] = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace segadv::io
