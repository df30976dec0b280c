#include "scarfcn/io_util.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "scarfcn/error.hpp"

namespace scarfcn::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  }
}

void append_f64_le(std::string& out, std::span<const double> values) {
  const std::size_t offset = out.size();
  out.resize(offset + values.size_bytes());
  std::memcpy(out.data() + offset, values.data(), values.size_bytes());
}

void append_u32_le(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void append_u64_le(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

void write_f64_le(const std::filesystem::path& path, std::span<const double> values) {
  std::string bytes;
  append_f64_le(bytes, values);
  write_text(path, bytes);
}

std::vector<double> read_f64_le(const std::filesystem::path& path) {
  const std::string bytes = read_text(path);
  if (bytes.size() % sizeof(double) != 0) {
    throw InputError(path.string() + ": size " + std::to_string(bytes.size()) +
                     " is not a multiple of 8");
  }
  std::vector<double> values(bytes.size() / sizeof(double));
  std::memcpy(values.data(), bytes.data(), bytes.size());
  return values;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace scarfcn::io
