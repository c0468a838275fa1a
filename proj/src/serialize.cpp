#include "grideta/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace grideta::io {

static_assert(std::endian::native == std::endian::little,
              "container payload is little-endian");

namespace {
constexpr char kMagic[4] = {'G', 'E', 'T', 'A'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::uint64_t fnv1a64(const unsigned char* data, std::size_t len) {
  std::uint64_t hash = 1469598103934665603ull;
  for (std::size_t i = 0; i < len; ++i) {
    hash ^= data[i];
    hash *= 1099511628211ull;
  }
  return hash;
}

void Container::put_f64(const std::string& name, std::vector<double> values) {
  Section s;
  s.name = name;
  s.dtype = 'f';
  s.f64 = std::move(values);
  sections_.push_back(std::move(s));
}

void Container::put_i64(const std::string& name, std::vector<std::int64_t> values) {
  Section s;
  s.name = name;
  s.dtype = 'i';
  s.i64 = std::move(values);
  sections_.push_back(std::move(s));
}

bool Container::has(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.name == name) return true;
  return false;
}

const Container::Section& Container::find(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.name == name) return s;
  fail(Errc::parse_error, "container is missing section '" + name + "'");
}

const std::vector<double>& Container::get_f64(const std::string& name) const {
  const Section& s = find(name);
  if (s.dtype != 'f') fail(Errc::parse_error, "section '" + name + "' is not f64");
  return s.f64;
}

const std::vector<std::int64_t>& Container::get_i64(const std::string& name) const {
  const Section& s = find(name);
  if (s.dtype != 'i') fail(Errc::parse_error, "section '" + name + "' is not i64");
  return s.i64;
}

std::vector<std::string> Container::section_names() const {
  std::vector<std::string> names;
  for (const auto& s : sections_) names.push_back(s.name);
  return names;
}

void Container::save(const std::string& path) const {
  std::vector<unsigned char> payload;
  nlohmann::json header;
  header["meta"] = meta;
  header["sections"] = nlohmann::json::array();
  for (const auto& s : sections_) {
    const std::size_t count = s.dtype == 'f' ? s.f64.size() : s.i64.size();
    header["sections"].push_back({{"name", s.name},
                                  {"dtype", std::string(1, s.dtype)},
                                  {"count", count},
                                  {"offset", payload.size()}});
    const std::size_t bytes = count * 8;
    const std::size_t base = payload.size();
    payload.resize(base + bytes);
    const void* src = s.dtype == 'f' ? static_cast<const void*>(s.f64.data())
                                     : static_cast<const void*>(s.i64.data());
    if (bytes > 0) std::memcpy(payload.data() + base, src, bytes);
  }
  header["checksum"] = fnv1a64(payload.data(), payload.size());

  const std::string header_str = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::parse_error, "cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), 8);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) fail(Errc::parse_error, "short write to '" + path + "'");
}

Container Container::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::parse_error, "cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    fail(Errc::parse_error, "'" + path + "' is not a container file");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kVersion)
    fail(Errc::parse_error, "unsupported container version " + std::to_string(version));
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), 8);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) fail(Errc::parse_error, "truncated container header in '" + path + "'");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, std::string("bad container header: ") + e.what());
  }

  std::vector<unsigned char> payload((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
  const std::uint64_t expect = header.at("checksum").get<std::uint64_t>();
  if (fnv1a64(payload.data(), payload.size()) != expect)
    fail(Errc::parse_error, "payload checksum mismatch in '" + path + "'");

  Container c;
  c.meta = header.value("meta", nlohmann::json::object());
  for (const auto& js : header.at("sections")) {
    Section s;
    s.name = js.at("name").get<std::string>();
    s.dtype = js.at("dtype").get<std::string>().at(0);
    const std::size_t count = js.at("count").get<std::size_t>();
    const std::size_t offset = js.at("offset").get<std::size_t>();
    if (offset + count * 8 > payload.size())
      fail(Errc::parse_error, "section '" + s.name + "' overruns payload");
    if (s.dtype == 'f') {
      s.f64.resize(count);
      if (count > 0) std::memcpy(s.f64.data(), payload.data() + offset, count * 8);
    } else if (s.dtype == 'i') {
      s.i64.resize(count);
      if (count > 0) std::memcpy(s.i64.data(), payload.data() + offset, count * 8);
    } else {
      fail(Errc::parse_error, "unknown section dtype in '" + path + "'");
    }
    c.sections_.push_back(std::move(s));
  }
  return c;
}

}  // namespace grideta::io
