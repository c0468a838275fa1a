#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "grideta/common.hpp"

namespace grideta::io {

/// Versioned binary container: magic "GETA", format version, a JSON header
/// describing named sections, then the raw little-endian payload. The header
/// stores an FNV-1a checksum of the payload; load verifies it.
class Container {
 public:
  nlohmann::json meta;

  void put_f64(const std::string& name, std::vector<double> values);
  void put_i64(const std::string& name, std::vector<std::int64_t> values);
  bool has(const std::string& name) const;
  const std::vector<double>& get_f64(const std::string& name) const;
  const std::vector<std::int64_t>& get_i64(const std::string& name) const;
  std::vector<std::string> section_names() const;

  void save(const std::string& path) const;
  static Container load(const std::string& path);

 private:
  struct Section {
    std::string name;
    char dtype;  // 'f' or 'i'
    std::vector<double> f64;
    std::vector<std::int64_t> i64;
  };
  std::vector<Section> sections_;
  const Section& find(const std::string& name) const;
};

std::uint64_t fnv1a64(const unsigned char* data, std::size_t len);

}  // namespace grideta::io
