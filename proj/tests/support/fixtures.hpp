#pragma once

#include "fairproxy/dataset.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

namespace fairproxy::testing {

inline std::shared_ptr<RawTable> raw_from_text(const std::string& schema_text, const std::string& csv) {
  std::istringstream ss(schema_text), cs(csv);
  auto raw = std::make_shared<RawTable>();
  raw->schema = SchemaSpec::parse(ss);
  read_csv_into(*raw, cs, "fixture");
  return raw;
}

inline std::string schema_dir() {
  const char* d = std::getenv("FAIRPROXY_SCHEMA_DIR");
  return d ? d : FAIRPROXY_DEFAULT_SCHEMA_DIR;
}

// Directory holding adult.data / adult.test, or "" when unavailable.
inline std::string adult_dir() {
  const char* d = std::getenv("FAIRPROXY_ADULT_DIR");
  const std::string dir = d ? d : FAIRPROXY_DEFAULT_ADULT_DIR;
  return std::filesystem::exists(dir + "/adult.data") && std::filesystem::exists(dir + "/adult.test") ? dir : "";
}

}  // namespace fairproxy::testing
