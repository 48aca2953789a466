#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "volfied/core_model.hpp"

namespace volfied {

// Malformed input file; what() carries "<path>:<line>: <reason>".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line,
             const std::string& reason);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Splits one CSV record on commas. No quoting: none of our formats need it.
std::vector<std::string_view> split_csv_line(std::string_view line);

// Ads: `ad_id,f1,...,fn,base_value,scope,target_poa` (scope G|L, target
// empty for G). The dimension is inferred from the header.
std::vector<Ad> read_ads_csv(const std::filesystem::path& path);
std::string format_ads_csv(const std::vector<Ad>& ads);

// PoAs: `poa_id,x_m,y_m,range_m`.
std::vector<PoA> read_poas_csv(const std::filesystem::path& path);
std::string format_poas_csv(const std::vector<PoA>& poas);

// Profiles: `vehicle_id,f1,...,fn`.
std::vector<VehicleProfile> read_profiles_csv(
    const std::filesystem::path& path);
std::string format_profiles_csv(const std::vector<VehicleProfile>& profiles);

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

}  // namespace volfied
