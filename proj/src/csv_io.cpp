#include "volfied/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include <fmt/format.h>

namespace volfied {
namespace {

struct LineReader {
  std::ifstream in;
  std::string source;
  std::size_t line_no = 0;
  std::string line;

  explicit LineReader(const std::filesystem::path& path)
      : in(path), source(path.string()) {
    if (!in) throw std::runtime_error("cannot open " + source);
  }

  bool next() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& reason) const {
    throw ParseError(source, line_no, reason);
  }
};

double parse_real(const LineReader& r, std::string_view field,
                  std::string_view what) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    r.fail(fmt::format("bad {} '{}'", what, field));
  }
  return v;
}

std::uint32_t parse_id(const LineReader& r, std::string_view field,
                       std::string_view what) {
  std::uint32_t v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    r.fail(fmt::format("bad {} '{}'", what, field));
  }
  return v;
}

void append_coords(std::string& out, const FeatureVector& f) {
  for (double c : f.coords()) fmt::format_to(std::back_inserter(out), ",{}", c);
}

std::string feature_header(std::size_t n) {
  std::string h;
  for (std::size_t i = 1; i <= n; ++i) h += fmt::format(",f{}", i);
  return h;
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line,
                       const std::string& reason)
    : std::runtime_error(fmt::format("{}:{}: {}", source, line, reason)),
      line_(line) {}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<Ad> read_ads_csv(const std::filesystem::path& path) {
  LineReader r(path);
  if (!r.next()) r.fail("missing header");
  const auto header = split_csv_line(r.line);
  if (header.size() < 5 || header.front() != "ad_id" ||
      header[header.size() - 3] != "base_value" ||
      header[header.size() - 2] != "scope" || header.back() != "target_poa") {
    r.fail("header must be ad_id,f1,...,fn,base_value,scope,target_poa");
  }
  const std::size_t n = header.size() - 4;

  std::vector<Ad> ads;
  while (r.next()) {
    const auto f = split_csv_line(r.line);
    if (f.size() != header.size()) {
      r.fail(fmt::format("expected {} fields, got {}", header.size(), f.size()));
    }
    const AdId id{parse_id(r, f[0], "ad_id")};
    std::vector<double> coords(n);
    for (std::size_t i = 0; i < n; ++i) {
      coords[i] = parse_real(r, f[1 + i], "feature");
    }
    const double value = parse_real(r, f[n + 1], "base_value");
    AdScope scope;
    if (f[n + 2] == "G") {
      if (!f[n + 3].empty()) r.fail("global ad must have empty target_poa");
    } else if (f[n + 2] == "L") {
      scope = AdScope::local(PoAId{parse_id(r, f[n + 3], "target_poa")});
    } else {
      r.fail(fmt::format("scope must be G or L, got '{}'", f[n + 2]));
    }
    try {
      ads.emplace_back(id, FeatureVector(std::move(coords)), value, scope);
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
  }
  return ads;
}

std::string format_ads_csv(const std::vector<Ad>& ads) {
  const std::size_t n = ads.empty() ? 1 : ads.front().features.dimension();
  std::string out = "ad_id" + feature_header(n) + ",base_value,scope,target_poa\n";
  for (const Ad& ad : ads) {
    fmt::format_to(std::back_inserter(out), "{}", ad.id.value);
    append_coords(out, ad.features);
    if (ad.scope.is_global()) {
      fmt::format_to(std::back_inserter(out), ",{},G,\n", ad.base_value);
    } else {
      fmt::format_to(std::back_inserter(out), ",{},L,{}\n", ad.base_value,
                     ad.scope.target->value);
    }
  }
  return out;
}

std::vector<PoA> read_poas_csv(const std::filesystem::path& path) {
  LineReader r(path);
  if (!r.next()) r.fail("missing header");
  if (r.line != "poa_id,x_m,y_m,range_m") {
    r.fail("header must be poa_id,x_m,y_m,range_m");
  }
  std::vector<PoA> poas;
  while (r.next()) {
    const auto f = split_csv_line(r.line);
    if (f.size() != 4) r.fail(fmt::format("expected 4 fields, got {}", f.size()));
    try {
      poas.emplace_back(PoAId{parse_id(r, f[0], "poa_id")},
                        parse_real(r, f[1], "x_m"), parse_real(r, f[2], "y_m"),
                        parse_real(r, f[3], "range_m"));
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
  }
  return poas;
}

std::string format_poas_csv(const std::vector<PoA>& poas) {
  std::string out = "poa_id,x_m,y_m,range_m\n";
  for (const PoA& p : poas) {
    fmt::format_to(std::back_inserter(out), "{},{},{},{}\n", p.id.value, p.x_m,
                   p.y_m, p.range_m);
  }
  return out;
}

std::vector<VehicleProfile> read_profiles_csv(
    const std::filesystem::path& path) {
  LineReader r(path);
  if (!r.next()) r.fail("missing header");
  const auto header = split_csv_line(r.line);
  if (header.size() < 2 || header.front() != "vehicle_id") {
    r.fail("header must be vehicle_id,f1,...,fn");
  }
  std::vector<VehicleProfile> profiles;
  while (r.next()) {
    const auto f = split_csv_line(r.line);
    if (f.size() != header.size()) {
      r.fail(fmt::format("expected {} fields, got {}", header.size(), f.size()));
    }
    std::vector<double> coords;
    for (std::size_t i = 1; i < f.size(); ++i) {
      coords.push_back(parse_real(r, f[i], "feature"));
    }
    try {
      profiles.push_back({VehicleId{parse_id(r, f[0], "vehicle_id")},
                          FeatureVector(std::move(coords))});
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
  }
  return profiles;
}

std::string format_profiles_csv(const std::vector<VehicleProfile>& profiles) {
  const std::size_t n =
      profiles.empty() ? 1 : profiles.front().interests.dimension();
  std::string out = "vehicle_id" + feature_header(n) + "\n";
  for (const VehicleProfile& p : profiles) {
    fmt::format_to(std::back_inserter(out), "{}", p.id.value);
    append_coords(out, p.interests);
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace volfied
