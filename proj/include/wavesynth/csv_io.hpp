#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wavesynth/error.hpp"
#include "wavesynth/processes.hpp"
#include "wavesynth/wavelet.hpp"

namespace wavesynth::io {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Data, "cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

inline std::vector<double> parse_row(std::string_view line) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t comma = line.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? line.size() : comma;
    out.push_back(parse_double(line.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Ordered `key=value` fields of a `# ...` header line.
using HeaderFields = std::vector<std::pair<std::string, std::string>>;

inline std::string format_header(const HeaderFields& fields) {
  std::string line = "#";
  for (const auto& [k, v] : fields) line += " " + k + "=" + v;
  return line;
}

inline std::map<std::string, std::string> parse_header(std::string_view line) {
  if (line.empty() || line.front() != '#') throw Error(ErrorKind::Data, "missing '#' header line");
  line.remove_prefix(1);
  std::map<std::string, std::string> out;
  std::istringstream is{std::string(line)};
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Data, "malformed header field '" + token + "'");
    out[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return out;
}

inline const std::string& header_field(const std::map<std::string, std::string>& h, const std::string& key) {
  const auto it = h.find(key);
  if (it == h.end()) throw Error(ErrorKind::Data, "header is missing field '" + key + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Dataset CSV: `# kind=.. n=.. L=.. dt=.. seed=..` then one series per row.

inline HeaderFields process_fields(const ProcessSpec& spec) {
  return {{"mu", format_double(spec.drift)},
          {"sigma", format_double(spec.volatility)},
          {"terminal", format_double(spec.terminal)},
          {"T", format_double(spec.horizon)}};
}

inline void write_dataset(std::ostream& os, const Dataset& ds, std::string_view kind, const HeaderFields& extra = {}) {
  ds.validate();
  HeaderFields fields{{"kind", std::string(kind)},
                      {"n", std::to_string(ds.size())},
                      {"L", std::to_string(ds.length())},
                      {"dt", format_double(ds.dt())},
                      {"seed", std::to_string(ds.seed)}};
  fields.insert(fields.end(), extra.begin(), extra.end());
  os << format_header(fields) << '\n';
  for (const auto& s : ds.series) {
    const auto v = s.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) os << ',';
      os << format_double(v[i]);
    }
    os << '\n';
  }
}

struct DatasetFile {
  Dataset dataset;
  std::map<std::string, std::string> header;
};

inline DatasetFile read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::Data, "empty dataset file");
  DatasetFile file;
  file.header = parse_header(line);
  const double dt = parse_double(header_field(file.header, "dt"));
  const auto n = std::stoull(header_field(file.header, "n"));
  const auto length = std::stoull(header_field(file.header, "L"));
  file.dataset.label = header_field(file.header, "kind");
  file.dataset.seed = std::stoull(header_field(file.header, "seed"));
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    auto values = parse_row(line);
    if (values.size() != length) throw Error(ErrorKind::Shape, "dataset row length does not match header L");
    file.dataset.series.emplace_back(std::move(values), dt);
  }
  if (file.dataset.size() != n) throw Error(ErrorKind::Shape, "dataset row count does not match header n");
  return file;
}

// ---------------------------------------------------------------------------
// Scalogram CSV: `# scales=2,4,..,256 L=.. [norm_lo=.. norm_hi=..]` then one
// row per scale.

inline void write_scalogram(std::ostream& os, const Scalogram& sc, const HeaderFields& extra = {}) {
  sc.validate();
  std::string scales;
  for (std::size_t i = 0; i < sc.scales.size(); ++i) scales += (i ? "," : "") + format_double(sc.scales[i]);
  HeaderFields fields{{"scales", scales}, {"L", std::to_string(sc.width())}};
  if (sc.norm) {
    fields.emplace_back("norm_lo", format_double(sc.norm->lo));
    fields.emplace_back("norm_hi", format_double(sc.norm->hi));
  }
  fields.insert(fields.end(), extra.begin(), extra.end());
  os << format_header(fields) << '\n';
  for (Eigen::Index r = 0; r < sc.height(); ++r) {
    for (Eigen::Index c = 0; c < sc.width(); ++c) {
      if (c) os << ',';
      os << format_double(sc.coeffs(r, c));
    }
    os << '\n';
  }
}

struct ScalogramFile {
  Scalogram scalogram;
  std::map<std::string, std::string> header;
};

inline ScalogramFile read_scalogram(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::Data, "empty scalogram file");
  ScalogramFile file;
  file.header = parse_header(line);
  file.scalogram.scales = parse_row(header_field(file.header, "scales"));
  const auto width = static_cast<Eigen::Index>(std::stoll(header_field(file.header, "L")));
  const auto height = static_cast<Eigen::Index>(file.scalogram.scales.size());
  if (file.header.count("norm_lo") || file.header.count("norm_hi")) {
    file.scalogram.norm = NormParams{parse_double(header_field(file.header, "norm_lo")),
                                     parse_double(header_field(file.header, "norm_hi"))};
  }
  file.scalogram.coeffs.resize(height, width);
  Eigen::Index r = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    if (r >= height) throw Error(ErrorKind::Shape, "scalogram has more rows than scales");
    const auto values = parse_row(line);
    if (static_cast<Eigen::Index>(values.size()) != width) throw Error(ErrorKind::Shape, "scalogram row length does not match L");
    for (Eigen::Index c = 0; c < width; ++c) file.scalogram.coeffs(r, c) = values[static_cast<std::size_t>(c)];
    ++r;
  }
  if (r != height) throw Error(ErrorKind::Shape, "scalogram has fewer rows than scales");
  file.scalogram.validate();
  return file;
}

// ---------------------------------------------------------------------------
// File helpers

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  return os;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  return is;
}

}  // namespace wavesynth::io
