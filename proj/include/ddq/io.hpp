#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <unistd.h>

#include "json.hpp"

#include "ddq/error.hpp"
#include "ddq/factors.hpp"
#include "ddq/generators.hpp"
#include "ddq/matrix.hpp"
#include "ddq/report.hpp"

namespace ddq {

enum class MatrixFormat { matrix_market, csv };

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline std::string where(const std::string& path, std::size_t line) { return path + ":" + std::to_string(line) + ": "; }

// Parses a real; non-finite values are rejected separately from malformed ones.
inline double parse_real(std::string_view tok, const std::string& path, std::size_t line) {
  tok = trim(tok);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size())
    throw Error(ErrorKind::ParseError, where(path, line) + "not a number: '" + std::string(tok) + "'");
  if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteEntry, where(path, line) + "'" + std::string(tok) + "'");
  return v;
}

inline std::size_t parse_count(std::string_view tok, const std::string& path, std::size_t line) {
  tok = trim(tok);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size())
    throw Error(ErrorKind::ParseError, where(path, line) + "not a non-negative integer: '" + std::string(tok) + "'");
  return v;
}

inline std::string format_real(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::IoError, "read failed for '" + path + "'");
  return ss.str();
}

inline DenseMatrix read_matrix_market(const std::string& text, const std::string& path) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 1;
  std::getline(in, line);
  const std::string banner_line = lower(line);
  const auto banner = split_ws(banner_line);
  if (banner.size() < 5 || banner[0] != "%%matrixmarket" || banner[1] != "matrix")
    throw Error(ErrorKind::ParseError, where(path, 1) + "missing MatrixMarket banner");
  const std::string layout(banner[2]), field(banner[3]), symmetry(banner[4]);
  if (layout != "array" && layout != "coordinate")
    throw Error(ErrorKind::ParseError, where(path, 1) + "unsupported layout '" + layout + "'");
  if (field != "real" && field != "integer" && field != "double")
    throw Error(ErrorKind::ParseError, where(path, 1) + "unsupported field '" + field + "'");
  if (symmetry != "general")
    throw Error(ErrorKind::ParseError, where(path, 1) + "unsupported symmetry '" + symmetry + "'");

  // next non-comment line holds the sizes
  std::vector<std::string_view> size_tokens;
  std::string size_line;
  while (std::getline(in, size_line)) {
    ++lineno;
    const auto t = trim(size_line);
    if (t.empty() || t.front() == '%') continue;
    size_tokens = split_ws(t);
    break;
  }
  const bool coord = layout == "coordinate";
  if (size_tokens.size() != (coord ? 3u : 2u))
    throw Error(ErrorKind::ParseError, where(path, lineno) + "malformed size line");
  const std::size_t rows = parse_count(size_tokens[0], path, lineno);
  const std::size_t cols = parse_count(size_tokens[1], path, lineno);
  if (rows == 0 || cols == 0) throw Error(ErrorKind::DimensionMismatch, where(path, lineno) + "empty matrix");
  const std::size_t entries = coord ? parse_count(size_tokens[2], path, lineno) : rows * cols;

  DenseMatrix a(rows, cols);
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '%') continue;
    if (seen == entries) throw Error(ErrorKind::DimensionMismatch, where(path, lineno) + "more entries than declared");
    const auto tok = split_ws(t);
    if (coord) {
      if (tok.size() != 3) throw Error(ErrorKind::ParseError, where(path, lineno) + "expected 'row col value'");
      const std::size_t i = parse_count(tok[0], path, lineno), j = parse_count(tok[1], path, lineno);
      if (i < 1 || i > rows || j < 1 || j > cols)
        throw Error(ErrorKind::DimensionMismatch, where(path, lineno) + "index out of range");
      a(i - 1, j - 1) += parse_real(tok[2], path, lineno);
    } else {
      if (tok.size() != 1) throw Error(ErrorKind::ParseError, where(path, lineno) + "expected one value per line");
      a(seen % rows, seen / rows) = parse_real(tok[0], path, lineno);  // column-major
    }
    ++seen;
  }
  if (seen != entries)
    throw Error(ErrorKind::DimensionMismatch,
                path + ": declared " + std::to_string(entries) + " entries, found " + std::to_string(seen));
  return a;
}

inline DenseMatrix read_csv(const std::string& text, const std::string& path) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, lineno = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto fields = split(t, ',');
    if (rows == 0) cols = fields.size();
    if (fields.size() != cols)
      throw Error(ErrorKind::DimensionMismatch, where(path, lineno) + "expected " + std::to_string(cols) +
                                                    " fields, found " + std::to_string(fields.size()));
    for (auto f : fields) values.push_back(parse_real(f, path, lineno));
    ++rows;
  }
  if (rows == 0) throw Error(ErrorKind::DimensionMismatch, path + ": no data rows");
  return DenseMatrix(rows, cols, std::move(values));
}

}  // namespace detail

/// ".csv" selects CSV; anything else MatrixMarket.
inline MatrixFormat format_for_path(const std::string& path) {
  return detail::lower(std::filesystem::path(path).extension().string()) == ".csv" ? MatrixFormat::csv
                                                                                    : MatrixFormat::matrix_market;
}

/// MatrixMarket (array or coordinate, real general) when the file starts with
/// the %%MatrixMarket banner or has a .mtx/.mm extension; CSV otherwise.
inline DenseMatrix read_matrix(const std::string& path) {
  const std::string text = detail::read_file(path);
  const std::string ext = detail::lower(std::filesystem::path(path).extension().string());
  const bool mm = text.rfind("%%MatrixMarket", 0) == 0 || ext == ".mtx" || ext == ".mm";
  return mm ? detail::read_matrix_market(text, path) : detail::read_csv(text, path);
}

/// Writes to a temporary sibling, then renames over path.
inline void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignore;
      fs::remove(tmp, ignore);
      throw Error(ErrorKind::IoError, "write failed for '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    throw Error(ErrorKind::IoError, "cannot rename onto '" + path + "': " + ec.message());
  }
}

inline std::string format_matrix(const DenseMatrix& a, MatrixFormat format) {
  std::string out;
  if (format == MatrixFormat::matrix_market) {
    out += "%%MatrixMarket matrix array real general\n";
    out += std::to_string(a.rows()) + " " + std::to_string(a.cols()) + "\n";
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t i = 0; i < a.rows(); ++i) {
        out += detail::format_real(a(i, j));
        out += '\n';
      }
    return out;
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (j) out += ',';
      out += detail::format_real(a(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_matrix(const std::string& path, const DenseMatrix& a, MatrixFormat format) {
  write_file_atomic(path, format_matrix(a, format));
}

inline void write_matrix(const std::string& path, const DenseMatrix& a) { write_matrix(path, a, format_for_path(path)); }

/// Two-space indented JSON with sorted keys and a trailing newline.
inline std::string format_report(const ExperimentReport& rep) { return to_json(rep).dump(2) + "\n"; }

inline void write_report(const std::string& path, const ExperimentReport& rep) {
  write_file_atomic(path, format_report(rep));
}

inline ExperimentReport parse_report(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, std::string("report: ") + e.what());
  }
  return report_from_json(j);
}

inline ExperimentReport read_report(const std::string& path) { return parse_report(detail::read_file(path)); }

/// prefix.P, prefix.D, prefix.Q in MatrixMarket array format plus
/// prefix.manifest.json. With normalize set the triple is gauge-normalized
/// first, so a zero column fails before anything is written.
inline void write_factors(const std::string& prefix, const FactorTriple& triple, bool normalize = false) {
  triple.validate();
  const FactorTriple t = normalize ? normalize_gauge(triple) : triple;
  json manifest{{"k", t.rank()},
                {"gauge_normalized", normalize},
                {"files", {{"P", prefix + ".P"}, {"D", prefix + ".D"}, {"Q", prefix + ".Q"}}},
                {"rows", t.p.rows()},
                {"cols", t.q.cols()},
                {"version", std::string(kVersion)}};
  write_matrix(prefix + ".P", t.p, MatrixFormat::matrix_market);
  write_matrix(prefix + ".D", t.d, MatrixFormat::matrix_market);
  write_matrix(prefix + ".Q", t.q, MatrixFormat::matrix_market);
  write_file_atomic(prefix + ".manifest.json", manifest.dump(2) + "\n");
}

inline FactorTriple read_factors(const std::string& prefix) {
  FactorTriple t{read_matrix(prefix + ".P"), read_matrix(prefix + ".D"), read_matrix(prefix + ".Q")};
  t.validate();
  return t;
}

/// "kind:key=value,..." e.g. "low_rank:n=500,k=50,seed=3" or
/// "worked_example:ex37". Keys: n, k, density, sigma, eps, seed.
inline GeneratorSpec parse_generator_spec(std::string_view text) {
  GeneratorSpec spec;
  const std::size_t colon = text.find(':');
  spec.kind = parse_generator_kind(detail::trim(text.substr(0, colon)));
  if (colon == std::string_view::npos) {
    spec.validate();
    return spec;
  }
  const std::string_view rest = text.substr(colon + 1);
  if (spec.kind == GeneratorKind::worked_example) {
    spec.example_id = std::string(detail::trim(rest));
    return spec;
  }
  const std::string where = "generator spec '" + std::string(text) + "'";
  for (auto item : detail::split(rest, ',')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorKind::InvalidArgument, where + ": expected key=value");
    const std::string key(detail::trim(item.substr(0, eq)));
    const std::string_view val = detail::trim(item.substr(eq + 1));
    try {
      if (key == "n")
        spec.n = detail::parse_count(val, where, 1);
      else if (key == "k")
        spec.k = detail::parse_count(val, where, 1);
      else if (key == "seed")
        spec.seed = detail::parse_count(val, where, 1);
      else if (key == "density")
        spec.density = detail::parse_real(val, where, 1);
      else if (key == "sigma" || key == "sigma_noise")
        spec.sigma_noise = detail::parse_real(val, where, 1);
      else if (key == "eps")
        spec.eps = detail::parse_real(val, where, 1);
      else
        throw Error(ErrorKind::InvalidArgument, where + ": unknown key '" + key + "'");
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InvalidArgument) throw;
      throw Error(ErrorKind::InvalidArgument, e.what());
    }
  }
  spec.validate();
  return spec;
}

namespace detail {

// Any problem with a config file is a usage problem, whatever the value parser said.
template <class F>
auto as_config_error(F&& fn) {
  try {
    return fn();
  } catch (const Error& err) {
    throw Error(ErrorKind::InvalidArgument, err.what());
  }
}

}  // namespace detail

/// Flat typed key-value file:
///
///   # comment
///   [section]
///   key = value
///   list_key = 1e-4, 3e-4, 1e-3
///
/// Keys before any section header belong to section "". Values are typed on
/// access; a wrong type is reported with the line it came from. All errors
/// other than an unreadable file are InvalidArgument.
class ConfigFile {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static ConfigFile parse(std::string_view text, std::string source = "<config>") {
    ConfigFile cfg;
    cfg.source_ = std::move(source);
    std::string section;
    std::size_t lineno = 0;
    for (auto raw : detail::split(text, '\n')) {
      ++lineno;
      std::string_view line = raw;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3)
          throw Error(ErrorKind::InvalidArgument, detail::where(cfg.source_, lineno) + "malformed section header");
        section = std::string(detail::trim(line.substr(1, line.size() - 2)));
        cfg.sections_[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw Error(ErrorKind::InvalidArgument, detail::where(cfg.source_, lineno) + "expected 'key = value'");
      const std::string key(detail::trim(line.substr(0, eq)));
      if (key.empty()) throw Error(ErrorKind::InvalidArgument, detail::where(cfg.source_, lineno) + "empty key");
      auto& sec = cfg.sections_[section];
      if (sec.count(key))
        throw Error(ErrorKind::InvalidArgument, detail::where(cfg.source_, lineno) + "duplicate key '" + key + "'");
      sec[key] = {std::string(detail::trim(line.substr(eq + 1))), lineno};
    }
    return cfg;
  }

  static ConfigFile load(const std::string& path) { return parse(detail::read_file(path), path); }

  bool has_section(const std::string& s) const { return sections_.count(s) != 0; }
  bool has(const std::string& s, const std::string& key) const {
    const auto it = sections_.find(s);
    return it != sections_.end() && it->second.count(key) != 0;
  }

  std::optional<std::string> get_string(const std::string& s, const std::string& key) const {
    const Entry* e = find(s, key);
    if (!e) return std::nullopt;
    return e->value;
  }
  std::optional<double> get_real(const std::string& s, const std::string& key) const {
    const Entry* e = find(s, key);
    if (!e) return std::nullopt;
    return detail::as_config_error([&] { return detail::parse_real(e->value, source_, e->line); });
  }
  std::optional<std::uint64_t> get_uint(const std::string& s, const std::string& key) const {
    const Entry* e = find(s, key);
    if (!e) return std::nullopt;
    return detail::as_config_error([&] { return std::uint64_t{detail::parse_count(e->value, source_, e->line)}; });
  }
  std::optional<bool> get_bool(const std::string& s, const std::string& key) const {
    const Entry* e = find(s, key);
    if (!e) return std::nullopt;
    const std::string v = detail::lower(e->value);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw Error(ErrorKind::InvalidArgument, detail::where(source_, e->line) + "expected a boolean for '" + key + "'");
  }
  std::optional<std::vector<double>> get_real_list(const std::string& s, const std::string& key) const {
    const Entry* e = find(s, key);
    if (!e) return std::nullopt;
    std::vector<double> out;
    for (auto item : detail::split(e->value, ','))
      out.push_back(detail::as_config_error([&] { return detail::parse_real(item, source_, e->line); }));
    return out;
  }
  std::optional<std::vector<std::uint64_t>> get_uint_list(const std::string& s, const std::string& key) const {
    const Entry* e = find(s, key);
    if (!e) return std::nullopt;
    std::vector<std::uint64_t> out;
    for (auto item : detail::split(e->value, ','))
      out.push_back(detail::as_config_error([&] { return std::uint64_t{detail::parse_count(item, source_, e->line)}; }));
    return out;
  }
  std::optional<std::vector<std::string>> get_string_list(const std::string& s, const std::string& key) const {
    const Entry* e = find(s, key);
    if (!e) return std::nullopt;
    std::vector<std::string> out;
    for (auto item : detail::split(e->value, ',')) out.emplace_back(detail::trim(item));
    return out;
  }

  /// Keys present in section s, in sorted order.
  std::vector<std::string> keys(const std::string& s) const {
    std::vector<std::string> out;
    if (const auto it = sections_.find(s); it != sections_.end())
      for (const auto& [k, v] : it->second) out.push_back(k);
    return out;
  }
  std::size_t line_of(const std::string& s, const std::string& key) const {
    const Entry* e = find(s, key);
    return e ? e->line : 0;
  }
  const std::string& source() const noexcept { return source_; }

 private:
  const Entry* find(const std::string& s, const std::string& key) const {
    const auto it = sections_.find(s);
    if (it == sections_.end()) return nullptr;
    const auto jt = it->second.find(key);
    return jt == it->second.end() ? nullptr : &jt->second;
  }

  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

}  // namespace ddq
