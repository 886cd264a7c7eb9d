#pragma once

// Data ingestion: weighted CSV catalogs, SDSS-style magnitude catalogs and
// grayscale PGM images.

#include <gdf/error.hpp>
#include <gdf/sample.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace gdf {

// ---------------------------------------------------------------- catalogs

/// Columns are given by header name, or by zero-based index when the file
/// has no header (an all-digit name is always read as an index).
struct CatalogSpec {
  std::vector<std::string> coordinate_columns;
  std::string weight_column;
  bool has_header = true;
  std::size_t rejection_budget = 0;
};

struct RejectedRow {
  std::size_t line = 0;  ///< 1-based line number in the file
  std::string reason;
};

struct CatalogLoad {
  WeightedSample sample;
  std::vector<RejectedRow> rejected;
  std::size_t rows_read = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline bool is_index(std::string_view s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string_view::npos;
}

inline std::size_t resolve_column(const std::string& name, const std::vector<std::string>& header) {
  if (is_index(name)) return static_cast<std::size_t>(std::stoul(name));
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorCode::Ingestion, "column '" + name + "' not found" +
                                        (header.empty() ? std::string(" (file has no header)") : std::string()));
}

/// Reads non-comment, non-blank lines; calls row(line_number, fields).
template <typename RowFn>
std::vector<std::string> for_each_csv_row(const std::filesystem::path& path, bool has_header, RowFn&& row) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Ingestion, "cannot open " + path.string());
  std::vector<std::string> header;
  bool header_pending = has_header;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto fields = split_csv(body);
    if (header_pending) {
      for (auto f : fields) header.emplace_back(f);
      header_pending = false;
      continue;
    }
    row(lineno, fields);
  }
  if (in.bad()) throw Error(ErrorCode::Ingestion, "read error on " + path.string());
  return header;
}

inline std::vector<std::string> read_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Ingestion, "cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::vector<std::string> header;
    for (auto f : split_csv(body)) header.emplace_back(f);
    return header;
  }
  return {};
}

inline WeightedSample assemble(const std::vector<double>& coords, const std::vector<double>& weights,
                               std::size_t dim) {
  if (weights.empty()) throw Error(ErrorCode::Ingestion, "no valid rows");
  Matrix pts = Eigen::Map<const Matrix>(coords.data(), static_cast<Eigen::Index>(dim),
                                        static_cast<Eigen::Index>(weights.size()));
  return WeightedSample(std::move(pts), Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size())));
}

inline void enforce_budget(const std::vector<RejectedRow>& rejected, std::size_t budget) {
  if (rejected.size() <= budget) return;
  std::ostringstream os;
  os << rejected.size() << " rejected row(s) exceed the budget of " << budget << ":";
  for (std::size_t i = 0; i < std::min<std::size_t>(rejected.size(), 10); ++i) {
    os << " line " << rejected[i].line << " (" << rejected[i].reason << ")";
  }
  throw Error(ErrorCode::Ingestion, os.str());
}

}  // namespace detail

/// Loads a weighted point catalog. Rows with malformed fields or a
/// non-positive / non-finite weight are rejected; more than
/// spec.rejection_budget rejections fail the load.
inline CatalogLoad load_catalog(const std::filesystem::path& path, const CatalogSpec& spec) {
  if (spec.coordinate_columns.empty()) throw Error(ErrorCode::Ingestion, "at least one coordinate column required");
  const std::vector<std::string> header = spec.has_header ? detail::read_header(path) : std::vector<std::string>{};
  std::vector<std::size_t> cols;
  for (const auto& c : spec.coordinate_columns) cols.push_back(detail::resolve_column(c, header));
  const std::size_t wcol = detail::resolve_column(spec.weight_column, header);

  std::vector<double> coords, weights;
  std::vector<RejectedRow> rejected;
  std::size_t rows = 0;
  detail::for_each_csv_row(path, spec.has_header, [&](std::size_t lineno, const std::vector<std::string_view>& f) {
    ++rows;
    std::vector<double> point;
    for (std::size_t c : cols) {
      auto v = c < f.size() ? detail::parse_double(f[c]) : std::nullopt;
      if (!v || !std::isfinite(*v)) {
        rejected.push_back({lineno, "bad coordinate in column " + std::to_string(c)});
        return;
      }
      point.push_back(*v);
    }
    auto w = wcol < f.size() ? detail::parse_double(f[wcol]) : std::nullopt;
    if (!w) {
      rejected.push_back({lineno, "unparseable weight"});
      return;
    }
    if (!std::isfinite(*w) || *w <= 0.0) {
      rejected.push_back({lineno, "weight must be finite and > 0"});
      return;
    }
    coords.insert(coords.end(), point.begin(), point.end());
    weights.push_back(*w);
  });
  detail::enforce_budget(rejected, spec.rejection_budget);
  return {detail::assemble(coords, weights, cols.size()), std::move(rejected), rows};
}

/// Magnitude-based mass proxy r - 5 log10(4.28e8 * z).
inline double sdss_mass(double r, double z) {
  if (!std::isfinite(r) || !std::isfinite(z)) throw Error(ErrorCode::InvalidInput, "magnitude and redshift must be finite");
  if (z <= 0.0) throw Error(ErrorCode::InvalidInput, "redshift must be > 0");
  return r - 5.0 * std::log10(4.28e8 * z);
}

enum class MassTransform {
  None,       ///< weight = mass proxy as computed (magnitude-like, usually negative)
  Luminous,   ///< weight = 10^(-0.4 * mass proxy)
};

struct SdssSpec {
  std::string ra_column = "ra";
  std::string dec_column = "dec";
  std::string redshift_column = "z";
  std::string magnitude_column = "r";
  MassTransform transform = MassTransform::None;
  std::optional<std::pair<double, double>> redshift_slice;  ///< keep rows with z in [lo, hi]
  std::size_t rejection_budget = 0;
};

/// Loads (RA, DEC) positions weighted by the mass proxy of each galaxy.
/// Rows outside the redshift slice are skipped, not rejected.
inline CatalogLoad load_sdss_catalog(const std::filesystem::path& path, const SdssSpec& spec) {
  const auto header = detail::read_header(path);
  const std::size_t ra = detail::resolve_column(spec.ra_column, header);
  const std::size_t dec = detail::resolve_column(spec.dec_column, header);
  const std::size_t zc = detail::resolve_column(spec.redshift_column, header);
  const std::size_t rc = detail::resolve_column(spec.magnitude_column, header);

  std::vector<double> coords, weights;
  std::vector<RejectedRow> rejected;
  std::size_t rows = 0;
  detail::for_each_csv_row(path, true, [&](std::size_t lineno, const std::vector<std::string_view>& f) {
    ++rows;
    auto get = [&](std::size_t c) { return c < f.size() ? detail::parse_double(f[c]) : std::nullopt; };
    const auto a = get(ra), d = get(dec), z = get(zc), r = get(rc);
    if (!a || !d || !z || !r || !std::isfinite(*a) || !std::isfinite(*d)) {
      rejected.push_back({lineno, "malformed row"});
      return;
    }
    if (spec.redshift_slice && (*z < spec.redshift_slice->first || *z > spec.redshift_slice->second)) return;
    if (!(*z > 0.0) || !std::isfinite(*r)) {
      rejected.push_back({lineno, "redshift must be > 0 and magnitude finite"});
      return;
    }
    const double mass = sdss_mass(*r, *z);
    const double w = spec.transform == MassTransform::Luminous ? std::pow(10.0, -0.4 * mass) : mass;
    if (!std::isfinite(w) || w <= 0.0) {
      rejected.push_back({lineno, "weight must be finite and > 0"});
      return;
    }
    coords.push_back(*a);
    coords.push_back(*d);
    weights.push_back(w);
  });
  detail::enforce_budget(rejected, spec.rejection_budget);
  return {detail::assemble(coords, weights, 2), std::move(rejected), rows};
}

/// Record count declared in a "# records: N" header comment, if present.
inline std::optional<std::size_t> declared_record_count(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    std::string_view body = detail::trim(line);
    if (body.empty()) continue;
    if (body.front() != '#') break;
    constexpr std::string_view key = "records:";
    const auto pos = body.find(key);
    if (pos == std::string_view::npos) continue;
    body = detail::trim(body.substr(pos + key.size()));
    std::size_t n = 0;
    const auto res = std::from_chars(body.data(), body.data() + body.size(), n);
    if (res.ec == std::errc()) return n;
  }
  return std::nullopt;
}

// ------------------------------------------------------------------ images

/// Grayscale raster in row-major order (row 0 is the top row of the file).
struct ImageGrid {
  int width = 0;
  int height = 0;
  std::vector<double> intensities;
  bool normalized = false;

  double at(int row, int col) const {
    return intensities[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)];
  }

  void validate() const {
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidInput, "image dimensions must be positive");
    if (intensities.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(ErrorCode::InvalidInput, "image intensity count does not match width x height");
    }
    for (double v : intensities) {
      if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::InvalidInput, "image intensities must be finite and >= 0");
    }
  }
};

namespace detail {

/// Next whitespace-delimited PGM header token, skipping '#' comments.
inline std::string pgm_token(std::istream& in) {
  std::string tok;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok += c;
  }
  return tok;
}

inline int pgm_int(std::istream& in, const char* what) {
  const std::string tok = pgm_token(in);
  int v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v <= 0) {
    throw Error(ErrorCode::Ingestion, std::string("bad PGM ") + what + ": '" + tok + "'");
  }
  return v;
}

}  // namespace detail

/// Reads plain (P2) or raw (P5) PGM with maxval up to 65535.
inline ImageGrid read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Ingestion, "cannot open " + path.string());
  const std::string magic = detail::pgm_token(in);
  if (magic != "P2" && magic != "P5") throw Error(ErrorCode::Ingestion, "not a grayscale PGM (magic " + magic + ")");
  ImageGrid img;
  img.width = detail::pgm_int(in, "width");
  img.height = detail::pgm_int(in, "height");
  const int maxval = detail::pgm_int(in, "maxval");
  if (maxval > 65535) throw Error(ErrorCode::Ingestion, "PGM maxval above 65535");
  const std::size_t count = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.intensities.resize(count);
  if (magic == "P2") {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string tok = detail::pgm_token(in);
      int v = -1;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || v < 0 || v > maxval) throw Error(ErrorCode::Ingestion, "bad PGM sample");
      img.intensities[i] = v;
    }
  } else {
    // pgm_token consumed exactly one whitespace byte after maxval.
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(count * static_cast<std::size_t>(bytes));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw Error(ErrorCode::Ingestion, "truncated PGM raster");
    for (std::size_t i = 0; i < count; ++i) {
      const unsigned v = bytes == 1 ? raw[i] : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
      if (v > static_cast<unsigned>(maxval)) throw Error(ErrorCode::Ingestion, "PGM sample above maxval");
      img.intensities[i] = v;
    }
  }
  return img;
}

/// Writes a raw PGM, quantising intensities in [0, max] to `maxval`.
inline std::string encode_pgm(const ImageGrid& img, int maxval = 255) {
  img.validate();
  const double top = *std::max_element(img.intensities.begin(), img.intensities.end());
  std::ostringstream os(std::ios::binary);
  os << "P5\n" << img.width << ' ' << img.height << '\n' << maxval << '\n';
  for (double v : img.intensities) {
    const auto q = static_cast<unsigned>(std::lround(top > 0.0 ? v / top * maxval : 0.0));
    if (maxval < 256) {
      os.put(static_cast<char>(q));
    } else {
      os.put(static_cast<char>(q >> 8));
      os.put(static_cast<char>(q & 0xff));
    }
  }
  return os.str();
}

inline ImageGrid normalize(ImageGrid img) {
  img.validate();
  const double top = *std::max_element(img.intensities.begin(), img.intensities.end());
  if (!(top > 0.0)) throw Error(ErrorCode::EmptyResult, "image is entirely zero");
  for (double& v : img.intensities) v /= top;
  img.normalized = true;
  return img;
}

struct ImageSampleOptions {
  double threshold = 0.15;
  /// false: y = row + 0.5 grows downward (raster order);
  /// true: y = height - row - 0.5 grows upward.
  bool flip_y = false;
};

/// One sample point per pixel whose max-normalised intensity exceeds the
/// threshold, at the pixel centre, weighted by that intensity.
inline WeightedSample image_to_sample(const ImageGrid& img, const ImageSampleOptions& opts = {}) {
  if (!std::isfinite(opts.threshold)) throw Error(ErrorCode::InvalidInput, "threshold must be finite");
  const ImageGrid norm = normalize(img);
  std::vector<double> coords, weights;
  for (int row = 0; row < norm.height; ++row) {
    for (int col = 0; col < norm.width; ++col) {
      const double v = norm.at(row, col);
      if (v <= opts.threshold || v <= 0.0) continue;
      coords.push_back(col + 0.5);
      coords.push_back(opts.flip_y ? norm.height - row - 0.5 : row + 0.5);
      weights.push_back(v);
    }
  }
  if (weights.empty()) throw Error(ErrorCode::EmptyResult, "no pixel exceeds the intensity threshold");
  return detail::assemble(coords, weights, 2);
}

inline WeightedSample image_to_sample(const ImageGrid& img, double threshold) {
  ImageSampleOptions opts;
  opts.threshold = threshold;
  return image_to_sample(img, opts);
}

}  // namespace gdf
