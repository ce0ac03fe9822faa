#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "caumvc/error.hpp"
#include "caumvc/rng.hpp"
#include "caumvc/tensor.hpp"

namespace caumvc {

/// V feature matrices over the same N samples. Labels, when present, index view-0 rows.
struct MultiViewDataset {
  std::vector<Matrix> views;
  std::optional<std::vector<int>> labels;
  std::string name;

  std::size_t num_samples() const { return views.empty() ? 0 : views.front().rows(); }
  std::size_t num_views() const { return views.size(); }
  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d;
    for (const auto& v : views) d.push_back(v.cols());
    return d;
  }
  std::size_t num_classes() const {
    if (!labels || labels->empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
  }
};

inline void validate(const MultiViewDataset& ds) {
  if (ds.views.size() < 2) throw ArgumentError("dataset needs at least 2 views, got " + std::to_string(ds.views.size()));
  const std::size_t n = ds.views.front().rows();
  if (n == 0) throw ArgumentError("dataset has no samples");
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    if (ds.views[v].rows() != n) {
      throw ShapeError("view " + std::to_string(v) + " has " + std::to_string(ds.views[v].rows()) +
                       " rows, view 0 has " + std::to_string(n));
    }
    if (ds.views[v].cols() == 0) throw ShapeError("view " + std::to_string(v) + " has no features");
    if (!ds.views[v].all_finite()) throw ArgumentError("view " + std::to_string(v) + " has non-finite entries");
  }
  if (ds.labels) {
    if (ds.labels->size() != n) throw ShapeError("labels length != sample count");
    const std::size_t k = ds.num_classes();
    std::vector<bool> seen(k, false);
    for (int l : *ds.labels) {
      if (l < 0) throw ArgumentError("negative label");
      seen[static_cast<std::size_t>(l)] = true;
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (!seen[c]) throw ArgumentError("label " + std::to_string(c) + " is not represented");
    }
  }
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& cell, std::size_t row, std::size_t col) {
  const std::string t = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ParseError("not a finite number: '" + t + "'", row, col);
  }
  return v;
}

}  // namespace detail

/// Headerless comma-separated floats, one sample per row.
inline Matrix read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++rows;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      data.push_back(detail::parse_double(cell, rows, c + 1));
      ++c;
    }
    if (rows == 1) {
      cols = c;
    } else if (c != cols) {
      throw ParseError(path.filename().string() + ": expected " + std::to_string(cols) + " columns, found " +
                           std::to_string(c),
                       rows, c);
    }
  }
  return Matrix(rows, cols, std::move(data));
}

inline std::vector<int> read_label_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<int> labels;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    ++row;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw ParseError("not an integer label: '" + t + "'", row, 1);
    labels.push_back(v);
  }
  return labels;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline void write_csv_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_label_file(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (int l : labels) out << l << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

/// Reads view_0.csv ... view_{V-1}.csv and optional labels.csv from `dir`.
inline MultiViewDataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  MultiViewDataset ds;
  ds.name = dir.filename().string();
  for (std::size_t v = 0;; ++v) {
    const fs::path p = dir / ("view_" + std::to_string(v) + ".csv");
    if (!fs::exists(p)) break;
    ds.views.push_back(read_csv_matrix(p));
  }
  if (ds.views.size() < 2) {
    throw ArgumentError("expected at least 2 view files in " + dir.string() + ", found " + std::to_string(ds.views.size()));
  }
  if (fs::exists(dir / "labels.csv")) ds.labels = read_label_file(dir / "labels.csv");
  validate(ds);
  return ds;
}

inline void save_dataset(const MultiViewDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    write_csv_matrix(dir / ("view_" + std::to_string(v) + ".csv"), ds.views[v]);
  }
  if (ds.labels) write_label_file(dir / "labels.csv", *ds.labels);
}

/// Per-column [min, max] of every view, used to map features into [0, 1].
struct FeatureRange {
  std::vector<std::vector<double>> lo;
  std::vector<std::vector<double>> hi;
};

inline FeatureRange feature_range(const MultiViewDataset& ds) {
  FeatureRange r;
  for (const auto& view : ds.views) {
    std::vector<double> lo(view.cols(), 0.0), hi(view.cols(), 0.0);
    for (std::size_t j = 0; j < view.cols(); ++j) {
      double a = view(0, j), b = view(0, j);
      for (std::size_t i = 1; i < view.rows(); ++i) {
        a = std::min(a, view(i, j));
        b = std::max(b, view(i, j));
      }
      lo[j] = a;
      hi[j] = b;
    }
    r.lo.push_back(std::move(lo));
    r.hi.push_back(std::move(hi));
  }
  return r;
}

/// Maps with a previously measured range. Constant columns map to 0; values outside the
/// measured range are clipped into [0, 1].
inline MultiViewDataset apply_feature_range(const MultiViewDataset& ds, const FeatureRange& r) {
  if (r.lo.size() != ds.views.size()) throw ShapeError("feature range view count mismatch");
  MultiViewDataset out = ds;
  for (std::size_t v = 0; v < out.views.size(); ++v) {
    auto& view = out.views[v];
    if (r.lo[v].size() != view.cols()) throw ShapeError("feature range width mismatch on view " + std::to_string(v));
    for (std::size_t j = 0; j < view.cols(); ++j) {
      const double span = r.hi[v][j] - r.lo[v][j];
      for (std::size_t i = 0; i < view.rows(); ++i) {
        view(i, j) = span > 0.0 ? std::clamp((view(i, j) - r.lo[v][j]) / span, 0.0, 1.0) : 0.0;
      }
    }
  }
  return out;
}

inline MultiViewDataset minmax_normalize(const MultiViewDataset& ds) {
  return apply_feature_range(ds, feature_range(ds));
}

struct SyntheticSpec {
  std::size_t n = 600;
  std::size_t k = 4;
  std::size_t views = 3;
  std::vector<std::size_t> dims{10, 10, 10};
  double separation = 10.0;
  double noise = 0.5;
  std::uint64_t seed = 0;
};

/// Gaussian blobs per view sharing one label sequence. Centers are standard-normal draws
/// rescaled so that the closest pair of centers sits exactly `separation` apart.
inline MultiViewDataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.k == 0 || spec.n < 2 * spec.k) throw ArgumentError("make_synthetic: need n >= 2k");
  if (spec.views < 2) throw ArgumentError("make_synthetic: need at least 2 views");
  if (spec.dims.size() != spec.views) throw ArgumentError("make_synthetic: dims list length != views");
  for (auto d : spec.dims) {
    if (d < 2) throw ArgumentError("make_synthetic: every dim must be >= 2");
  }
  if (!(spec.separation > 0.0)) throw ArgumentError("make_synthetic: separation must be > 0");
  if (!(spec.noise >= 0.0)) throw ArgumentError("make_synthetic: noise must be >= 0");

  Rng rng(spec.seed);
  std::vector<int> labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) labels[i] = static_cast<int>(i % spec.k);
  rng.shuffle(std::span<int>(labels));

  MultiViewDataset ds;
  ds.name = "synthetic";
  for (std::size_t v = 0; v < spec.views; ++v) {
    const std::size_t dim = spec.dims[v];
    Matrix centers = rng.normal_matrix(spec.k, dim);
    if (spec.k > 1) {
      double closest = INFINITY;
      for (std::size_t a = 0; a < spec.k; ++a) {
        for (std::size_t b = a + 1; b < spec.k; ++b) {
          double d2 = 0.0;
          for (std::size_t j = 0; j < dim; ++j) d2 += (centers(a, j) - centers(b, j)) * (centers(a, j) - centers(b, j));
          closest = std::min(closest, std::sqrt(d2));
        }
      }
      for (double& c : centers.data()) c *= spec.separation / closest;
    }
    Matrix view(spec.n, dim);
    for (std::size_t i = 0; i < spec.n; ++i) {
      const auto c = centers.row(static_cast<std::size_t>(labels[i]));
      for (std::size_t j = 0; j < dim; ++j) view(i, j) = c[j] + spec.noise * rng.normal();
    }
    ds.views.push_back(std::move(view));
  }
  ds.labels = std::move(labels);
  return ds;
}

/// Cross-view correspondence produced by the misalignment intervention. Row i of view v in
/// the shifted data holds original row permutations[v][i]; view 0 is always the identity.
struct AlignmentMap {
  std::vector<std::vector<std::size_t>> permutations;
  std::vector<bool> aligned_mask;
  double ratio = 1.0;
  std::uint64_t seed = 0;

  friend bool operator==(const AlignmentMap&, const AlignmentMap&) = default;
};

inline bool is_bijection(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != i) return false;
  }
  return true;
}

inline std::size_t aligned_count(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
}

/// Rows in the aligned subset keep their partners; every other row of each view v >= 1 is
/// moved to a different unaligned slot (a uniform derangement), so the number of fixed
/// points is exactly round(ratio * N).
inline AlignmentMap make_alignment(std::size_t n, std::size_t num_views, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ArgumentError("ratio must be in [0, 1], got " + format_double(ratio));
  const std::size_t keep = aligned_count(n, ratio);
  if (n - keep == 1) throw ArgumentError("cannot misalign exactly one sample; adjust ratio");

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));

  AlignmentMap map;
  map.ratio = ratio;
  map.seed = seed;
  map.aligned_mask.assign(n, false);
  for (std::size_t i = 0; i < keep; ++i) map.aligned_mask[order[i]] = true;

  std::vector<std::size_t> unaligned;
  for (std::size_t i = 0; i < n; ++i) {
    if (!map.aligned_mask[i]) unaligned.push_back(i);
  }

  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), 0);
  map.permutations.push_back(identity);
  for (std::size_t v = 1; v < num_views; ++v) {
    std::vector<std::size_t> perm = identity;
    if (!unaligned.empty()) {
      std::vector<std::size_t> slots(unaligned.size());
      std::iota(slots.begin(), slots.end(), 0);
      bool deranged = false;
      while (!deranged) {
        rng.shuffle(std::span<std::size_t>(slots));
        deranged = true;
        for (std::size_t s = 0; s < slots.size(); ++s) {
          if (slots[s] == s) {
            deranged = false;
            break;
          }
        }
      }
      for (std::size_t s = 0; s < slots.size(); ++s) perm[unaligned[s]] = unaligned[slots[s]];
    }
    map.permutations.push_back(std::move(perm));
  }
  return map;
}

inline MultiViewDataset apply_alignment(const MultiViewDataset& ds, const AlignmentMap& map, bool invert) {
  const std::size_t n = ds.num_samples();
  if (map.permutations.size() != ds.views.size()) throw ShapeError("alignment map view count != dataset views");
  for (const auto& p : map.permutations) {
    if (p.size() != n) throw ShapeError("alignment map length " + std::to_string(p.size()) + " != N " + std::to_string(n));
  }
  MultiViewDataset out = ds;
  for (std::size_t v = 1; v < ds.views.size(); ++v) {
    const auto& perm = map.permutations[v];
    const Matrix& src = ds.views[v];
    Matrix& dst = out.views[v];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t from = invert ? i : perm[i];
      const std::size_t to = invert ? perm[i] : i;
      std::copy(src.row(from).begin(), src.row(from).end(), dst.row(to).begin());
    }
  }
  return out;
}

inline std::pair<MultiViewDataset, AlignmentMap> inject_misalignment(const MultiViewDataset& ds, double ratio,
                                                                     std::uint64_t seed) {
  AlignmentMap map = make_alignment(ds.num_samples(), ds.num_views(), ratio, seed);
  MultiViewDataset shifted = apply_alignment(ds, map, false);
  return {std::move(shifted), std::move(map)};
}

inline nlohmann::json to_json(const AlignmentMap& map) {
  nlohmann::json j;
  j["permutations"] = map.permutations;
  j["aligned_mask"] = map.aligned_mask;
  j["ratio"] = map.ratio;
  j["seed"] = map.seed;
  return j;
}

inline AlignmentMap alignment_from_json(const nlohmann::json& j) {
  AlignmentMap map;
  try {
    map.permutations = j.at("permutations").get<std::vector<std::vector<std::size_t>>>();
    map.aligned_mask = j.at("aligned_mask").get<std::vector<bool>>();
    map.ratio = j.at("ratio").get<double>();
    map.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("alignment.json: ") + e.what(), 0, 0);
  }
  for (const auto& p : map.permutations) {
    if (p.size() != map.aligned_mask.size() || !is_bijection(p)) throw ArgumentError("alignment.json: invalid permutation");
  }
  return map;
}

inline void save_alignment(const AlignmentMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(map).dump() << '\n';
}

inline AlignmentMap load_alignment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("alignment.json: ") + e.what(), 0, 0);
  }
  return alignment_from_json(j);
}

}  // namespace caumvc
