#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "caumvc/data.hpp"
#include "caumvc/error.hpp"

namespace caumvc {

enum class Ablation { kFull, kNoCau, kNoCon, kNoCauCon };

inline const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kNoCau: return "no_cau";
    case Ablation::kNoCon: return "no_con";
    case Ablation::kNoCauCon: return "no_cau_con";
    case Ablation::kFull: break;
  }
  return "full";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::kFull;
  if (s == "no_cau") return Ablation::kNoCau;
  if (s == "no_con") return Ablation::kNoCon;
  if (s == "no_cau_con") return Ablation::kNoCauCon;
  throw ArgumentError("unknown ablation mode '" + s + "' (expected full|no_cau|no_con|no_cau_con)");
}

inline bool uses_causal_branch(Ablation a) { return a == Ablation::kFull || a == Ablation::kNoCon; }

struct TrainConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double lr = 0.003;
  std::size_t epochs = 500;
  std::size_t batch_size = 256;
  std::size_t h = 32;
  std::size_t d = 16;
  std::size_t m = 32;
  /// 0 means "take the number of classes from the dataset labels".
  std::size_t k = 0;
  double warm_fraction = 0.2;
  std::size_t mc_samples_train = 1;
  std::size_t mc_samples_infer = 8;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::kFull;
  std::size_t pretrain_epochs = 100;
  std::size_t hidden = 64;
  std::size_t kmeans_restarts = 10;
  bool normalize = true;
  /// Fraction of each training batch whose views 1.. are shuffled among themselves before the
  /// causal branch sees them (r' stays with view 0). Causal modes only; 0 disables.
  double intervention_fraction = 0.5;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline void validate(const TrainConfig& c) {
  if (!(c.alpha >= 0.0) || !(c.beta >= 0.0)) throw ArgumentError("config: alpha and beta must be >= 0");
  if (!(c.lr > 0.0)) throw ArgumentError("config: lr must be > 0");
  if (c.batch_size < 2) throw ArgumentError("config: batch_size must be >= 2");
  if (c.h == 0 || c.d == 0 || c.m == 0 || c.hidden == 0) throw ArgumentError("config: dims must be >= 1");
  if (!(c.warm_fraction > 0.0 && c.warm_fraction <= 1.0)) throw ArgumentError("config: warm_fraction must be in (0, 1]");
  if (c.mc_samples_train == 0 || c.mc_samples_infer == 0) throw ArgumentError("config: mc sample counts must be >= 1");
  if (!(c.intervention_fraction >= 0.0 && c.intervention_fraction <= 1.0)) {
    throw ArgumentError("config: intervention_fraction must be in [0, 1]");
  }
}

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& value, std::size_t line) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    throw ParseError("config: bad value '" + value + "' for key '" + key + "'", line, 1);
  }
  return out;
}

}  // namespace detail

inline void set_config_value(TrainConfig& c, const std::string& key, const std::string& value, std::size_t line = 0) {
  using detail::parse_number;
  if (key == "alpha") c.alpha = parse_number<double>(key, value, line);
  else if (key == "beta") c.beta = parse_number<double>(key, value, line);
  else if (key == "lr") c.lr = parse_number<double>(key, value, line);
  else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, value, line);
  else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, value, line);
  else if (key == "h") c.h = parse_number<std::size_t>(key, value, line);
  else if (key == "d") c.d = parse_number<std::size_t>(key, value, line);
  else if (key == "m") c.m = parse_number<std::size_t>(key, value, line);
  else if (key == "k") c.k = parse_number<std::size_t>(key, value, line);
  else if (key == "warm_fraction") c.warm_fraction = parse_number<double>(key, value, line);
  else if (key == "mc_samples_train") c.mc_samples_train = parse_number<std::size_t>(key, value, line);
  else if (key == "mc_samples_infer") c.mc_samples_infer = parse_number<std::size_t>(key, value, line);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value, line);
  else if (key == "ablation") c.ablation = parse_ablation(value);
  else if (key == "pretrain_epochs") c.pretrain_epochs = parse_number<std::size_t>(key, value, line);
  else if (key == "hidden") c.hidden = parse_number<std::size_t>(key, value, line);
  else if (key == "kmeans_restarts") c.kmeans_restarts = parse_number<std::size_t>(key, value, line);
  else if (key == "intervention_fraction") c.intervention_fraction = parse_number<double>(key, value, line);
  else if (key == "normalize") {
    if (value == "1" || value == "true") c.normalize = true;
    else if (value == "0" || value == "false") c.normalize = false;
    else throw ParseError("config: bad boolean '" + value + "' for key 'normalize'", line, 1);
  } else {
    throw ParseError("config: unknown key '" + key + "'", line, 1);
  }
}

/// Flat `key = value` lines; blank lines and lines starting with '#' are ignored.
inline TrainConfig parse_config(std::istream& in) {
  TrainConfig c;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string t = detail::trim(raw);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected 'key = value'", line, 1);
    set_config_value(c, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)), line);
  }
  validate(c);
  return c;
}

inline TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

inline std::string format_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "alpha = " << format_double(c.alpha) << '\n'
     << "beta = " << format_double(c.beta) << '\n'
     << "lr = " << format_double(c.lr) << '\n'
     << "epochs = " << c.epochs << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "h = " << c.h << '\n'
     << "d = " << c.d << '\n'
     << "m = " << c.m << '\n'
     << "k = " << c.k << '\n'
     << "warm_fraction = " << format_double(c.warm_fraction) << '\n'
     << "mc_samples_train = " << c.mc_samples_train << '\n'
     << "mc_samples_infer = " << c.mc_samples_infer << '\n'
     << "seed = " << c.seed << '\n'
     << "ablation = " << ablation_name(c.ablation) << '\n'
     << "pretrain_epochs = " << c.pretrain_epochs << '\n'
     << "hidden = " << c.hidden << '\n'
     << "kmeans_restarts = " << c.kmeans_restarts << '\n'
     << "normalize = " << (c.normalize ? 1 : 0) << '\n'
     << "intervention_fraction = " << format_double(c.intervention_fraction) << '\n';
  return os.str();
}

}  // namespace caumvc
