#include "neurmap/train/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace neurmap::train {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw std::invalid_argument("config: bad value '" + v + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean '" + v + "' for " + key);
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const TrainConfig&)>;
struct Field {
  const char* key;
  Setter set;
  Getter get;
};

template <typename M>
Field field(const char* key, M TrainConfig::*member) {
  Field f{key, {}, {}};
  f.set = [member](TrainConfig& c, const std::string& k, const std::string& v) {
    if constexpr (std::is_same_v<M, std::string>) c.*member = v;
    else if constexpr (std::is_same_v<M, bool>) c.*member = parse_bool(k, v);
    else c.*member = parse_number<M>(k, v);
  };
  f.get = [member](const TrainConfig& c) {
    if constexpr (std::is_same_v<M, std::string>) return c.*member;
    else if constexpr (std::is_same_v<M, bool>) return std::string(c.*member ? "true" : "false");
    else if constexpr (std::is_floating_point_v<M>) return fmt_double(c.*member);
    else return std::to_string(c.*member);
  };
  return f;
}

template <typename M, typename S>
Field nested(const char* key, S TrainConfig::*outer, M S::*member) {
  Field f{key, {}, {}};
  f.set = [outer, member](TrainConfig& c, const std::string& k, const std::string& v) {
    c.*outer.*member = parse_number<M>(k, v);
  };
  f.get = [outer, member](const TrainConfig& c) {
    if constexpr (std::is_floating_point_v<M>) return fmt_double(c.*outer.*member);
    else return std::to_string(c.*outer.*member);
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      field("paired_dir", &TrainConfig::paired_dir),
      field("blurry_dir", &TrainConfig::blurry_dir),
      field("sharp_dir", &TrainConfig::sharp_dir),
      field("output_dir", &TrainConfig::output_dir),
      field("paired_batch", &TrainConfig::paired_batch),
      field("unpaired_batch", &TrainConfig::unpaired_batch),
      field("crop", &TrainConfig::crop),
      field("flip", &TrainConfig::flip),
      field("total_steps", &TrainConfig::total_steps),
      field("lr_d", &TrainConfig::lr_d),
      field("lr_m", &TrainConfig::lr_m),
      field("lr_n", &TrainConfig::lr_n),
      nested("lambda", &TrainConfig::weights, &loss::LossWeights::lambda),
      nested("beta", &TrainConfig::weights, &loss::LossWeights::beta),
      nested("alpha", &TrainConfig::weights, &loss::LossWeights::alpha),
      nested("motion_bound", &TrainConfig::arch, &nets::ArchConfig::alpha),
      field("n_steps", &TrainConfig::n_steps),
      nested("levels", &TrainConfig::arch, &nets::ArchConfig::levels),
      nested("base_channels", &TrainConfig::arch, &nets::ArchConfig::base_channels),
      nested("patch_levels", &TrainConfig::arch, &nets::ArchConfig::patch_levels),
      field("seed", &TrainConfig::seed),
      field("checkpoint_every", &TrainConfig::checkpoint_every),
      field("log_every", &TrainConfig::log_every),
      field("sample_every", &TrainConfig::sample_every),
      field("disable_reblur_d", &TrainConfig::disable_reblur_d),
      field("disable_reblur_m", &TrainConfig::disable_reblur_m),
      field("disable_tv", &TrainConfig::disable_tv),
      field("disable_natural", &TrainConfig::disable_natural),
      field("disable_sharp", &TrainConfig::disable_sharp),
      field("unsupervised", &TrainConfig::unsupervised),
  };
  return f;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr_d > 0) || !(lr_m > 0) || !(lr_n > 0)) throw std::invalid_argument("config: learning rates must be > 0");
  if (total_steps < 0) throw std::invalid_argument("config: total_steps must be >= 0");
  if (paired_batch < 1 || unpaired_batch < 1) throw std::invalid_argument("config: batch sizes must be >= 1");
  if (crop < 0) throw std::invalid_argument("config: crop must be >= 0");
  if (crop % (1 << arch.levels))
    throw std::invalid_argument(fmt::format("config: crop {} is not divisible by 2^levels = {}", crop, 1 << arch.levels));
  if (n_steps < 2) throw std::invalid_argument("config: n_steps must be >= 2");
  if (checkpoint_every < 0 || log_every < 0 || sample_every < 0)
    throw std::invalid_argument("config: intervals must be >= 0");
  weights.validate();
  arch.validate();
  if (arch.alpha < weights.alpha)
    throw std::invalid_argument(fmt::format("config: motion_bound {} is below the magnitude target alpha {}", arch.alpha,
                                            weights.alpha));
}

loss::ObjectiveOptions TrainConfig::objective_options() const {
  loss::ObjectiveOptions o;
  o.weights = weights;
  o.n_steps = n_steps;
  o.switches.reblur_for_d = !disable_reblur_d;
  o.switches.reblur_for_m = !disable_reblur_m;
  o.switches.tv = !disable_tv;
  o.switches.natural = !disable_natural;
  o.switches.sharp = !disable_sharp;
  return o;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, key, value);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

TrainConfig TrainConfig::parse(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(fmt::format("config line {}: expected 'key = value'", lineno));
    try {
      base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  return base;
}

TrainConfig TrainConfig::parse(const std::string& text) { return parse(text, TrainConfig{}); }

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

double lr_at(long step, double lr0, long total_steps) {
  if (total_steps < 1 || step < 0 || step > total_steps)
    throw std::out_of_range(fmt::format("lr_at: step {} outside [0, {}]", step, total_steps));
  return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

}  // namespace neurmap::train
