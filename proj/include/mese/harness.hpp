// Copyright 2026 The MESE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MESE_HARNESS_HPP_
#define MESE_HARNESS_HPP_

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mese/error.hpp"
#include "mese/nn.hpp"
#include "mese/pushbox.hpp"
#include "mese/trainer.hpp"

#ifndef MESE_VERSION
#define MESE_VERSION "0.0.0"
#endif

extern char** environ;

namespace mese::harness {

namespace fs = std::filesystem;

// Bumped whenever a column of an emitted CSV is renamed, removed or reordered.
inline constexpr int kCsvSchemaVersion = 1;

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };
using LogFn = std::function<void(LogLevel, const std::string&)>;

inline void emit(const LogFn& log, LogLevel level, const std::string& msg) {
  if (log) log(level, msg);
}

// Everything needed to launch a set of runs.
struct RunConfig {
  pushbox::EnvConfig env;
  TrainConfig train;
  IntrinsicConfig intrinsic;
  std::vector<Variant> variants{Variant::kNone, Variant::kRnd, Variant::kMese};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out_dir = "runs";
  std::size_t final_window = 1000;  // episodes averaged for the final success rate
  std::size_t curve_bin = 100;      // episodes per point of the learning curves
  bool trajectory = true;           // dump one greedy episode per run

  void validate() const {
    const pushbox::PushBox check(env);
    (void)check;
    train.validate();
    if (!(intrinsic.beta >= 0.0)) throw ConfigError("intrinsic.beta", "must be >= 0");
    if (intrinsic.feature_dim == 0) throw ConfigError("intrinsic.feature_dim", "must be >= 1");
    if (intrinsic.hidden.empty()) throw ConfigError("intrinsic.hidden", "needs at least one layer");
    if (!(intrinsic.predictor_lr > 0.0)) throw ConfigError("intrinsic.predictor_lr", "must be > 0");
    if (!(intrinsic.input_clip > 0.0)) throw ConfigError("intrinsic.input_clip", "must be > 0");
    if (variants.empty()) throw ConfigError("run.variants", "must list at least one variant");
    if (std::set<Variant>(variants.begin(), variants.end()).size() != variants.size()) {
      throw ConfigError("run.variants", "variants must be distinct");
    }
    if (seeds.empty()) throw ConfigError("run.seeds", "must list at least one seed");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
      throw ConfigError("run.seeds", "seeds must be distinct");
    }
    if (out_dir.empty()) throw ConfigError("run.out", "must not be empty");
    if (final_window == 0) throw ConfigError("run.final_window", "must be >= 1");
    if (curve_bin == 0) throw ConfigError("run.curve_bin", "must be >= 1");
  }

  RunSpec spec(Variant variant, std::uint64_t seed) const {
    RunSpec s{env, train, intrinsic, variant};
    s.train.seed = seed;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Value formatting and parsing.

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

namespace detail {

inline double parse_double(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError(field, "expected a finite number, got '" + text + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError(field, "expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

inline int parse_int(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  int v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError(field, "expected an integer, got '" + text + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError(field, "expected true or false, got '" + text + "'");
}

inline std::vector<std::size_t> parse_sizes(const std::string& field, const std::string& text) {
  std::vector<std::size_t> out;
  for (const std::string& part : split(text, ',')) {
    const std::uint64_t v = parse_uint(field, part);
    if (v == 0) throw ConfigError(field, "layer widths must be >= 1");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

inline pushbox::Pos parse_pos(const std::string& field, const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw ConfigError(field, "expected 'x,y', got '" + text + "'");
  return {parse_int(field, parts[0]), parse_int(field, parts[1])};
}

inline std::string format_pos(pushbox::Pos p) {
  return std::to_string(p.x) + "," + std::to_string(p.y);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, const char* sep, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += fmt(items[i]);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& field, const std::string&)>;

// Every accepted key, with its parser. Anything else is rejected by name.
inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    // [env]
    t["env.grid_size"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.env.grid_size = parse_int(f, v);
    };
    t["env.n_agents"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.env.n_agents = parse_int(f, v);
    };
    t["env.max_steps"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.env.max_steps = parse_int(f, v);
    };
    t["env.goal_reward"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.env.goal_reward = parse_double(f, v);
    };
    t["env.random_layout"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.env.random_layout = parse_bool(f, v);
    };
    t["env.agents"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.env.agents.clear();
      for (const std::string& p : split(v, ';')) c.env.agents.push_back(parse_pos(f, p));
    };
    t["env.box"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.env.box = parse_pos(f, v);
    };
    t["env.goal"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.env.goal = parse_pos(f, v);
    };
    t["env.include_goal"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.env.include_goal = parse_bool(f, v);
    };
    // [train]
    t["train.gamma"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.gamma = parse_double(f, v);
    };
    t["train.gae_lambda"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.gae_lambda = parse_double(f, v);
    };
    t["train.clip"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.clip = parse_double(f, v);
    };
    t["train.epochs"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.epochs = parse_uint(f, v);
    };
    t["train.minibatch_size"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.minibatch_size = parse_uint(f, v);
    };
    t["train.actor_lr"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.actor_lr = parse_double(f, v);
    };
    t["train.critic_lr"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.critic_lr = parse_double(f, v);
    };
    t["train.entropy_coef"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.entropy_coef = parse_double(f, v);
    };
    t["train.episodes_per_update"] = [](RunConfig& c, const std::string& f,
                                        const std::string& v) {
      c.train.episodes_per_update = parse_uint(f, v);
    };
    t["train.total_episodes"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.total_episodes = parse_uint(f, v);
    };
    t["train.subspace_interval"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.subspace_interval = parse_uint(f, v);
    };
    t["train.window_cap"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.window_cap = parse_uint(f, v);
    };
    t["train.hidden"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.hidden = parse_sizes(f, v);
    };
    t["train.share_actor"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.share_actor = parse_bool(f, v);
    };
    t["train.knn_k"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.entropy.k = parse_uint(f, v);
    };
    t["train.epsilon_floor"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.train.entropy.epsilon_floor = parse_double(f, v);
    };
    // [intrinsic]
    t["intrinsic.beta"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.intrinsic.beta = parse_double(f, v);
    };
    t["intrinsic.feature_dim"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.intrinsic.feature_dim = parse_uint(f, v);
    };
    t["intrinsic.hidden"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.intrinsic.hidden = parse_sizes(f, v);
    };
    t["intrinsic.predictor_lr"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.intrinsic.predictor_lr = parse_double(f, v);
    };
    t["intrinsic.normalize"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.intrinsic.normalize = parse_bool(f, v);
    };
    t["intrinsic.normalize_inputs"] = [](RunConfig& c, const std::string& f,
                                         const std::string& v) {
      c.intrinsic.normalize_inputs = parse_bool(f, v);
    };
    t["intrinsic.input_clip"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.intrinsic.input_clip = parse_double(f, v);
    };
    // [run]
    t["run.variants"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.variants.clear();
      for (const std::string& name : split(v, ',')) {
        const auto parsed = parse_variant(name);
        if (!parsed) throw ConfigError(f, "unknown variant '" + name + "' (none, rnd, mese)");
        c.variants.push_back(*parsed);
      }
    };
    t["run.seeds"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.seeds.clear();
      for (const std::string& s : split(v, ',')) c.seeds.push_back(parse_uint(f, s));
    };
    t["run.out"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.out_dir = trim(v);
    };
    t["run.final_window"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.final_window = parse_uint(f, v);
    };
    t["run.curve_bin"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.curve_bin = parse_uint(f, v);
    };
    t["run.trajectory"] = [](RunConfig& c, const std::string& f, const std::string& v) {
      c.trajectory = parse_bool(f, v);
    };
    return t;
  }();
  return table;
}

}  // namespace detail

// Parses key = value text grouped in [env], [train], [intrinsic] and [run]
// sections. Missing keys keep their defaults; unknown keys are errors.
// Sections listed in `ignored_sections` are skipped (used for manifests).
inline RunConfig parse_config(std::istream& in, const std::string& source = "<config>",
                              const std::set<std::string>& ignored_sections = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig cfg;
  const auto& table = detail::setters();
  for (const auto& [section, body] : tree) {
    if (ignored_sections.count(section) > 0) continue;
    if (body.empty()) {
      throw ConfigError(section, "key outside of a section (expected [env], [train], "
                                 "[intrinsic] or [run])");
    }
    for (const auto& [key, value] : body) {
      const std::string field = section + "." + key;
      const auto it = table.find(field);
      if (it == table.end()) throw ConfigError(field, "unknown configuration key");
      it->second(cfg, field, value.get_value<std::string>());
    }
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  return parse_config(in, path.string());
}

// Canonical text form; parse_config(to_ini(c)) reproduces c exactly.
inline std::string to_ini(const RunConfig& c) {
  using detail::join;
  auto size_str = [](std::size_t v) { return std::to_string(v); };
  std::ostringstream out;
  out << "[env]\n"
      << "grid_size = " << c.env.grid_size << "\n"
      << "n_agents = " << c.env.n_agents << "\n"
      << "max_steps = " << c.env.max_steps << "\n"
      << "goal_reward = " << format_double(c.env.goal_reward) << "\n"
      << "random_layout = " << (c.env.random_layout ? "true" : "false") << "\n"
      << "agents = " << join(c.env.agents, ";", detail::format_pos) << "\n"
      << "box = " << detail::format_pos(c.env.box) << "\n"
      << "goal = " << detail::format_pos(c.env.goal) << "\n"
      << "include_goal = " << (c.env.include_goal ? "true" : "false") << "\n"
      << "\n[train]\n"
      << "gamma = " << format_double(c.train.gamma) << "\n"
      << "gae_lambda = " << format_double(c.train.gae_lambda) << "\n"
      << "clip = " << format_double(c.train.clip) << "\n"
      << "epochs = " << c.train.epochs << "\n"
      << "minibatch_size = " << c.train.minibatch_size << "\n"
      << "actor_lr = " << format_double(c.train.actor_lr) << "\n"
      << "critic_lr = " << format_double(c.train.critic_lr) << "\n"
      << "entropy_coef = " << format_double(c.train.entropy_coef) << "\n"
      << "episodes_per_update = " << c.train.episodes_per_update << "\n"
      << "total_episodes = " << c.train.total_episodes << "\n"
      << "subspace_interval = " << c.train.subspace_interval << "\n"
      << "window_cap = " << c.train.window_cap << "\n"
      << "hidden = " << join(c.train.hidden, ",", size_str) << "\n"
      << "share_actor = " << (c.train.share_actor ? "true" : "false") << "\n"
      << "knn_k = " << c.train.entropy.k << "\n"
      << "epsilon_floor = " << format_double(c.train.entropy.epsilon_floor) << "\n"
      << "\n[intrinsic]\n"
      << "beta = " << format_double(c.intrinsic.beta) << "\n"
      << "feature_dim = " << c.intrinsic.feature_dim << "\n"
      << "hidden = " << join(c.intrinsic.hidden, ",", size_str) << "\n"
      << "predictor_lr = " << format_double(c.intrinsic.predictor_lr) << "\n"
      << "normalize = " << (c.intrinsic.normalize ? "true" : "false") << "\n"
      << "normalize_inputs = " << (c.intrinsic.normalize_inputs ? "true" : "false") << "\n"
      << "input_clip = " << format_double(c.intrinsic.input_clip) << "\n"
      << "\n[run]\n"
      << "variants = " << join(c.variants, ",", [](Variant v) { return std::string(variant_name(v)); })
      << "\n"
      << "seeds = " << join(c.seeds, ",", [](std::uint64_t s) { return std::to_string(s); }) << "\n"
      << "out = " << c.out_dir << "\n"
      << "final_window = " << c.final_window << "\n"
      << "curve_bin = " << c.curve_bin << "\n"
      << "trajectory = " << (c.trajectory ? "true" : "false") << "\n";
  return out.str();
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return to_ini(a) == to_ini(b); }

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// The configuration of a single run: the shared config narrowed to one
// variant and seed, with the output root left out so that moving an
// artifact tree does not change its hash.
inline RunConfig single_run_config(const RunConfig& c, Variant variant, std::uint64_t seed) {
  RunConfig one = c;
  one.variants = {variant};
  one.seeds = {seed};
  one.out_dir = ".";
  return one;
}

inline std::string config_hash(const RunConfig& c, Variant variant, std::uint64_t seed) {
  return hex64(fnv1a(to_ini(single_run_config(c, variant, seed))));
}

// ---------------------------------------------------------------------------
// Run directories.

inline constexpr const char* kManifestFile = "manifest.ini";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kMaskLogFile = "mask_log.csv";
inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kTimingFile = "timing.csv";
inline constexpr const char* kTrajectoryFile = "trajectory.csv";
inline constexpr const char* kCompleteMarker = "COMPLETE";
inline constexpr const char* kFailedMarker = "FAILED";

inline fs::path run_dir(const fs::path& root, Variant variant, std::uint64_t seed) {
  return root / variant_name(variant) / ("seed_" + std::to_string(seed));
}

struct Manifest {
  RunConfig config;  // narrowed to the run's variant and seed
  Variant variant = Variant::kNone;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string version;
  int csv_schema = 0;
};

inline std::string manifest_text(const RunConfig& c, Variant variant, std::uint64_t seed) {
  std::ostringstream out;
  out << "[manifest]\n"
      << "version = " << MESE_VERSION << "\n"
      << "csv_schema = " << kCsvSchemaVersion << "\n"
      << "variant = " << variant_name(variant) << "\n"
      << "seed = " << seed << "\n"
      << "config_hash = " << config_hash(c, variant, seed) << "\n\n"
      << to_ini(single_run_config(c, variant, seed));
  return out.str();
}

inline Manifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestFile;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing manifest in " + dir.string());
  std::stringstream text;
  text << in.rdbuf();
  Manifest m;
  m.config = parse_config(text, path.string(), {"manifest"});
  text.clear();
  text.seekg(0);
  boost::property_tree::ptree tree;
  boost::property_tree::read_ini(text, tree);
  const auto& meta = tree.get_child("manifest");
  const auto variant = parse_variant(meta.get<std::string>("variant"));
  if (!variant) throw std::runtime_error("bad variant in " + path.string());
  m.variant = *variant;
  m.seed = detail::parse_uint("manifest.seed", meta.get<std::string>("seed"));
  m.config_hash = meta.get<std::string>("config_hash");
  m.version = meta.get<std::string>("version");
  m.csv_schema = detail::parse_int("manifest.csv_schema", meta.get<std::string>("csv_schema"));
  return m;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

inline std::string metrics_header() {
  return "episode,extrinsic_return,reshaped_return,success,steps,mean_intrinsic,"
         "max_intrinsic,mask_size,mask,predictor_loss,actor_loss,critic_loss\n";
}

inline std::string metrics_row(const EpisodeMetrics& m) {
  std::string row;
  row += std::to_string(m.episode) + ',';
  row += format_double(m.extrinsic_return) + ',';
  row += format_double(m.reshaped_return) + ',';
  row += (m.success ? "1," : "0,");
  row += std::to_string(m.steps) + ',';
  row += format_double(m.mean_intrinsic) + ',';
  row += format_double(m.max_intrinsic) + ',';
  row += std::to_string(m.mask.size()) + ',';
  row += m.mask.to_string() + ',';
  row += format_double(m.predictor_loss) + ',';
  row += format_double(m.actor_loss) + ',';
  row += format_double(m.critic_loss) + '\n';
  return row;
}

// Plays one greedy episode from the configured layout and writes it as CSV.
inline void write_greedy_trajectory(const PolicySet& policies, const pushbox::PushBox& env,
                                    std::uint64_t seed, std::ostream& out) {
  const int n = env.config().n_agents;
  pushbox::TrajectoryWriter writer(out, n);
  pushbox::GridState s = env.reset(seed);
  std::vector<pushbox::Direction> actions(static_cast<std::size_t>(n));
  while (!s.done) {
    for (int i = 0; i < n; ++i) {
      const std::vector<double> obs = env.observe(s, i);
      const Eigen::VectorXd logits = nn::forward(policies.actor_for(static_cast<std::size_t>(i)), obs);
      Eigen::Index best = 0;
      for (Eigen::Index a = 1; a < logits.size(); ++a) {
        if (logits(a) > logits(best)) best = a;
      }
      actions[static_cast<std::size_t>(i)] = static_cast<pushbox::Direction>(best);
    }
    const pushbox::StepResult r = env.step(s, actions);
    writer.write(s, actions, r.reward);
    s = r.state;
  }
}

// Trains one (variant, seed) and fills its run directory. On failure the
// partial artifacts stay in place next to a FAILED marker holding the error,
// and the exception is rethrown.
inline fs::path run_one(const RunConfig& cfg, Variant variant, std::uint64_t seed,
                        const fs::path& root, const LogFn& log = {}) {
  cfg.validate();
  const fs::path dir = run_dir(root, variant, seed);
  fs::create_directories(dir);
  fs::remove(dir / kCompleteMarker);
  fs::remove(dir / kFailedMarker);
  write_text(dir / kManifestFile, manifest_text(cfg, variant, seed));

  const RunSpec spec = cfg.spec(variant, seed);
  std::ofstream metrics(dir / kMetricsFile, std::ios::binary | std::ios::trunc);
  std::ofstream masks(dir / kMaskLogFile, std::ios::binary | std::ios::trunc);
  std::ofstream timing(dir / kTimingFile, std::ios::binary | std::ios::trunc);
  metrics << metrics_header();
  masks << "episode,previous,candidate,surrogate,discrete,chosen\n";
  timing << "episode,wall_seconds\n";

  const auto start = std::chrono::steady_clock::now();
  std::size_t successes = 0;
  TrainHooks hooks;
  hooks.on_episode = [&](const EpisodeMetrics& m) {
    metrics << metrics_row(m);
    successes += m.success ? 1 : 0;
    if (m.episode % cfg.curve_bin == 0 || m.episode == spec.train.total_episodes) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      timing << m.episode << ',' << format_double(secs) << '\n';
      emit(log, LogLevel::kDebug,
           std::string(variant_name(variant)) + " seed " + std::to_string(seed) + " episode " +
               std::to_string(m.episode) + " successes " + std::to_string(successes) +
               " mask " + m.mask.to_string());
    }
  };
  hooks.on_mask = [&](const MaskEvent& e) {
    for (std::size_t c = 0; c < e.candidates.size(); ++c) {
      masks << e.episode << ',' << e.previous.to_string() << ',' << e.candidates[c].to_string()
            << ',' << format_double(e.diversities[c].surrogate) << ','
            << format_double(e.diversities[c].discrete) << ','
            << (e.candidates[c] == e.chosen ? 1 : 0) << '\n';
    }
  };

  try {
    TrainResult result = train(spec, hooks);
    std::vector<nn::NamedNetwork> nets;
    for (std::size_t i = 0; i < result.policies.actors.size(); ++i) {
      nets.emplace_back("actor_" + std::to_string(i), result.policies.actors[i]);
    }
    nets.emplace_back("critic", result.policies.critic);
    if (result.rnd) {
      nets.emplace_back("rnd_target", result.rnd->target);
      nets.emplace_back("rnd_predictor", result.rnd->predictor);
    }
    {
      std::ofstream ckpt(dir / kCheckpointFile, std::ios::binary | std::ios::trunc);
      nn::save_checkpoint(ckpt, nets);
      if (!ckpt) throw std::runtime_error("cannot write checkpoint");
    }
    if (cfg.trajectory) {
      std::ofstream traj(dir / kTrajectoryFile, std::ios::binary | std::ios::trunc);
      write_greedy_trajectory(result.policies, pushbox::PushBox(spec.env), seed, traj);
    }
    metrics.close();
    masks.close();
    timing.close();
    if (!metrics || !masks || !timing) throw std::runtime_error("cannot write run logs");
  } catch (const std::exception& e) {
    metrics.close();
    masks.close();
    timing.close();
    write_text(dir / kFailedMarker, std::string(e.what()) + "\n");
    emit(log, LogLevel::kError, dir.string() + ": " + e.what());
    throw;
  }
  write_text(dir / kCompleteMarker, "");
  emit(log, LogLevel::kInfo,
       std::string("finished ") + variant_name(variant) + " seed " + std::to_string(seed) +
           ": " + std::to_string(successes) + " successes");
  return dir;
}

// ---------------------------------------------------------------------------
// Multi-run orchestration.

struct Job {
  Variant variant;
  std::uint64_t seed;
};

inline std::vector<Job> enumerate_jobs(const RunConfig& cfg) {
  std::vector<Job> jobs;
  for (Variant v : cfg.variants) {
    for (std::uint64_t s : cfg.seeds) jobs.push_back({v, s});
  }
  return jobs;
}

// Launches `exe train ...` for every (variant, seed), at most `max_jobs` at a
// time. Returns the number of runs that failed.
inline std::size_t run_sweep(const RunConfig& cfg, const fs::path& config_path,
                             const fs::path& exe, std::size_t max_jobs, const LogFn& log = {}) {
  if (max_jobs == 0) throw ConfigError("jobs", "must be >= 1");
  std::size_t failures = 0;
  std::map<pid_t, Job> running;
  auto reap_one = [&] {
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    if (pid <= 0) throw std::runtime_error("waitpid failed");
    const auto it = running.find(pid);
    if (it == running.end()) return;
    const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
    if (!ok) ++failures;
    emit(log, ok ? LogLevel::kInfo : LogLevel::kError,
         std::string(variant_name(it->second.variant)) + " seed " +
             std::to_string(it->second.seed) + (ok ? " done" : " failed"));
    running.erase(it);
  };
  for (const Job& job : enumerate_jobs(cfg)) {
    while (running.size() >= max_jobs) reap_one();
    std::vector<std::string> args{exe.string(), "train",
                                  "--config",   config_path.string(),
                                  "--variant",  variant_name(job.variant),
                                  "--seed",     std::to_string(job.seed),
                                  "--out",      cfg.out_dir};
    std::vector<char*> argv;
    for (std::string& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (::posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
      throw std::runtime_error("cannot launch " + exe.string());
    }
    emit(log, LogLevel::kInfo,
         std::string("started ") + variant_name(job.variant) + " seed " +
             std::to_string(job.seed));
    running.emplace(pid, job);
  }
  while (!running.empty()) reap_one();
  return failures;
}

// ---------------------------------------------------------------------------
// Aggregation.

// Linear-interpolation quantile (Hyndman-Fan type 7).
inline double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ArgumentError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Spread {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double iqr() const { return q75 - q25; }
};

inline Spread spread(const std::vector<double>& values) {
  return {quantile(values, 0.5), quantile(values, 0.25), quantile(values, 0.75)};
}

struct RunRecord {
  Variant variant = Variant::kNone;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  double final_success = 0.0;  // mean success over the last final_window episodes
  double first_success = 0.0;  // first successful episode; episodes + 1 if none
  bool censored = false;       // no success at all
  double auc = 0.0;            // mean success over all episodes
  std::vector<bool> success;
  std::vector<double> extrinsic_return;
};

struct VariantSummary {
  Variant variant = Variant::kNone;
  std::size_t n_seeds = 0;
  std::size_t n_censored = 0;
  Spread final_success;
  Spread first_success;
  Spread auc;
};

struct RunSummary {
  std::vector<RunRecord> runs;
  std::vector<VariantSummary> variants;

  const VariantSummary* find(Variant v) const {
    for (const VariantSummary& s : variants) {
      if (s.variant == v) return &s;
    }
    return nullptr;
  }
};

inline RunRecord read_run(const fs::path& dir) {
  const Manifest manifest = read_manifest(dir);
  RunRecord r;
  r.variant = manifest.variant;
  r.seed = manifest.seed;
  std::ifstream in(dir / kMetricsFile);
  if (!in) throw std::runtime_error("missing metrics in " + dir.string());
  std::string line;
  std::getline(in, line);
  const auto header = split(line, ',');
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("metrics column " + name + " missing");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_success = col("success");
  const std::size_t c_return = col("extrinsic_return");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) throw std::runtime_error("ragged row in metrics");
    r.success.push_back(fields[c_success] == "1");
    r.extrinsic_return.push_back(detail::parse_double("extrinsic_return", fields[c_return]));
  }
  r.episodes = r.success.size();
  if (r.episodes == 0) throw std::runtime_error("empty metrics in " + dir.string());
  const std::size_t window = std::min(manifest.config.final_window, r.episodes);
  double tail = 0.0;
  for (std::size_t i = r.episodes - window; i < r.episodes; ++i) tail += r.success[i] ? 1.0 : 0.0;
  r.final_success = tail / static_cast<double>(window);
  r.first_success = static_cast<double>(r.episodes + 1);
  r.censored = true;
  double total = 0.0;
  for (std::size_t i = 0; i < r.episodes; ++i) {
    if (r.success[i]) {
      total += 1.0;
      if (r.censored) {
        r.first_success = static_cast<double>(i + 1);
        r.censored = false;
      }
    }
  }
  r.auc = total / static_cast<double>(r.episodes);
  return r;
}

// Completed run directories under root, in (variant, seed) order.
inline std::vector<fs::path> completed_runs(const fs::path& root) {
  std::vector<std::pair<std::pair<int, std::uint64_t>, fs::path>> found;
  if (!fs::is_directory(root)) return {};
  for (const auto& vdir : fs::directory_iterator(root)) {
    if (!vdir.is_directory()) continue;
    const auto variant = parse_variant(vdir.path().filename().string());
    if (!variant) continue;
    for (const auto& sdir : fs::directory_iterator(vdir.path())) {
      if (!sdir.is_directory() || !fs::exists(sdir.path() / kCompleteMarker)) continue;
      const std::string name = sdir.path().filename().string();
      if (name.rfind("seed_", 0) != 0) continue;
      std::uint64_t seed = 0;
      try {
        seed = detail::parse_uint("seed", name.substr(5));
      } catch (const ConfigError&) {
        continue;
      }
      found.push_back({{static_cast<int>(*variant), seed}, sdir.path()});
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

inline RunSummary aggregate(std::vector<RunRecord> runs) {
  RunSummary summary;
  std::sort(runs.begin(), runs.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::pair(static_cast<int>(a.variant), a.seed) <
           std::pair(static_cast<int>(b.variant), b.seed);
  });
  summary.runs = std::move(runs);
  for (Variant v : {Variant::kNone, Variant::kRnd, Variant::kMese}) {
    std::vector<double> fin, first, auc;
    std::size_t censored = 0;
    for (const RunRecord& r : summary.runs) {
      if (r.variant != v) continue;
      fin.push_back(r.final_success);
      first.push_back(r.first_success);
      auc.push_back(r.auc);
      censored += r.censored ? 1 : 0;
    }
    if (fin.empty()) continue;
    summary.variants.push_back(
        {v, fin.size(), censored, spread(fin), spread(first), spread(auc)});
  }
  return summary;
}

// Per-variant learning curves on a common grid: point g covers episodes
// (g - bin, g], up to the shortest run of the variant.
inline std::string curves_csv(const RunSummary& summary, std::size_t bin) {
  std::ostringstream out;
  out << "variant,episode,n_seeds,success_median,success_q25,success_q75,"
         "return_median,return_q25,return_q75\n";
  for (const VariantSummary& vs : summary.variants) {
    std::vector<const RunRecord*> runs;
    std::size_t shortest = std::numeric_limits<std::size_t>::max();
    for (const RunRecord& r : summary.runs) {
      if (r.variant != vs.variant) continue;
      runs.push_back(&r);
      shortest = std::min(shortest, r.episodes);
    }
    for (std::size_t g = bin; g <= shortest; g += bin) {
      std::vector<double> rate, ret;
      for (const RunRecord* r : runs) {
        double s = 0.0, x = 0.0;
        for (std::size_t i = g - bin; i < g; ++i) {
          s += r->success[i] ? 1.0 : 0.0;
          x += r->extrinsic_return[i];
        }
        rate.push_back(s / static_cast<double>(bin));
        ret.push_back(x / static_cast<double>(bin));
      }
      const Spread a = spread(rate), b = spread(ret);
      out << variant_name(vs.variant) << ',' << g << ',' << runs.size() << ','
          << format_double(a.median) << ',' << format_double(a.q25) << ','
          << format_double(a.q75) << ',' << format_double(b.median) << ','
          << format_double(b.q25) << ',' << format_double(b.q75) << '\n';
    }
  }
  return out.str();
}

inline std::string summary_csv(const RunSummary& summary) {
  std::ostringstream out;
  out << "variant,metric,n_seeds,n_never_succeeded,median,q25,q75,iqr\n";
  for (const VariantSummary& vs : summary.variants) {
    const std::pair<const char*, const Spread*> rows[] = {
        {"final_success", &vs.final_success},
        {"first_success", &vs.first_success},
        {"auc", &vs.auc}};
    for (const auto& [name, s] : rows) {
      out << variant_name(vs.variant) << ',' << name << ',' << vs.n_seeds << ','
          << vs.n_censored << ',' << format_double(s->median) << ','
          << format_double(s->q25) << ',' << format_double(s->q75) << ','
          << format_double(s->iqr()) << '\n';
    }
  }
  return out.str();
}

inline std::string runs_csv(const RunSummary& summary) {
  std::ostringstream out;
  out << "variant,seed,episodes,final_success,first_success,never_succeeded,auc\n";
  for (const RunRecord& r : summary.runs) {
    out << variant_name(r.variant) << ',' << r.seed << ',' << r.episodes << ','
        << format_double(r.final_success) << ',' << format_double(r.first_success) << ','
        << (r.censored ? 1 : 0) << ',' << format_double(r.auc) << '\n';
  }
  return out.str();
}

// Reads every completed run under `root` and writes summary.csv, runs.csv
// and curves.csv next to them. Output depends only on the run directories.
inline RunSummary summarize(const fs::path& root, const LogFn& log = {}) {
  const std::vector<fs::path> dirs = completed_runs(root);
  if (dirs.empty()) throw std::runtime_error("no completed runs under " + root.string());
  std::vector<RunRecord> runs;
  std::size_t bin = 0;
  for (const fs::path& d : dirs) {
    runs.push_back(read_run(d));
    if (bin == 0) bin = read_manifest(d).config.curve_bin;
  }
  RunSummary summary = aggregate(std::move(runs));
  write_text(root / "summary.csv", summary_csv(summary));
  write_text(root / "runs.csv", runs_csv(summary));
  write_text(root / "curves.csv", curves_csv(summary, bin));
  emit(log, LogLevel::kInfo,
       "summarized " + std::to_string(summary.runs.size()) + " runs under " + root.string());
  return summary;
}

}  // namespace mese::harness

#endif  // MESE_HARNESS_HPP_
