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


// Command-line front end: train, sweep, summarize, selftest.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.
// Log verbosity comes from MESE_LOG_LEVEL (debug, info, warn, error).

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "checks.hpp"
#include "mese/mese.hpp"

namespace {

namespace fs = std::filesystem;
namespace h = mese::harness;

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kConfigError = 2;

std::optional<spdlog::level::level_enum> level_from_env() {
  const char* raw = std::getenv("MESE_LOG_LEVEL");
  if (raw == nullptr || *raw == '\0') return spdlog::level::info;
  static const std::map<std::string, spdlog::level::level_enum> levels{
      {"debug", spdlog::level::debug},
      {"info", spdlog::level::info},
      {"warn", spdlog::level::warn},
      {"error", spdlog::level::err}};
  const auto it = levels.find(raw);
  if (it == levels.end()) return std::nullopt;
  return it->second;
}

void log_to_spdlog(h::LogLevel level, const std::string& msg) {
  switch (level) {
    case h::LogLevel::kDebug:
      spdlog::debug(msg);
      break;
    case h::LogLevel::kInfo:
      spdlog::info(msg);
      break;
    case h::LogLevel::kWarn:
      spdlog::warn(msg);
      break;
    case h::LogLevel::kError:
      spdlog::error(msg);
      break;
  }
}

fs::path self_exe(const char* argv0) {
  std::error_code ec;
  const fs::path p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::absolute(argv0) : p;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& s : h::split(text, ',')) seeds.push_back(h::detail::parse_uint("seeds", s));
  return seeds;
}

int cmd_train(const std::string& config, const std::string& variant_text, std::uint64_t seed,
              const std::string& out) {
  h::RunConfig cfg = h::load_config(config);
  const auto variant = mese::parse_variant(variant_text);
  if (!variant) throw mese::ConfigError("variant", "must be one of none, rnd, mese");
  if (!out.empty()) cfg.out_dir = out;
  const fs::path dir = h::run_one(cfg, *variant, seed, cfg.out_dir, log_to_spdlog);
  std::cout << dir.string() << "\n";
  return kOk;
}

int cmd_summarize(const fs::path& root) {
  const h::RunSummary s = h::summarize(root, log_to_spdlog);
  std::cout << "variant  seeds  never  first_success(median [q25,q75])  final_success(median "
               "[q25,q75])\n";
  for (const h::VariantSummary& v : s.variants) {
    std::cout << mese::variant_name(v.variant) << "  " << v.n_seeds << "  " << v.n_censored << "  "
              << h::format_double(v.first_success.median) << " ["
              << h::format_double(v.first_success.q25) << ","
              << h::format_double(v.first_success.q75) << "]  "
              << h::format_double(v.final_success.median) << " ["
              << h::format_double(v.final_success.q25) << ","
              << h::format_double(v.final_success.q75) << "]\n";
  }
  std::cout << "wrote " << (root / "summary.csv").string() << ", runs.csv, curves.csv\n";
  return kOk;
}

int cmd_sweep(const std::string& config, const std::string& seeds, std::size_t jobs,
              const std::string& out, const char* argv0) {
  h::RunConfig cfg = h::load_config(config);
  if (!seeds.empty()) cfg.seeds = parse_seed_list(seeds);
  if (!out.empty()) cfg.out_dir = out;
  cfg.validate();
  const std::size_t failures =
      h::run_sweep(cfg, fs::absolute(config), self_exe(argv0), jobs, log_to_spdlog);
  if (failures > 0) spdlog::error("{} of {} runs failed", failures, h::enumerate_jobs(cfg).size());
  if (!h::completed_runs(cfg.out_dir).empty()) cmd_summarize(cfg.out_dir);
  return failures == 0 ? kOk : kRuntimeFailure;
}

int cmd_selftest() {
  using mese::checks::Check;
  const fs::path scratch =
      fs::temp_directory_path() / ("mese_selftest_" + std::to_string(::getpid()));
  const std::vector<std::pair<std::string, std::function<Check()>>> suites{
      {"entropy accuracy", [] { return mese::checks::entropy_accuracy(); }},
      {"estimator laws", [] { return mese::checks::estimator_laws(); }},
      {"k-NN oracle", [] { return mese::checks::knn_oracle(); }},
      {"subspace oracle", [] { return mese::checks::subspace_oracle(); }},
      {"push-rule oracle", [] { return mese::checks::push_rule_oracle(); }},
      {"gradient checks", [] { return mese::checks::gradient_checks(); }},
      {"RND distillation", [] { return mese::checks::rnd_distillation(); }},
      {"determinism", [&] { return mese::checks::determinism(scratch, 50); }},
  };
  int failed = 0;
  for (const auto& [name, run] : suites) {
    Check c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.detail = std::string("exception: ") + e.what();
    }
    std::cout << (c.pass ? "PASS " : "FAIL ") << name << ": " << c.detail << "\n";
    failed += c.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "selftest passed" : "selftest failed") << "\n";
  return failed == 0 ? kOk : kRuntimeFailure;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("mese"));
  const auto level = level_from_env();
  if (!level) {
    std::cerr << "config error: MESE_LOG_LEVEL: must be one of debug, info, warn, error\n";
    return kConfigError;
  }
  spdlog::set_level(*level);

  CLI::App app{"Sub-state entropy guided exploration on PushBox", "mese"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MESE_VERSION);

  std::string config, variant, out, seeds, in;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  CLI::App* train = app.add_subcommand("train", "Train one variant with one seed");
  train->add_option("--config", config, "INI configuration file")->required();
  train->add_option("--variant", variant, "none, rnd or mese")
      ->required()
      ->check(CLI::IsMember({"none", "rnd", "mese"}));
  train->add_option("--seed", seed, "Run seed")->required();
  train->add_option("--out", out, "Output root (defaults to run.out)");

  CLI::App* sweep = app.add_subcommand("sweep", "Train every variant x seed, then summarize");
  sweep->add_option("--config", config, "INI configuration file")->required();
  sweep->add_option("--seeds", seeds, "Comma-separated seeds (defaults to run.seeds)");
  sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out, "Output root (defaults to run.out)");

  CLI::App* summarize = app.add_subcommand("summarize", "Aggregate completed runs");
  summarize->add_option("--in", in, "Output root of a sweep")->required();

  app.add_subcommand("selftest", "Run the invariant and oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*train) return cmd_train(config, variant, seed, out);
    if (*sweep) return cmd_sweep(config, seeds, jobs, out, argv[0]);
    if (*summarize) return cmd_summarize(in);
    return cmd_selftest();
  } catch (const mese::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeFailure;
  }
}
