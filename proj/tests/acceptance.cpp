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


// Acceptance report: one PASS/FAIL line per criterion. The headline
// comparison trains 3 variants x 5 seeds and caches the run directories so
// that a later invocation only re-summarizes; set MESE_ACCEPTANCE_FRESH=1 to
// discard the cache.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "checks.hpp"

namespace {

namespace fs = std::filesystem;
using mese::Variant;
using mese::checks::Check;
using mese::checks::fmt;

std::string arg_value(int argc, char** argv, const std::string& name, const std::string& fallback) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (argv[i] == name) return argv[i + 1];
  }
  return fallback;
}

bool has_flag(int argc, char** argv, const std::string& name) {
  for (int i = 1; i < argc; ++i) {
    if (argv[i] == name) return true;
  }
  return false;
}

double last_wall_seconds(const fs::path& dir) {
  std::ifstream in(dir / mese::harness::kTimingFile);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  const auto comma = last.find(',');
  return comma == std::string::npos ? 0.0 : std::stod(last.substr(comma + 1));
}

// Reuses a completed run directory only if its manifest matches the config.
bool cached(const mese::harness::RunConfig& cfg, Variant v, std::uint64_t seed,
            const fs::path& root) {
  const fs::path dir = mese::harness::run_dir(root, v, seed);
  if (!fs::exists(dir / mese::harness::kCompleteMarker)) return false;
  try {
    const auto m = mese::harness::read_manifest(dir);
    return m.config_hash == mese::harness::config_hash(cfg, v, seed) && m.version == MESE_VERSION;
  } catch (const std::exception&) {
    return false;
  }
}

Check headline(const mese::harness::RunConfig& cfg, const fs::path& root) {
  mese::checks::Stopwatch clock;
  const char* fresh = std::getenv("MESE_ACCEPTANCE_FRESH");
  if (fresh != nullptr && std::string(fresh) == "1") fs::remove_all(root);
  for (const auto& job : mese::harness::enumerate_jobs(cfg)) {
    if (cached(cfg, job.variant, job.seed, root)) continue;
    std::cout << "  training " << mese::variant_name(job.variant) << " seed " << job.seed
              << " ..." << std::endl;
    mese::harness::run_one(cfg, job.variant, job.seed, root);
  }
  const auto summary = mese::harness::summarize(root);
  const auto* none = summary.find(Variant::kNone);
  const auto* rnd = summary.find(Variant::kRnd);
  const auto* mese_v = summary.find(Variant::kMese);
  Check c;
  c.seconds = clock.seconds();
  if (none == nullptr || rnd == nullptr || mese_v == nullptr) {
    c.detail = "missing variant in summary";
    return c;
  }
  double worst_variant_hours = 0.0;
  for (Variant v : {Variant::kNone, Variant::kRnd, Variant::kMese}) {
    double secs = 0.0;
    for (std::uint64_t s : cfg.seeds) secs += last_wall_seconds(mese::harness::run_dir(root, v, s));
    worst_variant_hours = std::max(worst_variant_hours, secs / 3600.0);
  }
  const bool faster = mese_v->first_success.median < rnd->first_success.median;
  const bool better = mese_v->final_success.median >= none->final_success.median;
  const bool in_budget = worst_variant_hours <= 2.0;
  c.pass = faster && better && in_budget;
  auto line = [](const char* name, const mese::harness::VariantSummary& s) {
    return std::string(name) + " first-success median " + fmt(s.first_success.median, 6) +
           " (never " + std::to_string(s.n_censored) + "/" + std::to_string(s.n_seeds) +
           "), final success median " + fmt(s.final_success.median, 3);
  };
  c.detail = line("mese", *mese_v) + "; " + line("rnd", *rnd) + "; " + line("none", *none) +
             "; MESE<RND first success: " + (faster ? "yes" : "no") +
             ", MESE>=none final success: " + (better ? "yes" : "no") +
             ", slowest variant " + fmt(worst_variant_hours, 3) + " h";
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path cache = arg_value(argc, argv, "--cache", "acceptance_runs");
  const fs::path config =
      arg_value(argc, argv, "--config", std::string(MESE_SOURCE_DIR) + "/configs/pushbox.ini");
  const bool skip_headline = has_flag(argc, argv, "--skip-headline");

  int failures = 0;
  auto report = [&](int id, const std::string& name, const Check& c) {
    std::cout << "CRITERION " << id << " " << (c.pass ? "PASS" : "FAIL") << " " << name << ": "
              << c.detail << " [" << fmt(c.seconds, 3) << " s]" << std::endl;
    failures += c.pass ? 0 : 1;
  };
  auto guarded = [](auto&& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      Check c;
      c.detail = std::string("exception: ") + e.what();
      return c;
    }
  };

  report(1, "entropy accuracy", guarded([] { return mese::checks::entropy_accuracy(); }));
  report(2, "estimator exact laws", guarded([] { return mese::checks::estimator_laws(); }));
  report(3, "k-NN oracle", guarded([] { return mese::checks::knn_oracle(); }));
  report(4, "subspace selection oracle", guarded([] { return mese::checks::subspace_oracle(); }));
  report(5, "push-rule oracle", guarded([] { return mese::checks::push_rule_oracle(); }));
  report(6, "gradient checks", guarded([] { return mese::checks::gradient_checks(); }));
  report(7, "RND distillation", guarded([] { return mese::checks::rnd_distillation(); }));
  if (skip_headline) {
    std::cout << "CRITERION 8 SKIP headline ordering: --skip-headline given" << std::endl;
  } else {
    report(8, "headline ordering", guarded([&] {
             const auto cfg = mese::harness::load_config(config);
             const std::string key = mese::harness::hex64(
                 mese::harness::fnv1a(mese::harness::to_ini(cfg) + MESE_VERSION));
             return headline(cfg, cache / key);
           }));
  }
  report(9, "determinism", guarded([&] { return mese::checks::determinism(cache / "determinism"); }));
  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAIL")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
