// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// pier: train, compare, project and gradcheck from the command line.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pier/pier.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::string workers_mode = "seq";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value config file (defaults if omitted)");
  cmd->add_option("--set", c.sets, "override one field, key=value (repeatable)");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "seed (overrides the config)");
  cmd->add_option("--workers-mode", c.workers_mode, "seq or par")
      ->check(CLI::IsMember({"seq", "par"}))
      ->capture_default_str();
}

pier::RunConfig resolve(const Common& c) {
  auto sets = c.sets;
  if (c.seed) sets.push_back("seed=" + std::to_string(*c.seed));
  return pier::load_config(c.config, sets);
}

std::vector<pier::Mode> parse_modes(const std::string& list) {
  std::vector<pier::Mode> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(pier::parse_mode(item));
  }
  return out;
}

void print_optional(const char* label, const std::optional<double>& v) {
  if (v) {
    std::printf("%s %.6f\n", label, *v);
  } else {
    std::printf("%s n/a\n", label);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pier: two-level distributed optimizer on simulated workers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pier::kVersion));

  Common train_opts, compare_opts, grad_opts;
  auto* train = app.add_subcommand("train", "train one mode and write trajectory, params and summary");
  add_common(train, train_opts);

  auto* compare = app.add_subcommand("compare", "train several modes on shared data and compare them");
  add_common(compare, compare_opts);
  std::string modes = "adamw_baseline,diloco_baseline,pier";
  compare->add_option("--modes", modes, "comma-separated modes")->capture_default_str();

  auto* project = app.add_subcommand("project", "cost-model projection over GPU counts and sync intervals");
  pier::ProjectionSweep sweep;
  sweep.preset = "a100-node4";
  std::string project_out = "out";
  project->add_option("--preset", sweep.preset, "a100-node4 or gh200-node1")->capture_default_str();
  project->add_option("--gpus", sweep.gpu_counts, "GPU counts")->capture_default_str();
  project->add_option("--intervals", sweep.intervals, "sync intervals")->capture_default_str();
  project->add_option("--total-iters", sweep.sched.total_iters, "iterations")->capture_default_str();
  project->add_option("--warmup-fraction", sweep.sched.warmup_fraction, "lazy-start fraction")
      ->capture_default_str();
  project->add_option("--out", project_out, "output directory")->capture_default_str();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the analytic gradient");
  add_common(gradcheck, grad_opts);
  pier::GradCheckOptions gopt;
  gradcheck->add_option("--epsilon", gopt.epsilon)->capture_default_str();
  gradcheck->add_option("--coords", gopt.num_coords)->capture_default_str();
  gradcheck->add_option("--threshold", gopt.threshold)->capture_default_str();
  gradcheck->add_flag("--corrupt-gradient", gopt.corrupt_gradient)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? pier::kExitOk : pier::kExitConfig;
  }

  try {
    if (*train) {
      const auto cfg = resolve(train_opts);
      const auto s = pier::cmd_train(cfg, train_opts.out, pier::parse_workers_mode(train_opts.workers_mode));
      std::printf("mode %s\n", std::string(pier::to_string(cfg.mode)).c_str());
      print_optional("initial_val_loss", s.initial_val_loss);
      print_optional("final_val_loss", s.final_val_loss);
      print_optional("final_train_loss", s.final_train_loss);
      std::printf("outer_events %llu\nwall_seconds %.2f\n",
                  static_cast<unsigned long long>(s.stats.outer_events), s.wall_seconds);
    } else if (*compare) {
      const auto base = resolve(compare_opts);
      const auto cfgs = pier::configs_for_modes(base, parse_modes(modes));
      const auto rep = pier::cmd_compare(cfgs, compare_opts.out,
                                         pier::parse_workers_mode(compare_opts.workers_mode));
      std::printf("%-16s %12s %12s %12s\n", "mode", "final_val", "spike", "vs_adamw");
      for (const auto& o : rep.outcomes) {
        auto f = [](const std::optional<double>& v) { return v ? *v : std::nan(""); };
        std::printf("%-16s %12.6f %12.6f %12.6f\n", std::string(pier::to_string(o.mode)).c_str(),
                    f(o.final_val_loss), f(o.spike), f(o.rel_diff_vs_adamw));
      }
      print_optional("projected_speedup", rep.projected_speedup);
    } else if (*project) {
      sweep.sched.validate();
      const auto rows = pier::cmd_project(sweep);
      std::filesystem::create_directories(project_out);
      pier::write_file((std::filesystem::path(project_out) / "projection.jsonl").string(),
                       pier::projection_jsonl(sweep, rows));
      pier::print_projection_table(std::cout, rows);
    } else if (*gradcheck) {
      const auto cfg = resolve(grad_opts);
      const auto rep = pier::cmd_gradcheck(cfg, gopt);
      const auto line = pier::gradcheck_line(cfg, gopt, rep);
      std::filesystem::create_directories(grad_opts.out);
      pier::write_file((std::filesystem::path(grad_opts.out) / "gradcheck.json").string(), line);
      std::printf("max_rel_error %.3e (threshold %.1e) %s\n", rep.max_rel_error, gopt.threshold,
                  rep.max_rel_error < gopt.threshold ? "PASS" : "FAIL");
      if (!(rep.max_rel_error < gopt.threshold)) return pier::kExitThreshold;
    }
  } catch (const pier::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return pier::kExitConfig;
  } catch (const pier::NumericError& e) {
    std::fprintf(stderr, "numeric failure at iteration %ld: %s\n", e.iteration(), e.what());
    return pier::kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return pier::kExitGeneric;
  }
  return pier::kExitOk;
}
