// glf: command-line entry point.

#include "glf/glf.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

enum Exit : int { kOk = 0, kConfigError = 1, kDivergence = 2, kGradcheckFailed = 3 };

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed_data, seed_model, seed_train;
  std::string out;
  std::string lpm_variant, t_form;
};

glf::ExperimentConfig resolve(const Overrides& o) {
  glf::ExperimentConfig cfg = o.config_path.empty() ? glf::ExperimentConfig{} : glf::load_config(o.config_path);
  if (o.seed_data) cfg.seed_data = *o.seed_data;
  if (o.seed_model) cfg.seed_model = *o.seed_model;
  if (o.seed_train) cfg.seed_train = *o.seed_train;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.lpm_variant.empty()) glf::set_config_value(cfg, "constraining.lpm_variant", o.lpm_variant);
  if (!o.t_form.empty()) glf::set_config_value(cfg, "constraining.t_form", o.t_form);
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config_path, "experiment config file")->check(CLI::ExistingFile);
  sub->add_option("--seed-data", o.seed_data, "override seeds.data");
  sub->add_option("--seed-model", o.seed_model, "override seeds.model");
  sub->add_option("--seed-train", o.seed_train, "override seeds.train");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--lpm-variant", o.lpm_variant, "LPM prior form")->check(CLI::IsMember({"shifted", "literal", "concentrated"}));
  sub->add_option("--t-form", o.t_form, "student-t kernel form")->check(CLI::IsMember({"standard", "paper-literal"}));
}

void print_metrics(const glf::MetricsReport& r) {
  std::printf("linear_acc         %.6f\nknn_acc            %.6f\nmean_ce            %.6f\ncond_variance      %.6f\n"
              "intra_compactness  %.6f\ninter_separability %.6f\nalignment          %.6f\nuniformity         %.6f\n",
              r.linear_acc, r.knn_acc, r.mean_ce, r.cond_variance, r.intra_compactness, r.inter_separability, r.alignment,
              r.uniformity);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glf: contrastive pretraining with distribution constraints"};
  app.require_subcommand(1);

  Overrides train_o, eval_o, toy_o, sweep_o;
  auto* train = app.add_subcommand("train", "pretrain, checkpoint and evaluate");
  add_common(train, train_o);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(eval, eval_o);
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every loss");
  std::vector<std::uint64_t> grad_seeds{0, 1, 2, 3, 4};
  grad->add_option("--seeds", grad_seeds, "seeds to check");

  auto* toy = app.add_subcommand("toy-constraints", "compare constraints on an align-only objective");
  add_common(toy, toy_o);

  auto* sweep = app.add_subcommand("sweep", "grid over nu and upsilon");
  add_common(sweep, sweep_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) {
      const auto cfg = resolve(train_o);
      const auto rec = glf::cmd_train(cfg, cfg.output_dir);
      std::printf("config %s, %zu epochs, %.1fs\n", rec.config_hash.c_str(), rec.log.size(), rec.wall_clock_seconds);
      print_metrics(rec.metrics);
    } else if (*eval) {
      const auto cfg = resolve(eval_o);
      print_metrics(glf::cmd_eval(checkpoint, cfg, cfg.output_dir));
    } else if (*grad) {
      const auto report = glf::run_gradcheck(glf::default_gradcheck_cases(), grad_seeds);
      glf::print_gradcheck(std::cout, report);
      if (!report.passed()) {
        for (const auto& n : report.failing_cases()) std::cerr << "gradcheck failed: " << n << "\n";
        return kGradcheckFailed;
      }
    } else if (*toy) {
      const auto cfg = resolve(toy_o);
      const auto cols = glf::cmd_toy_constraints(cfg, cfg.output_dir, glf::thread_budget());
      for (const auto& c : cols)
        std::printf("%-4s final knn_acc %.4f\n", c.name.c_str(), c.knn_per_epoch.empty() ? 0.0 : c.knn_per_epoch.back());
    } else if (*sweep) {
      const auto cfg = resolve(sweep_o);
      const auto cells = glf::cmd_sweep(cfg, cfg.output_dir, glf::thread_budget());
      std::size_t resumed = 0;
      for (const auto& c : cells) resumed += c.resumed ? 1 : 0;
      std::printf("%zu cells (%zu resumed), table at %s/sweep.csv\n", cells.size(), resumed, cfg.output_dir.c_str());
    }
  } catch (const glf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const glf::FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const glf::DivergenceError& e) {
    std::cerr << e.what() << "\n";
    return kDivergence;
  } catch (const glf::NumericError& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
