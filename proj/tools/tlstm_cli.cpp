// Command-line front end: synth, train, evaluate, compare.

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>

#include <CLI11.hpp>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "tlstm/tlstm.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<std::size_t> components;
  bool force = false;
  bool quiet = false;
};

tlstm::RunConfig resolve(const Overrides& o) {
  tlstm::RunConfig cfg = tlstm::load_run_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) cfg.train.seed = *o.seed;
  if (!o.mode.empty()) cfg.mode = tlstm::parse_mode(o.mode);
  if (o.components) cfg.n_components = *o.components;
  cfg.validate();
  return cfg;
}

void print_metrics(const tlstm::MetricsReport& m) {
  std::cout << std::fixed << std::setprecision(4) << m.split << ": n=" << m.n << " mse=" << m.mse
            << " rmse=" << m.rmse << " mae=" << m.mae << " r2=";
  if (m.r2)
    std::cout << *m.r2;
  else
    std::cout << "undefined";
  std::cout << '\n';
}

std::mutex log_mutex;

void log_epoch(const std::string& tag, const tlstm::EpochRecord& e) {
  std::lock_guard lock(log_mutex);
  std::clog << '[' << tag << "] epoch " << e.epoch << " train " << std::scientific << std::setprecision(4)
            << e.train_loss << " val " << e.val_loss << " lr " << e.lr;
  if (e.clipped_batches) std::clog << " clipped " << e.clipped_batches;
  std::clog << std::defaultfloat << '\n';
}

void add_run_flags(CLI::App* cmd, Overrides& o, bool with_mode) {
  cmd->add_option("--config", o.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory (overrides output_dir)");
  cmd->add_option("--seed", o.seed, "Seed for initialization, shuffling and dropout");
  if (with_mode) cmd->add_option("--mode", o.mode, "baseline or tucker")->check(CLI::IsMember({"baseline", "tucker"}));
  cmd->add_option("--components", o.components, "Number of retained feature components (tucker)")
      ->check(CLI::Range(1, 14));
  cmd->add_flag("--force", o.force, "Allow writing into a non-empty output directory");
  cmd->add_flag("--quiet", o.quiet, "Suppress per-epoch progress");
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Training allocates and frees many same-sized temporaries per batch; keep
  // freed pages instead of returning them to the kernel each time.
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Tucker-LSTM state-of-charge forecasting toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tlstm::kToolkitVersion));

  tlstm::SynthConfig synth_cfg;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate synthetic telemetry CSV");
  synth->add_option("--records", synth_cfg.n_records, "Number of records")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_cfg.seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output CSV path")->required();
  synth->add_option("--cadence", synth_cfg.cadence_s, "Seconds between records")->check(CLI::PositiveNumber);
  synth->add_option("--cycles", synth_cfg.n_cycles, "Charge/discharge cycles")->check(CLI::PositiveNumber);
  synth->add_option("--noise", synth_cfg.noise_std, "Noise level in [0, 0.2]")->check(CLI::Range(0.0, 0.2));
  synth->add_option("--capacity", synth_cfg.capacity_kwh, "Pack capacity (kWh)")->check(CLI::PositiveNumber);

  Overrides train_o, eval_o, cmp_o;
  auto* train = app.add_subcommand("train", "Train one model (baseline or tucker)");
  add_run_flags(train, train_o, true);
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a trained run directory");
  evaluate->add_option("--config", eval_o.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", eval_o.out, "Run directory holding model.ckpt (defaults to output_dir)");
  auto* compare = app.add_subcommand("compare", "Train baseline and tucker models and compare them");
  add_run_flags(compare, cmp_o, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto records = tlstm::generate(synth_cfg);
      tlstm::write_telemetry_csv(std::filesystem::path(synth_out), records);
      std::cout << "wrote " << records.size() << " records to " << synth_out << '\n';
    } else if (*train) {
      const tlstm::RunConfig cfg = resolve(train_o);
      const std::string tag = tlstm::to_string(cfg.mode);
      const auto a = tlstm::run_train(cfg, train_o.force, [&](const tlstm::EpochRecord& e) {
        if (!train_o.quiet) log_epoch(tag, e);
      });
      std::cout << tag << " best epoch " << a.report.best_epoch << " (" << tlstm::to_string(a.report.stop_reason)
                << ")\n";
      print_metrics(a.test_metrics);
    } else if (*evaluate) {
      tlstm::RunConfig cfg = tlstm::load_run_config(eval_o.config);
      if (!eval_o.out.empty()) cfg.output_dir = eval_o.out;
      for (const auto& m : tlstm::run_evaluate(cfg, cfg.output_dir)) print_metrics(m);
    } else if (*compare) {
      const tlstm::RunConfig cfg = resolve(cmp_o);
      const auto c = tlstm::run_compare(cfg, cmp_o.force, [&](tlstm::ModelMode mode, const tlstm::EpochRecord& e) {
        if (!cmp_o.quiet) log_epoch(tlstm::to_string(mode), e);
      });
      std::cout << tlstm::to_text(c.comparison);
    }
  } catch (const tlstm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
