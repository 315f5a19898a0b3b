#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "polyct/error.hpp"
#include "polyct/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> threads;
  bool full_scale = false;
  bool print_config = false;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file (keys override the defaults)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--seed", f.seed, "base seed");
  sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_flag("--full-scale", f.full_scale, "use the full problem sizes");
  sub->add_flag("--print-config", f.print_config, "print the resolved config and exit");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace polyct;
  using experiments::ExperimentConfig;
  using experiments::ExperimentKind;

  CLI::App app{"Polyak subgradient recovery experiments"};
  app.require_subcommand(1);
  Flags flags;
  for (auto kind : {ExperimentKind::phase_transition, ExperimentKind::convergence,
                    ExperimentKind::robustness, ExperimentKind::noisy, ExperimentKind::ct}) {
    add_flags(app.add_subcommand(experiments::to_string(kind)), flags);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const ExperimentKind kind = experiments::parse_kind(app.get_subcommands().front()->get_name());
    ExperimentConfig cfg = ExperimentConfig::defaults(kind, flags.full_scale);
    if (!flags.config.empty()) {
      cfg = ExperimentConfig::load(flags.config);
      if (cfg.kind != kind) {
        throw Error(ErrorCode::config_error, std::string("config is for '") +
                                                 experiments::to_string(cfg.kind) + "'");
      }
    }
    if (!flags.out.empty()) cfg.out_dir = flags.out;
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.threads) cfg.threads = *flags.threads;
    cfg.validate();
    if (flags.print_config) {
      std::cout << cfg.to_json() << '\n';
      return 0;
    }
    if (cfg.out_dir.empty()) throw Error(ErrorCode::config_error, "--out is required");
    experiments::run_and_write(cfg);
    std::cout << "wrote " << cfg.out_dir << " (config " << cfg.hash_hex() << ")\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::config_error:
      case ErrorCode::invalid_argument:
      case ErrorCode::not_power_of_two:
        return kExitConfig;
      default:
        return kExitNumerical;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
