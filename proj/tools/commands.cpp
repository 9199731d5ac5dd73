#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "stymam/checkpoint.hpp"
#include "stymam/errors.hpp"
#include "stymam/generator.hpp"
#include "stymam/image.hpp"
#include "stymam/selftest.hpp"
#include "stymam/training.hpp"

namespace stymam::cli {

int run_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  try {
    if (!std::filesystem::exists(args.config)) {
      err << "error: config file " << args.config.string() << " does not exist\n";
      return kConfigError;
    }
    cfg = load_train_config(args.config);
    apply_env_overrides(cfg);
    if (args.seed) cfg.seed = *args.seed;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    run_training(cfg, [&](const TrainMetrics& m) {
      if (m.step == 1 || m.step % 50 == 0 || m.step == cfg.max_steps) out << metrics_row(m) << '\n';
    });
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kCheckpointError;
  }
  out << "wrote " << cfg.metrics_path.string() << " and " << cfg.checkpoint_path.string() << '\n';
  return kOk;
}

int run_stylize(const StylizeArgs& args, std::ostream& out, std::ostream& err) {
  GeneratorConfig gcfg = args.profile == Profile::Paper ? GeneratorConfig::paper() : GeneratorConfig::desk();
  try {
    if (!args.config.empty()) gcfg = load_train_config(args.config).generator;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  GeneratorWeights weights = GeneratorWeights::zeros(gcfg);
  try {
    load_checkpoint(args.checkpoint, weights.params(), /*allow_extra=*/true);
  } catch (const CheckpointError& e) {
    err << "checkpoint error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return kCheckpointError;
  }
  try {
    Tensor img = image_to_tensor(read_pnm(args.input));
    const std::size_t size = args.size.value_or(args.profile == Profile::Paper ? 512 : 0);
    if (size > 0) img = resize_bilinear(img, size, size);
    const std::size_t h = img.dim(0), w = img.dim(1);
    NoGradGuard no_grad;
    const Tensor styled = crop(generator_forward(pad_to_multiple(img, 4), weights), h, w);
    write_ppm(tensor_to_image(styled), args.output);
    out << "wrote " << args.output.string() << " (" << w << "x" << h << ")\n";
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

std::string scan_csv(const ScanOrder& order) {
  std::string csv = "t,row,col\n";
  for (std::size_t t = 0; t < order.size(); ++t) {
    const GridCell c = order.cell(t);
    csv += std::to_string(t) + "," + std::to_string(c.row) + "," + std::to_string(c.col) + "\n";
  }
  return csv;
}

int run_scan_viz(const ScanVizArgs& args, std::ostream& out, std::ostream& err) {
  ScanOrder order;
  try {
    order = ScanOrder::build(args.height, args.width, args.strip, args.orientation);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const std::filesystem::path csv_path = args.out_prefix + ".csv";
  const std::filesystem::path pgm_path = args.out_prefix + ".pgm";
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) {
    err << "data error: cannot write " << csv_path.string() << '\n';
    return kDataError;
  }
  csv << scan_csv(order);

  // Brightness encodes visiting time: first cell black, last cell white.
  Image pgm{args.width, args.height, 1, std::vector<std::uint8_t>(order.size(), 0)};
  const double last = order.size() > 1 ? static_cast<double>(order.size() - 1) : 1.0;
  for (std::size_t t = 0; t < order.size(); ++t) {
    pgm.pixels[order.perm()[t]] = static_cast<std::uint8_t>(std::lround(255.0 * static_cast<double>(t) / last));
  }
  try {
    write_pgm(pgm, pgm_path);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  out << "wrote " << csv_path.string() << " and " << pgm_path.string() << '\n';
  return kOk;
}

int run_gradcheck(Profile profile, std::ostream& out, std::ostream&) {
  const auto gcfg = profile == Profile::Paper ? GeneratorConfig::paper() : GeneratorConfig::desk();
  return print_report(out, check_gradients(19, gcfg)) ? kOk : kSelftestFailed;
}

int run_selftest(bool mutate_ssm, std::ostream& out, std::ostream&) {
  SelftestOptions opts;
  opts.mutate_ssm = mutate_ssm;
  return print_report(out, stymam::run_selftest(opts)) ? kOk : kSelftestFailed;
}

}  // namespace stymam::cli
