#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace stymam;

int main(int argc, char** argv) {
  CLI::App app{"stymam: strip-scan mamba style transfer"};
  app.require_subcommand(1);

  cli::TrainArgs train;
  std::uint64_t train_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train generator and discriminator from a config file");
  train_cmd->add_option("--config", train.config, "key = value config file")->required();
  auto* seed_opt = train_cmd->add_option("--seed", train_seed, "Override the config/STYMAM_SEED seed");

  cli::StylizeArgs stylize;
  std::string stylize_profile = "desk";
  std::size_t stylize_size = 0;
  auto* stylize_cmd = app.add_subcommand("stylize", "Stylize one PPM image with a trained checkpoint");
  stylize_cmd->add_option("--checkpoint", stylize.checkpoint)->required();
  stylize_cmd->add_option("--in", stylize.input)->required();
  stylize_cmd->add_option("--out", stylize.output)->required();
  auto* size_opt = stylize_cmd->add_option("--size", stylize_size, "Resize to size x size first (default: 512 paper, native desk)");
  stylize_cmd->add_option("--profile", stylize_profile)->check(CLI::IsMember({"desk", "paper"}));
  stylize_cmd->add_option("--config", stylize.config, "Training config describing the generator shape");

  cli::ScanVizArgs viz;
  std::size_t viz_size = 0;
  std::string orientation = "h";
  auto* viz_cmd = app.add_subcommand("scan-viz", "Dump a strip zigzag scan order as CSV and PGM");
  viz_cmd->add_option("--height", viz.height);
  viz_cmd->add_option("--width", viz.width);
  viz_cmd->add_option("--size", viz_size, "Square grid shorthand for --height/--width");
  viz_cmd->add_option("--strip", viz.strip)->default_val(4);
  viz_cmd->add_option("--orientation", orientation)->check(CLI::IsMember({"h", "v"}));
  viz_cmd->add_option("--out", viz.out_prefix, "Output prefix")->required();

  std::string grad_profile = "desk";
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad_cmd->add_option("--profile", grad_profile)->check(CLI::IsMember({"desk", "paper"}));

  std::string mutate;
  auto* self_cmd = app.add_subcommand("selftest", "Run oracle, invariant and gradient checks");
  self_cmd->add_option("--mutate", mutate, "Deliberately break a component (ssm) to test the tester")
      ->check(CLI::IsMember({"ssm"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  try {
    if (*train_cmd) {
      if (*seed_opt) train.seed = train_seed;
      return cli::run_train(train, std::cout, std::cerr);
    }
    if (*stylize_cmd) {
      stylize.profile = parse_profile(stylize_profile);
      if (*size_opt) stylize.size = stylize_size;
      return cli::run_stylize(stylize, std::cout, std::cerr);
    }
    if (*viz_cmd) {
      if (viz_size) viz.height = viz.width = viz_size;
      viz.orientation = orientation == "v" ? StripOrientation::Vertical : StripOrientation::Horizontal;
      return cli::run_scan_viz(viz, std::cout, std::cerr);
    }
    if (*grad_cmd) return cli::run_gradcheck(parse_profile(grad_profile), std::cout, std::cerr);
    if (*self_cmd) return cli::run_selftest(mutate == "ssm", std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kConfigError;
  }
  return cli::kOk;
}
