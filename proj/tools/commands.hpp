#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "stymam/config.hpp"
#include "stymam/scan.hpp"

namespace stymam::cli {

enum ExitCode : int {
  kOk = 0,
  kSelftestFailed = 1,
  kConfigError = 2,
  kDataError = 3,
  kCheckpointError = 4,
  kNumericError = 5,
};

struct TrainArgs {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
};

struct StylizeArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::size_t> size;  // square resize before stylizing; default per profile
  Profile profile = Profile::Desk;
  std::filesystem::path config;     // optional; overrides the profile's generator shape
};

struct ScanVizArgs {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t strip = 4;
  StripOrientation orientation = StripOrientation::Horizontal;
  std::string out_prefix;  // writes <prefix>.csv and <prefix>.pgm
};

int run_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int run_stylize(const StylizeArgs& args, std::ostream& out, std::ostream& err);
int run_scan_viz(const ScanVizArgs& args, std::ostream& out, std::ostream& err);
int run_gradcheck(Profile profile, std::ostream& out, std::ostream& err);
int run_selftest(bool mutate_ssm, std::ostream& out, std::ostream& err);

// CSV text `t,row,col` with header, one row per scan step.
std::string scan_csv(const ScanOrder& order);

}  // namespace stymam::cli
