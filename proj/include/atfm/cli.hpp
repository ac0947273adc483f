#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "atfm/optimizer.hpp"

namespace atfm::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInvariant = 2, kInfeasible = 3 };

struct Options {
  std::filesystem::path scenario;
  std::filesystem::path out_dir = ".";
  std::optional<double> slices;
  std::optional<double> epsilon;
  std::optional<double> p;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> discretize;
  std::optional<ConstraintMode> constraint;
  bool dump_pdfs = false;
  bool dump_scenarios = false;
  std::filesystem::path events;
  bool strict = false;
  double speed = 0.0;
  std::size_t workers = 1;
};

int cmd_validate(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_predict(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_optimize(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_monitor(const Options& opt, std::ostream& out, std::ostream& err);

// Parses argv and dispatches to a subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace atfm::cli
