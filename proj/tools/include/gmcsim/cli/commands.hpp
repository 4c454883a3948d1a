#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gmcsim/cli/config.hpp"
#include "gmcsim/cli/output.hpp"

namespace gmcsim::cli {

std::string_view tool_version();

/// Exit codes shared by every command.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2 };

struct Context {
  RunConfig config;
  std::vector<dynamp::Topology> topologies;
  std::filesystem::path out_dir;
  unsigned workers = 1;
  bool strict = false;
  std::string fingerprint;
};

/// Each command computes everything first and only then publishes its files
/// through an OutputSet, so a failure leaves the output directory untouched.
/// Human-readable progress goes to `log`.
OutputSet cmd_transfer(const Context& ctx, std::ostream& log);
OutputSet cmd_gain(const Context& ctx, double vin, std::ostream& log);
OutputSet cmd_thd(const Context& ctx, std::ostream& log);
OutputSet cmd_corners(const Context& ctx, std::ostream& log);

struct CalibrateOutcome {
  OutputSet files;
  RunConfig updated;
};
CalibrateOutcome cmd_calibrate(const Context& ctx, double target_gain, std::ostream& log);

struct SelftestOutcome {
  OutputSet files;
  bool passed;
};
SelftestOutcome cmd_selftest(const Context& ctx, std::ostream& log);

/// transfer + gain + thd + corners plus a report.json summary.
OutputSet cmd_report(const Context& ctx, std::ostream& log);

/// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace gmcsim::cli
