#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gradspec/analysis.hpp"

namespace gradspec::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3 };

/// Entry point of the `gradspec` tool. Returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Column order of the analyze CSV.
inline constexpr const char* kRateColumns[] = {"axis",          "tested",  "untestable",
                                               "mean_dks",      "d_c",     "powerlaw_rate",
                                               "mean_p",        "gaussian_rate"};

std::string rates_csv(const std::vector<RateSummary>& rows);

}  // namespace gradspec::cli
