#pragma once

#include <string>
#include <vector>

#include "agentforest/stats.hpp"

namespace agentforest {

// exit codes shared by all subcommands
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitPartial = 4;

int cli_main(int argc, const char* const* argv);

// helpers shared with the test suite
std::vector<int> parse_int_list(const std::string& csv);
std::vector<int> default_curve_sizes(int n);
std::string curve_csv(const std::vector<CurvePoint>& points);
std::vector<CurvePoint> parse_curve_csv(const std::string& csv);

}  // namespace agentforest
