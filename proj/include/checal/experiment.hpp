#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace checal {

// Process exit codes shared by the command front ends.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDivergence = 3;

struct RunOptions {
  std::string config_path;
  std::string method = "ours";  // method name or "all"
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir = "out";
};

struct GradcheckOptions {
  int k = 8;
  std::uint64_t seed = 1;
  bool corrupt = false;  // negative control: must fail
};

struct BufferDemoOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
};

struct ReportOptions {
  std::vector<std::string> report_paths;
  std::string csv_path;  // empty = no CSV export
};

// Each command writes its human-readable output (including error
// diagnostics) to `os` and returns a process exit code; they never throw.
int cmd_run(const RunOptions& options, std::ostream& os);
int cmd_gradcheck(const GradcheckOptions& options, std::ostream& os);
int cmd_buffer_demo(const BufferDemoOptions& options, std::ostream& os);
int cmd_report(const ReportOptions& options, std::ostream& os);

}  // namespace checal
