// Command-line front end for the checal shared library. All real work goes
// through the C API so this binary doubles as its integration example.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "checal.h"

namespace {

constexpr int kExitUsage = 2;

int emit(int exit_code, char* text) {
  if (text != nullptr) {
    std::fputs(text, stdout);
    checal_string_free(text);
  }
  return exit_code;
}

int api_failure(checal_status status) {
  std::fprintf(stderr, "error (%s): %s\n", checal_status_name(status),
               checal_last_error());
  return kExitUsage;
}

// CHECAL_JOBS must be a plain positive integer when set.
bool parse_env_jobs(const char* text, int* out) {
  char* end = nullptr;
  const long v = std::strtol(text, &end, 10);
  if (end == text || *end != '\0' || v < 1 || v > 4096) return false;
  *out = static_cast<int>(v);
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual hand-eye calibration toolkit"};
  app.set_version_flag("--version", checal_version());
  app.require_subcommand(1);

  // Environment defaults; explicit flags always win.
  const char* env_out = std::getenv("CHECAL_OUT");
  const char* env_jobs = std::getenv("CHECAL_JOBS");
  const std::string default_out = env_out != nullptr ? env_out : "out";
  int default_jobs = 1;
  if (env_jobs != nullptr && !parse_env_jobs(env_jobs, &default_jobs)) {
    std::fprintf(stderr, "error: CHECAL_JOBS must be a positive integer\n");
    return kExitUsage;
  }

  std::string run_config;
  std::string run_method = "ours";
  std::uint64_t run_seed = 0;
  int run_jobs = default_jobs;
  std::string run_out = default_out;
  CLI::App* run = app.add_subcommand(
      "run", "Train and evaluate methods on the synthetic benchmark");
  run->add_option("--config", run_config, "Experiment config (JSON)")
      ->required();
  run->add_option("--method", run_method,
                  "ours | sars_only | reservoir_replay | finetune | joint | all");
  run->add_option("--seed", run_seed, "Root seed (default 0)");
  run->add_option("--jobs", run_jobs, "Max concurrent experiments")
      ->check(CLI::PositiveNumber);
  run->add_option("--out", run_out, "Output directory for reports");

  int gc_k = 8;
  std::uint64_t gc_seed = 1;
  bool gc_corrupt = false;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Compare analytic gradients against finite differences");
  gradcheck->add_option("--k", gc_k, "Cluster-center count (1..16)");
  gradcheck->add_option("--seed", gc_seed, "Instance seed (default 1)");
  gradcheck->add_flag("--corrupt", gc_corrupt,
                      "Negative control: perturb one gradient; must fail");

  std::string demo_config;
  std::uint64_t demo_seed = 0;
  std::string demo_out = default_out;
  CLI::App* demo = app.add_subcommand(
      "buffer-demo",
      "Stream a clustered trajectory through the spacing and reservoir buffers");
  demo->add_option("--config", demo_config, "Experiment config (JSON)")
      ->required();
  demo->add_option("--seed", demo_seed, "Stream seed (default 0)");
  demo->add_option("--out", demo_out, "Output directory for the pose CSV");

  std::vector<std::string> report_paths;
  std::string report_csv;
  CLI::App* report = app.add_subcommand(
      "report", "Summarize report files as a per-scene comparison table");
  report->add_option("paths", report_paths, "Report JSON files")
      ->required()
      ->expected(-1);
  report->add_option("--csv", report_csv, "Also export the summary as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  int exit_code = 0;
  char* text = nullptr;
  checal_status status = CHECAL_OK;
  if (run->parsed()) {
    status = checal_cmd_run(run_config.c_str(), run_method.c_str(), run_seed,
                            run_jobs, run_out.c_str(), &exit_code, &text);
  } else if (gradcheck->parsed()) {
    status = checal_cmd_gradcheck(gc_k, gc_seed, gc_corrupt ? 1 : 0, &exit_code,
                                  &text);
  } else if (demo->parsed()) {
    status = checal_cmd_buffer_demo(demo_config.c_str(), demo_seed,
                                    demo_out.c_str(), &exit_code, &text);
  } else if (report->parsed()) {
    std::vector<const char*> paths;
    paths.reserve(report_paths.size());
    for (const std::string& p : report_paths) paths.push_back(p.c_str());
    status = checal_cmd_report(paths.data(), paths.size(),
                               report_csv.empty() ? nullptr : report_csv.c_str(),
                               &exit_code, &text);
  }
  if (status != CHECAL_OK) return api_failure(status);
  return emit(exit_code, text);
}
