// crpred command-line front end. Links the C API only: everything numerical
// happens behind the shared library boundary.

#include <crpred/crpred.h>

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

int map_exit_code(crpred_status status) {
  switch (status) {
    case CRPRED_OK: return 0;
    case CRPRED_ERROR_CONFIG:
    case CRPRED_ERROR_DOMAIN:
    case CRPRED_ERROR_CAPABILITY: return 2;
    case CRPRED_ERROR_NUMERIC:
    case CRPRED_ERROR_INTERNAL: return 3;
    case CRPRED_ERROR_ASSUMPTION: return 4;
  }
  return 3;
}

bool write_file(const std::string& path, const char* text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << text;
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("crpred ") + crpred_version() +
               " — prediction Cramér-Rao bounds, L²-differentiability "
               "diagnostics, efficiency checks and exponential-family "
               "reconstruction"};
  app.require_subcommand(1);

  const char* command_names[] = {"fisher",     "score",       "l2diag",
                                 "lemma106",   "continuity",  "bound",
                                 "qep",        "efficiency",  "biased-bound",
                                 "msep",       "lemma1",      "reconstruct",
                                 "check-assumptions"};

  std::string config_path;
  std::string out_path;
  std::string csv_path;
  std::uint64_t seed = 0;
  bool has_seed = false;
  bool timing = false;

  for (const char* name : command_names) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " command");
    sub->add_option("--config", config_path, "JSON run configuration")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "write the JSON report here (default stdout)");
    sub->add_option("--csv", csv_path, "also write a flat CSV table");
    sub->add_option("--seed", seed, "override the config seed (wins over CRPRED_SEED)")
        ->each([&has_seed](const std::string&) { has_seed = true; });
    sub->add_flag("--timing", timing, "include wall-clock timing in the report "
                                      "(breaks byte-identical reruns)");
  }

  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  std::ifstream in(config_path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string config = buffer.str();

  crpred_run_options options{};
  options.has_seed_override = has_seed ? 1 : 0;
  options.seed_override = seed;
  options.include_timing = timing ? 1 : 0;

  char* report = nullptr;
  char* csv = nullptr;
  crpred_status status = crpred_run(command.c_str(), config.c_str(), &options, &report,
                                    csv_path.empty() ? nullptr : &csv);

  int exit_code = map_exit_code(status);
  if (status != CRPRED_OK && status != CRPRED_ERROR_ASSUMPTION) {
    std::cerr << "crpred " << command << ": " << crpred_last_error() << "\n";
    crpred_string_free(report);
    crpred_string_free(csv);
    return exit_code;
  }

  if (report) {
    if (out_path.empty()) {
      std::cout << report;
    } else if (!write_file(out_path, report)) {
      std::cerr << "crpred: cannot write report to " << out_path << "\n";
      exit_code = 3;
    }
  }
  if (!csv_path.empty() && csv) {
    if (!write_file(csv_path, csv)) {
      std::cerr << "crpred: cannot write CSV to " << csv_path << "\n";
      exit_code = 3;
    }
  }
  if (status == CRPRED_ERROR_ASSUMPTION) {
    std::cerr << "crpred " << command << ": assumption-violation verdict\n";
  }
  crpred_string_free(report);
  crpred_string_free(csv);
  return exit_code;
}
