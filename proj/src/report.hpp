#pragma once

#include "catalog.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace crpred {

inline constexpr const char* kToolVersion = "0.1.0";

// Commands accepted by run_command / the CLI.
bool is_known_command(const std::string& command);

struct RunOutput {
  nlohmann::ordered_json report;
  std::string csv;
  // 0 success, 2 config error, 3 numerical/singularity error,
  // 4 assumption-violation verdict. Config/numeric failures are raised as
  // exceptions instead; 4 is returned with the report intact.
  int exit_code = 0;
};

// Executes one batch command against a JSON configuration. Seed precedence:
// explicit override (CLI flag), then the CRPRED_SEED environment variable,
// then the config value. The report omits wall-clock data unless
// `include_timing` is set so that reruns stay byte-identical.
RunOutput run_command(const std::string& command, const std::string& config_json,
                      std::optional<std::uint64_t> seed_override = std::nullopt,
                      bool include_timing = false);

// Row-major matrix serialization with explicit shape.
nlohmann::ordered_json matrix_json(const Matrix& m);
nlohmann::ordered_json vector_json(const Vector& v);

}  // namespace crpred
