#pragma once

#include <stdexcept>
#include <string>

namespace bmil {

// Dimension/precondition violations on library calls.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid data: bad spec fields, malformed files, mismatched datasets.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed on-disk artifacts (JSON lines, checkpoints).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite losses/parameters during optimization.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Expert or model failed to produce usable episodes/traces.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inconsistent run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bmil
