#pragma once

#include <stdexcept>

namespace swg {

// Error taxonomy mirrored by the CLI exit codes: configuration/parameter
// problems (2), malformed or degenerate data (3), numerical failures (4).
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : error {
  using error::error;
};

struct data_error : error {
  using error::error;
};

struct numeric_error : error {
  using error::error;
};

}  // namespace swg
