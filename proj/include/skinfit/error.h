// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_ERROR_H
#define SKINFIT_ERROR_H

#include <stdexcept>
#include <string>

namespace skinfit {

// Bad settings: unknown keys, invalid values, malformed config files.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad or missing input data: unreadable files, parse failures, shape mismatches.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Non-finite values, rank deficiency, and other failures of the math itself.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace skinfit

#endif  // SKINFIT_ERROR_H
