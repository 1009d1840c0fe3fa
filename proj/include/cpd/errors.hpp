// SPDX-License-Identifier: MIT
#pragma once

#include <stdexcept>
#include <string>

namespace cpd {

/// Bad caller input: shape mismatches, malformed files, out-of-range arguments.
/// The command line tool maps this to exit code 2.
struct validation_error : std::invalid_argument {
  explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure at runtime: non-convergence, rank collapse, eigenvalue
/// collisions. The command line tool maps this to exit code 3.
struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cpd
