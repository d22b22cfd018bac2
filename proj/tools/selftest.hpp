// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace fmbrdf::cli {

/// Fast invariant checks (a few seconds). Prints one line per check and
/// returns the number of failures.
int run_selftest(std::ostream& out);

}  // namespace fmbrdf::cli
