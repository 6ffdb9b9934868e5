#pragma once

#include <ostream>

namespace intervene {

/// Fast gradient and semantics property checks; one line per check.
/// Returns true when all pass.
bool run_selftest(std::ostream& out);

}  // namespace intervene
