#pragma once

#include <string>

namespace carbonclear {

/// Shortest decimal text that parses back to exactly the same double.
/// All machine-readable output funnels through this so that result files
/// are byte-stable across runs.
std::string fmt_number(double v);

}  // namespace carbonclear
