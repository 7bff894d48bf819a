#pragma once

#include <string>

#include "rmdp/model.hpp"

namespace rmdp::text {

/// Parses the `.rmdp` text format. Throws Error(Syntax) with a line number
/// for malformed input and Error(ModelInvalid) when the parsed model fails
/// validation.
Rmdp parse(const std::string& text);

/// Canonical serialization: deterministic ordering, shortest round-trip
/// decimals, omitted p=1 / r=0. parse(serialize(m)) == m for valid m, and
/// serialize(parse(t)) is a fixed point.
std::string serialize(const Rmdp& m);

}  // namespace rmdp::text
