#pragma once

#include <stdexcept>
#include <string>

namespace rmdp {

enum class ErrorCode {
  InvalidArgument,
  Io,
  Syntax,
  ModelInvalid,
  UnknownEntry,
  UnknownBox,
  IllegalAction,
  SteppedAfterTermination,
  NotSingleExit,
  SingularSystem,
  ImproperModel,
  NondeterministicModel,
  CapUnstable,
  FlatModelRequired,
};

struct Error : std::runtime_error {
  Error(ErrorCode c, const std::string& msg) : std::runtime_error(msg), code(c) {}
  ErrorCode code;
};

}  // namespace rmdp
