// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace delaytk {

enum class ErrorCode {
  InvalidArgument,
  ParseError,
  SelfLoop,
  DuplicateEdge,
  IndexOutOfRange,
  Disconnected,
  SingularAdjacency,
  ZeroGamma,
  UndefinedAtZero,
  NonConvergence,
  NotDiagonalizable,
  GridTooCoarse,
  BracketInvalid,
  InsufficientRoots,
  SingularM22,
  NonRealSpectrum,
  PairingMismatch,
  UnstableAtStart,
  StepTooLarge,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace delaytk
