// SPDX-License-Identifier: Apache-2.0
#include "delaytk/error.hpp"

namespace delaytk {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::SingularAdjacency: return "SingularAdjacency";
    case ErrorCode::ZeroGamma: return "ZeroGamma";
    case ErrorCode::UndefinedAtZero: return "UndefinedAtZero";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NotDiagonalizable: return "NotDiagonalizable";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::BracketInvalid: return "BracketInvalid";
    case ErrorCode::InsufficientRoots: return "InsufficientRoots";
    case ErrorCode::SingularM22: return "SingularM22";
    case ErrorCode::NonRealSpectrum: return "NonRealSpectrum";
    case ErrorCode::PairingMismatch: return "PairingMismatch";
    case ErrorCode::UnstableAtStart: return "UnstableAtStart";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
  }
  return "Unknown";
}

}  // namespace delaytk
