#include "choiceleak/error.hpp"

namespace choiceleak {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::DepthExceeded: return "DepthExceeded";
    case Errc::InconsistentPath: return "InconsistentPath";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedCapture: return "TruncatedCapture";
    case Errc::NoTcpPayload: return "NoTcpPayload";
    case Errc::ReassemblyConflict: return "ReassemblyConflict";
    case Errc::OrderViolation: return "OrderViolation";
    case Errc::InsufficientLabels: return "InsufficientLabels";
    case Errc::InseparableBands: return "InseparableBands";
    case Errc::BadPolicy: return "BadPolicy";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace choiceleak
