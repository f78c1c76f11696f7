#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace deepconn {

/// Failure categories shared by every module. Each operation documents which
/// of these it may raise.
enum class ErrorCode {
  InvalidArgument,
  OutOfBounds,
  SpacingMismatch,
  EmptyMask,
  // ingest
  NotDicom,
  UnsupportedTransferSyntax,
  MissingTag,
  UnsupportedPixelFormat,
  UnsupportedOrientation,
  InconsistentGeometry,
  DuplicatePosition,
  NonUniformGap,
  SizeMismatch,
  UnsupportedElementType,
  MalformedHeader,
  BadWindow,
  // stitch / cine
  EmptyRoi,
  GeometryMismatch,
  NoOverlap,
  OverlapTooLarge,
  EmptySeries,
  // render
  OutOfRange,
  DegenerateCamera,
  // fabricate
  ContourExceedsSheet,
  // phantom / io
  BadSpec,
  IoFailure,
  // pipeline
  ManifestError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace deepconn
