#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vfg {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ZeroFullAreaError : public Error {
 public:
  ZeroFullAreaError() : Error("occlusion_ratio: full box has zero area") {}
};

class NonPositiveSizeError : public Error {
 public:
  explicit NonPositiveSizeError(const std::string& what_box)
      : Error("non-positive box size: " + what_box) {}
};

class LabelOutOfRangeError : public Error {
 public:
  LabelOutOfRangeError(int label, std::size_t num_classes)
      : Error("class label " + std::to_string(label) + " out of range [0, " +
              std::to_string(num_classes) + ")") {}
};

class EmptyInputError : public Error {
 public:
  explicit EmptyInputError(const std::string& which)
      : Error("empty input: " + which) {}
};

class NoGroundTruthError : public Error {
 public:
  NoGroundTruthError() : Error("no eligible ground truth instances") {}
};

class EmptyCurveError : public Error {
 public:
  EmptyCurveError() : Error("empty miss-rate/FPPI curve") {}
};

class MissingVisibleBoxError : public Error {
 public:
  explicit MissingVisibleBoxError(const std::string& context)
      : Error("occlusion filtering requires visible boxes: " + context) {}
};

class PlacementFailureError : public Error {
 public:
  explicit PlacementFailureError(const std::string& detail)
      : Error("scene placement failed: " + detail) {}
};

// Malformed line in an annotation/detection file. Carries the 1-based line
// number so callers can point at the offending record.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}

  std::size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class DuplicateImageIdError : public Error {
 public:
  explicit DuplicateImageIdError(const std::string& id)
      : Error("duplicate image id: " + id) {}
};

}  // namespace vfg
