#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

#include "topotrace/geometry.hpp"

namespace topotrace {

/// Base of every domain error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")" : what),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A file-backed predictor has no stored heatmap near the queried center.
class PredictorMiss : public Error {
 public:
  explicit PredictorMiss(Point center)
      : Error("predictor miss: no stored heatmap within 1 px of " + format(center)), center_(center) {}

  Point center() const { return center_; }

 private:
  static std::string format(Point p) {
    std::ostringstream os;
    os << '(' << p.x << ", " << p.y << ')';
    return os.str();
  }

  Point center_;
};

}  // namespace topotrace
