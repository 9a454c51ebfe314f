// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace septfa {

// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorKind { kConfig, kIo, kNumeric, kDimension, kLength, kDomain, kState, kSampling, kRender };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::kConfig, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::kIo, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::kNumeric, w) {}
};
struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(ErrorKind::kDimension, w) {}
};
struct LengthError : Error {
  explicit LengthError(const std::string& w) : Error(ErrorKind::kLength, w) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorKind::kDomain, w) {}
};
struct StateError : Error {
  explicit StateError(const std::string& w) : Error(ErrorKind::kState, w) {}
};
// Scene constraints could not be met.
struct SamplingError : Error {
  explicit SamplingError(const std::string& w) : Error(ErrorKind::kSampling, w) {}
};
// Source material unusable for mixing (e.g. silent).
struct RenderError : Error {
  explicit RenderError(const std::string& w) : Error(ErrorKind::kRender, w) {}
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kSampling:
      return 2;
    case ErrorKind::kIo:
    case ErrorKind::kRender:
      return 3;
    default:
      return 4;
  }
}

}  // namespace septfa
