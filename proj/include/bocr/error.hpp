#pragma once

#include <stdexcept>
#include <string>

namespace bocr {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Zero or inconsistent raster dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argument outside its documented valid range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// No text survived cropping.
class EmptyPageError : public Error {
 public:
  EmptyPageError() : Error("empty page") {}
};

// Segmentation or span detection found no text lines.
class NoTextError : public Error {
 public:
  explicit NoTextError(const std::string& what = "no text lines") : Error(what) {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration file or value. `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace bocr
