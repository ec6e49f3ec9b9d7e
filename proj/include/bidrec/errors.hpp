#pragma once

#include <stdexcept>
#include <string>

namespace bidrec {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, schema or policy. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data cannot support the requested computation. Maps to CLI exit code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed. Maps to CLI exit code 2, since paths come
/// from the run configuration.
class IoError : public Error {
 public:
  using Error::Error;
};

class PriorUnavailable : public DataError {
 public:
  PriorUnavailable() : DataError("prior unavailable: no feature statistics") {}
};

class DegenerateFeature : public DataError {
 public:
  DegenerateFeature() : DataError("degenerate feature: prior and observed impressions are both zero") {}
};

class NoClickSignal : public DataError {
 public:
  NoClickSignal() : DataError("no click signal: expected CPC is unbounded at zero CTR") {}
};

class EmptyRecommendationSet : public DataError {
 public:
  EmptyRecommendationSet() : DataError("empty recommendation set") {}
};

}  // namespace bidrec
