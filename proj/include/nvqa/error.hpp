#ifndef NVQA_ERROR_HPP_
#define NVQA_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace nvqa {

// Base for every error raised by the library. The CLI maps ConfigError to
// exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class ProvenanceError : public LoadError {
 public:
  using LoadError::LoadError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nvqa

#endif  // NVQA_ERROR_HPP_
