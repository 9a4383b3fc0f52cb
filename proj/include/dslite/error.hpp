#pragma once

#include <stdexcept>
#include <string>

namespace dslite {

// Exit-code classes used by the CLI: ConfigError -> 1, DataError -> 2,
// InvariantError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public DataError {
 public:
  using DataError::DataError;
};

class FingerprintMismatch : public DataError {
 public:
  using DataError::DataError;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace dslite
