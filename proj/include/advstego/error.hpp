#pragma once

#include <stdexcept>
#include <string>

namespace advstego {

// Base class for every error raised by the library. The CLI maps these to
// exit status 1; anything else escaping a subcommand is a bug.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
  using Error::Error;
};

// Malformed or unsupported file content (WAV header, model file, manifest).
class FormatError : public Error {
public:
  using Error::Error;
};

class RangeError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

class ChecksumError : public FormatError {
public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
public:
  using FormatError::FormatError;
};

class AlphabetError : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

// Target cannot be aligned to the available frames under CTC rules.
class InfeasibleTarget : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

class NonFiniteGradient : public Error {
public:
  using Error::Error;
};

class TrainingDiverged : public Error {
public:
  using Error::Error;
};

}  // namespace advstego
