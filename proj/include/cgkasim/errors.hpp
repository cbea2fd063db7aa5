#pragma once

#include <stdexcept>
#include <string>

namespace cgkasim {

// Common base so callers can catch anything thrown by this library.
struct Error : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct InvalidParameterError : Error
{
  using Error::Error;
};

///
/// Crypto
///

struct DecapError : Error
{
  using Error::Error;
};

struct AeadError : Error
{
  using Error::Error;
};

struct SignatureError : Error
{
  using Error::Error;
};

///
/// Encoding
///

struct DecodeError : Error
{
  using Error::Error;
};

///
/// Group operations
///

struct WrongEpoch : Error
{
  WrongEpoch(uint64_t expected_in, uint64_t got_in, const std::string& what)
    : Error(what)
    , expected(expected_in)
    , got(got_in)
  {
  }

  uint64_t expected;
  uint64_t got;
};

struct BadSignature : Error
{
  using Error::Error;
};

struct BadConfirmationTag : Error
{
  using Error::Error;
};

struct UnableToDecrypt : Error
{
  using Error::Error;
};

struct StaleProposal : Error
{
  using Error::Error;
};

struct InvalidProposal : Error
{
  using Error::Error;
};

struct PendingMismatch : Error
{
  using Error::Error;
};

struct NotForMe : Error
{
  using Error::Error;
};

struct BadTree : Error
{
  using Error::Error;
};

struct BadGroupInfo : Error
{
  using Error::Error;
};

struct ExternalJoinsDisabled : Error
{
  using Error::Error;
};

struct OpenError : Error
{
  using Error::Error;
};

///
/// Delivery
///

struct NotConnected : Error
{
  using Error::Error;
};

struct DuplicateUser : Error
{
  using Error::Error;
};

struct NotFound : Error
{
  using Error::Error;
};

struct GroupInfoNotFound : Error
{
  using Error::Error;
};

///
/// Simulation
///

struct DeadlockError : Error
{
  using Error::Error;
};

///
/// Configuration
///

struct ConfigError : Error
{
  using Error::Error;
};

struct UnknownKey : ConfigError
{
  using ConfigError::ConfigError;
};

struct MissingKey : ConfigError
{
  using ConfigError::ConfigError;
};

struct BadValue : ConfigError
{
  using ConfigError::ConfigError;
};

///
/// Metrics
///

struct BadArity : Error
{
  using Error::Error;
};

struct DegenerateSeries : Error
{
  using Error::Error;
};

struct IncompatibleRuns : Error
{
  using Error::Error;
};

struct BadLine : Error
{
  using Error::Error;
};

struct IoError : Error
{
  using Error::Error;
};

} // namespace cgkasim
