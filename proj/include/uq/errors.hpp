#pragma once

#include <stdexcept>
#include <string>

namespace uq {

// Root of every error raised by the library. The three intermediate
// categories map onto the CLI exit codes (config 2, inference 3, io 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InferenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

#define UQ_DEFINE_ERROR(Name, Base)                                  \
  class Name : public Base {                                         \
   public:                                                           \
    explicit Name(const std::string& what) : Base(#Name ": " + what) {} \
  };

// autodiff
UQ_DEFINE_ERROR(NonFiniteValue, InferenceError)
UQ_DEFINE_ERROR(UnregisteredOp, ConfigError)
UQ_DEFINE_ERROR(OrderTooHigh, ConfigError)

// surrogates / models
UQ_DEFINE_ERROR(DimensionMismatch, ConfigError)
UQ_DEFINE_ERROR(ShapeMismatch, ConfigError)
UQ_DEFINE_ERROR(WeightsFileMissing, IoError)
UQ_DEFINE_ERROR(FamilyMismatch, ConfigError)
UQ_DEFINE_ERROR(DuplicateProcessKey, ConfigError)
UQ_DEFINE_ERROR(UnknownProcessKey, ConfigError)
UQ_DEFINE_ERROR(EmptyDataset, ConfigError)
UQ_DEFINE_ERROR(RaggedSensors, ConfigError)

// inference
UQ_DEFINE_ERROR(ZeroAcceptance, InferenceError)
UQ_DEFINE_ERROR(DivergedElbo, InferenceError)
UQ_DEFINE_ERROR(MemberDiverged, InferenceError)
UQ_DEFINE_ERROR(NonPositiveCurvature, InferenceError)

// statistics
UQ_DEFINE_ERROR(EmptySamples, InferenceError)
UQ_DEFINE_ERROR(ZeroReference, InferenceError)
UQ_DEFINE_ERROR(ZeroVariance, InferenceError)
UQ_DEFINE_ERROR(EmptyCalibrationSet, InferenceError)

// problems
UQ_DEFINE_ERROR(UnknownProblem, ConfigError)
UQ_DEFINE_ERROR(NonFiniteState, InferenceError)

#undef UQ_DEFINE_ERROR

}  // namespace uq
