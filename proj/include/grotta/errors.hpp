#pragma once

#include <stdexcept>
#include <string>

namespace grotta {

// Root of every error the library throws. Callers that only need a
// diagnostic can catch this; tests match on the concrete subclasses.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define GROTTA_DEFINE_ERROR(Name)                                              \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string &what) : Error(#Name ": " + what) {}       \
  }

// numerics
GROTTA_DEFINE_ERROR(SingularMatrix);
GROTTA_DEFINE_ERROR(InvalidParameter);
GROTTA_DEFINE_ERROR(ShapeMismatch);

// normalization / model
GROTTA_DEFINE_ERROR(DegenerateBatch);
GROTTA_DEFINE_ERROR(StaleCache);
GROTTA_DEFINE_ERROR(UninitializedSource);
GROTTA_DEFINE_ERROR(EmptyDataset);

// memory bank
GROTTA_DEFINE_ERROR(InvalidClass);
GROTTA_DEFINE_ERROR(EmptyBank);

// adaptation / refinement
GROTTA_DEFINE_ERROR(EmptyBatch);
GROTTA_DEFINE_ERROR(TooFewSamples);

// streams and data files
GROTTA_DEFINE_ERROR(EmptyClassPool);
GROTTA_DEFINE_ERROR(InvalidDistribution);
GROTTA_DEFINE_ERROR(TooFewDistributions);
GROTTA_DEFINE_ERROR(ParseError);
GROTTA_DEFINE_ERROR(EmptyFile);
GROTTA_DEFINE_ERROR(NonNumericFeature);

// harness
GROTTA_DEFINE_ERROR(ConfigError);
GROTTA_DEFINE_ERROR(CheckpointMissing);
GROTTA_DEFINE_ERROR(UnknownMethod);
GROTTA_DEFINE_ERROR(IoError);

#undef GROTTA_DEFINE_ERROR

} // namespace grotta
