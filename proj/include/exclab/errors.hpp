#pragma once

#include <stdexcept>
#include <string>

namespace exclab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define EXCLAB_DEFINE_ERROR(Name)                       \
  struct Name : Error {                                 \
    explicit Name(const std::string& m)                 \
        : Error(std::string(#Name) + ": " + m) {}       \
  };

EXCLAB_DEFINE_ERROR(EmbeddingNotPSD)
EXCLAB_DEFINE_ERROR(MismatchedGrids)
EXCLAB_DEFINE_ERROR(DegenerateConstraintSet)
EXCLAB_DEFINE_ERROR(DegenerateCovariance)
EXCLAB_DEFINE_ERROR(DegenerateVariance)
EXCLAB_DEFINE_ERROR(DomainOutsideGrid)
EXCLAB_DEFINE_ERROR(BadScale)
EXCLAB_DEFINE_ERROR(BufferTooSmall)
EXCLAB_DEFINE_ERROR(LevelAtCriticalValue)
EXCLAB_DEFINE_ERROR(NotStabilized)
EXCLAB_DEFINE_ERROR(ConfigInvalid)
EXCLAB_DEFINE_ERROR(IoError)
EXCLAB_DEFINE_ERROR(MissingOutputs)

#undef EXCLAB_DEFINE_ERROR

}  // namespace exclab
