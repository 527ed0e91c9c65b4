#pragma once

#include <stdexcept>
#include <string>

namespace driveclone {

// Base of every error raised by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DRIVECLONE_DEFINE_ERROR(Name)            \
  class Name : public Error {                    \
   public:                                       \
    explicit Name(const std::string& what)       \
        : Error(std::string(#Name ": ") + what) {} \
  }

DRIVECLONE_DEFINE_ERROR(MissingColumn);
DRIVECLONE_DEFINE_ERROR(MalformedRow);
DRIVECLONE_DEFINE_ERROR(NonContiguousVehicle);
DRIVECLONE_DEFINE_ERROR(InsufficientRecordings);
DRIVECLONE_DEFINE_ERROR(UnknownVehicle);
DRIVECLONE_DEFINE_ERROR(InvalidConfig);
DRIVECLONE_DEFINE_ERROR(InvalidSpawn);
DRIVECLONE_DEFINE_ERROR(EpisodeFinished);
DRIVECLONE_DEFINE_ERROR(ShapeMismatch);
DRIVECLONE_DEFINE_ERROR(EmptyDataset);
DRIVECLONE_DEFINE_ERROR(DivergedLoss);
DRIVECLONE_DEFINE_ERROR(EmptyBatch);
DRIVECLONE_DEFINE_ERROR(NoValidSpawn);
DRIVECLONE_DEFINE_ERROR(DivisionByZeroDrivers);
DRIVECLONE_DEFINE_ERROR(IoFailure);
DRIVECLONE_DEFINE_ERROR(CheckpointFormat);

#undef DRIVECLONE_DEFINE_ERROR

}  // namespace driveclone
