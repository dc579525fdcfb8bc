#pragma once

#include <stdexcept>
#include <string>

namespace gddsg {

// Root of every error raised by the library. The CLI maps all of these to
// exit code 2; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define GDDSG_DEFINE_ERROR(Name, Base, tag)                        \
  class Name : public Base {                                       \
   public:                                                         \
    using Base::Base;                                              \
    const char* kind() const noexcept override { return tag; }     \
  };

GDDSG_DEFINE_ERROR(ArgumentError, Error, "argument")
GDDSG_DEFINE_ERROR(StateError, Error, "state")
GDDSG_DEFINE_ERROR(AssignmentError, Error, "assignment")
GDDSG_DEFINE_ERROR(ConsistencyError, Error, "consistency")
GDDSG_DEFINE_ERROR(NumericError, Error, "numeric")
GDDSG_DEFINE_ERROR(DomainError, Error, "domain")
GDDSG_DEFINE_ERROR(IoError, Error, "io")
GDDSG_DEFINE_ERROR(MissingFileError, IoError, "missing_file")
GDDSG_DEFINE_ERROR(VersionError, Error, "version")

// Binary container errors (GDE1 / GDM1).
GDDSG_DEFINE_ERROR(FormatError, Error, "format")
GDDSG_DEFINE_ERROR(BadMagicError, FormatError, "bad_magic")
GDDSG_DEFINE_ERROR(TruncatedError, FormatError, "truncated")
GDDSG_DEFINE_ERROR(NonFiniteError, FormatError, "non_finite")
GDDSG_DEFINE_ERROR(DimensionMismatchError, FormatError, "dimension_mismatch")

// Task-manifest validation errors.
GDDSG_DEFINE_ERROR(ManifestError, Error, "manifest")
GDDSG_DEFINE_ERROR(DisjointnessError, ManifestError, "disjointness")
GDDSG_DEFINE_ERROR(ContiguityError, ManifestError, "contiguity")

#undef GDDSG_DEFINE_ERROR

}  // namespace gddsg
