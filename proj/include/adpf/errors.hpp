#pragma once

#include <stdexcept>
#include <string>

namespace adpf {

// Every failure raised by the library derives from Error so callers can
// catch one type; the subclasses mirror the failure kinds the CLI maps to
// exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ADPF_DEFINE_ERROR(Name)              \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(#Name ": " + what) {}        \
  }

ADPF_DEFINE_ERROR(ShapeMismatch);
ADPF_DEFINE_ERROR(DomainError);
ADPF_DEFINE_ERROR(NotScalar);
ADPF_DEFINE_ERROR(ChannelSplitError);
ADPF_DEFINE_ERROR(TooFewMaps);
ADPF_DEFINE_ERROR(AllNonPositive);
ADPF_DEFINE_ERROR(NotADistribution);
ADPF_DEFINE_ERROR(OutOfRange);
ADPF_DEFINE_ERROR(DegenerateMap);
ADPF_DEFINE_ERROR(PatchCountMismatch);
ADPF_DEFINE_ERROR(EmptyInput);
ADPF_DEFINE_ERROR(SpecInvalid);
ADPF_DEFINE_ERROR(FormatError);
ADPF_DEFINE_ERROR(IoError);
ADPF_DEFINE_ERROR(MissingCheckpoint);
ADPF_DEFINE_ERROR(ConfigError);
ADPF_DEFINE_ERROR(NumericalFailure);

#undef ADPF_DEFINE_ERROR

}  // namespace adpf
