#pragma once

#include <stdexcept>
#include <string>

namespace glucorl {

// Base of every error raised by the library. Each subclass names one failure
// condition so callers (and the CLI exit-code mapping) can dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GLUCORL_DEFINE_ERROR(Name)        \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

GLUCORL_DEFINE_ERROR(NumericalBlowup)
GLUCORL_DEFINE_ERROR(InsufficientHistory)
GLUCORL_DEFINE_ERROR(InvalidAction)
GLUCORL_DEFINE_ERROR(ShapeMismatch)
GLUCORL_DEFINE_ERROR(NonFiniteGradient)
GLUCORL_DEFINE_ERROR(InsufficientSamples)
GLUCORL_DEFINE_ERROR(IndexOutOfRange)
GLUCORL_DEFINE_ERROR(NonContiguousWindow)
GLUCORL_DEFINE_ERROR(EmptyTrace)
GLUCORL_DEFINE_ERROR(TraceTooShort)
GLUCORL_DEFINE_ERROR(UnpairedInput)
GLUCORL_DEFINE_ERROR(ConfigError)
GLUCORL_DEFINE_ERROR(MissingInput)
GLUCORL_DEFINE_ERROR(FormatError)

#undef GLUCORL_DEFINE_ERROR

}  // namespace glucorl
