#pragma once

#include <stdexcept>
#include <string>

namespace selo {

// Every error raised by the library carries a stable machine-readable code
// next to the human message; the CLI prints both.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define SELO_DEFINE_ERROR(Name)                                       \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

SELO_DEFINE_ERROR(ContractViolation);
SELO_DEFINE_ERROR(DecideAfterStop);
SELO_DEFINE_ERROR(SafeSetEmpty);
SELO_DEFINE_ERROR(TraceExhausted);
SELO_DEFINE_ERROR(ParseError);
SELO_DEFINE_ERROR(GapError);
SELO_DEFINE_ERROR(Infeasible);
SELO_DEFINE_ERROR(MaxIter);
SELO_DEFINE_ERROR(DimensionTooLarge);
SELO_DEFINE_ERROR(ModeMismatch);
SELO_DEFINE_ERROR(ConfigInvalid);
SELO_DEFINE_ERROR(MissingOracle);

#undef SELO_DEFINE_ERROR

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace selo
