#ifndef POPDYN_ERRORS_HPP
#define POPDYN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace popdyn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidParam : Error { using Error::Error; };
struct NonFiniteRate : Error { using Error::Error; };
struct RateOverflow : Error { using Error::Error; };
struct ExplosionGuard : Error { using Error::Error; };
struct ConstantMissing : Error { using Error::Error; };
struct DriftConditionViolated : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct Blowup : Error { using Error::Error; };
struct CeilingExceeded : Error { using Error::Error; };
struct StepUnderflow : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct DegenerateFit : Error { using Error::Error; };
struct NegativeCount : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace popdyn

#endif
