#pragma once

#include <stdexcept>
#include <string>

namespace levybsde {

// Base for all numeric/domain failures raised by the library. `code()` is a
// stable machine-readable tag that the CLI maps to exit statuses.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define LEVYBSDE_ERROR_TYPE(Name)                                   \
    class Name : public Error {                                     \
    public:                                                         \
        explicit Name(const std::string& what) : Error(#Name, what) {} \
    }

LEVYBSDE_ERROR_TYPE(DivergentIntegral);
LEVYBSDE_ERROR_TYPE(InfiniteMass);
LEVYBSDE_ERROR_TYPE(SlowDecay);
LEVYBSDE_ERROR_TYPE(QuadratureFailure);
LEVYBSDE_ERROR_TYPE(NonFiniteState);
LEVYBSDE_ERROR_TYPE(GridMismatch);
LEVYBSDE_ERROR_TYPE(SingularRegression);
LEVYBSDE_ERROR_TYPE(NonConvergence);
LEVYBSDE_ERROR_TYPE(ContractionStall);
LEVYBSDE_ERROR_TYPE(CflViolation);
LEVYBSDE_ERROR_TYPE(TridiagonalSingular);
LEVYBSDE_ERROR_TYPE(IllConditionedDerivative);
LEVYBSDE_ERROR_TYPE(EstimatorUnavailable);
LEVYBSDE_ERROR_TYPE(NoConvergence);
LEVYBSDE_ERROR_TYPE(ConfigError);
LEVYBSDE_ERROR_TYPE(UnknownName);

#undef LEVYBSDE_ERROR_TYPE

} // namespace levybsde
