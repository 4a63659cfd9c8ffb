#pragma once

#include <stdexcept>
#include <string>

namespace mll {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failures map to CLI exit code 3, configuration failures to 2.
struct NumericalError : Error { using Error::Error; };

struct DegenerateKernel : NumericalError { using NumericalError::NumericalError; };
struct InvalidBranch : Error { using Error::Error; };
struct ZeroFrequency : Error { using Error::Error; };
struct ZeroEigenvalue : NumericalError { using NumericalError::NumericalError; };
struct GridMismatch : Error { using Error::Error; };
struct StepTooLarge : Error { using Error::Error; };
struct UnderResolved : NumericalError { using NumericalError::NumericalError; };
struct Blowup : NumericalError { using NumericalError::NumericalError; };
struct DegenerateFit : NumericalError { using NumericalError::NumericalError; };
struct SweepFailed : NumericalError { using NumericalError::NumericalError; };
struct ResidualMismatch : NumericalError { using NumericalError::NumericalError; };
struct ConfigError : Error { using Error::Error; };

}  // namespace mll
