#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace sweep {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy used across the library.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct PreconditionViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace sweep
