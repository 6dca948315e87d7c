// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace delaytk {

// Matrix exponential by scaling and squaring with Pade approximants
// (degrees 3..13, backward-error thresholds for double precision).
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);
Eigen::MatrixXcd expm(const Eigen::MatrixXcd& a);

}  // namespace delaytk
