#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>

namespace gridloop {

using Vec  = Eigen::VectorXd;
using Mat  = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Complex = std::complex<double>;

} // namespace gridloop
