#pragma once

#include <Eigen/Dense>
#include <complex>

namespace rwmp {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

struct HermitianEigen {
  RealVector eigenvalues;      // ascending
  ComplexMatrix eigenvectors;  // columns
};

struct SymmetricEigen {
  RealVector eigenvalues;
  RealMatrix eigenvectors;
};

HermitianEigen eig_hermitian(const ComplexMatrix& h);
SymmetricEigen eig_symmetric(const RealMatrix& h);

// exp(factor * h) for Hermitian h, via eigendecomposition.
ComplexMatrix hermitian_exp(const ComplexMatrix& h, Complex factor);

// Largest |H v - E v| over the reported pairs; oracle residual check.
double eigen_residual(const ComplexMatrix& h, const HermitianEigen& sys);

}  // namespace rwmp
