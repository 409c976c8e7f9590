#include "rwmp/linalg.hpp"

#include <stdexcept>

namespace rwmp {

HermitianEigen eig_hermitian(const ComplexMatrix& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("eig_hermitian: not square");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eig_hermitian: solver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

SymmetricEigen eig_symmetric(const RealMatrix& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("eig_symmetric: not square");
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eig_symmetric: solver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

ComplexMatrix hermitian_exp(const ComplexMatrix& h, Complex factor) {
  HermitianEigen sys = eig_hermitian(h);
  ComplexVector phases(sys.eigenvalues.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i)
    phases[i] = std::exp(factor * sys.eigenvalues[i]);
  return sys.eigenvectors * phases.asDiagonal() * sys.eigenvectors.adjoint();
}

double eigen_residual(const ComplexMatrix& h, const HermitianEigen& sys) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < sys.eigenvalues.size(); ++i) {
    const auto v = sys.eigenvectors.col(i);
    worst = std::max(worst, (h * v - sys.eigenvalues[i] * v).norm());
  }
  return worst;
}

}  // namespace rwmp
