#include "ldnhim/symplectic.hpp"

#include <cmath>

#include "ldnhim/errors.hpp"

namespace ldnhim {

namespace {

bool is_integral(const Eigen::MatrixXd& m) {
  return (m.array() == m.array().round()).all();
}

// Rows of the transform below the [0 | I] block, written as (-I | M).
Eigen::MatrixXd from_lower_block(const Eigen::MatrixXd& m) {
  const auto n = m.rows();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  c.block(0, n, n, n) = Eigen::MatrixXd::Identity(n, n);
  c.block(n, 0, n, n) = -Eigen::MatrixXd::Identity(n, n);
  c.block(n, n, n, n) = m;
  return c;
}

}  // namespace

Eigen::MatrixXd canonical_j(int n) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  j.block(0, n, n, n) = Eigen::MatrixXd::Identity(n, n);
  j.block(n, 0, n, n) = -Eigen::MatrixXd::Identity(n, n);
  return j;
}

double check_symplectic(const Eigen::MatrixXd& c) {
  if (c.rows() != c.cols() || c.rows() % 2 != 0 || c.rows() == 0) {
    throw ShapeError("symplectic check needs a non-empty square matrix of even order");
  }
  const Eigen::MatrixXd j = canonical_j(static_cast<int>(c.rows() / 2));
  return (c * j * c.transpose() - j).cwiseAbs().maxCoeff();
}

std::vector<NamedTransform> transform_catalog() {
  Eigen::MatrixXd a2(2, 2), b2(2, 2), c2(2, 2);
  a2 << 1, 1, 1, 1;
  b2 << 1, 0, 0, 1;
  c2 << 0, 1, 1, 0;
  Eigen::MatrixXd a3(3, 3), b3(3, 3), c3(3, 3);
  a3 << 1, 1, 1, 1, 1, 1, 1, 1, 1;
  b3 = Eigen::MatrixXd::Identity(3, 3);
  c3 << 0, 1, 1, 1, 0, 1, 1, 1, 0;
  return {{"dof2-a", from_lower_block(a2)}, {"dof2-b", from_lower_block(b2)},
          {"dof2-c", from_lower_block(c2)}, {"dof3-a", from_lower_block(a3)},
          {"dof3-b", from_lower_block(b3)}, {"dof3-c", from_lower_block(c3)}};
}

Eigen::MatrixXd reference_transform(int dof) {
  if (dof == 2) return transform_catalog()[0].matrix;
  if (dof == 3) return transform_catalog()[3].matrix;
  throw ShapeError("reference transform exists only for 2 or 3 degrees of freedom");
}

Eigen::MatrixXd symplectic_inverse(const Eigen::MatrixXd& c) {
  if ((c.transpose() + c).cwiseAbs().maxCoeff() == 0.0) return -c;
  Eigen::MatrixXd inv = c.fullPivLu().inverse();
  if (is_integral(c)) {
    Eigen::MatrixXd snapped = inv.array().round().matrix();
    const auto n = c.rows();
    if ((c * snapped - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() == 0.0) {
      return snapped;
    }
  }
  return inv;
}

}  // namespace ldnhim
