#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ldnhim {

// Canonical structure matrix [[0, I], [-I, 0]] of size 2n x 2n.
Eigen::MatrixXd canonical_j(int n);

// Max-norm of C J C^T - J. Throws ShapeError for odd or non-square input.
double check_symplectic(const Eigen::MatrixXd& c);

struct NamedTransform {
  std::string name;
  Eigen::MatrixXd matrix;
};

// The six linear symplectic transformations used to build coupled systems
// (three 4x4 and three 6x6). The first of each size is the reference one.
std::vector<NamedTransform> transform_catalog();

Eigen::MatrixXd reference_transform(int dof);

// Inverse of a symplectic matrix. Uses -C when C^T = -C holds; otherwise
// inverts, snapping to an integer matrix when C is integral and the snapped
// result is an exact inverse.
Eigen::MatrixXd symplectic_inverse(const Eigen::MatrixXd& c);

}  // namespace ldnhim
