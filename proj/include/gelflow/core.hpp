// Shared scalar/vector aliases and error types.
#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <stdexcept>
#include <string>

namespace gelflow {

template <typename Scalar> using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar> using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar> using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Mat2d = Mat2<double>;
using Mat3d = Mat3<double>;
using Vec3i = Eigen::Vector3i;

// Points and free vectors share storage; the distinction lives in the
// operation names (transform_point vs transform_vector).
using Point3d = Vec3d;

// Invalid geometric configuration (degenerate rotation, particle too close, ...).
class GeometryError : public std::runtime_error {
public:
  explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

// Projection through z = 0 or outside the model's valid cone.
class ProjectionError : public std::runtime_error {
public:
  explicit ProjectionError(const std::string& what) : std::runtime_error(what) {}
};

// File parse / serialization failure.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gelflow
