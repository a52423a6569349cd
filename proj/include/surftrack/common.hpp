#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace surftrack {

/// N x 3 vertex coordinates, one row per vertex. Row-major so that the
/// flattened storage is the interleaved (x0, y0, z0, x1, ...) solver vector.
using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, violated preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure that the caller cannot recover from locally.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Every anchor of the template left the input image.
class SurfaceLostError : public Error {
 public:
  SurfaceLostError() : Error("surface left the image") {}
};

}  // namespace surftrack
