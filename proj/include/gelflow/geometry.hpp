// Rigid transforms and the reference pinhole camera.
//
// Depth convention: the scene sits on the same side of the image plane as the
// sign of the focal length. The canonical tactile rig uses f < 0 with the gel
// at z < 0, so image u grows with +x and v with +y without an extra flip.
#pragma once

#include <cmath>
#include <stdexcept>

#include "gelflow/core.hpp"

namespace gelflow {

template <typename Scalar>
struct RigidTransform {
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
  Vec3<Scalar> translation = Vec3<Scalar>::Zero();

  static RigidTransform identity() { return {}; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }

  // Composition: (a * b) maps p to a(b(p)).
  RigidTransform operator*(const RigidTransform& rhs) const {
    RigidTransform out;
    out.rotation = rotation * rhs.rotation;
    out.translation = rotation * rhs.translation + translation;
    return out;
  }
};

using RigidTransformd = RigidTransform<double>;

template <typename Scalar>
bool is_rigid(const RigidTransform<Scalar>& t, Scalar tol = Scalar(1e-9)) {
  const Mat3<Scalar> gram = t.rotation.transpose() * t.rotation;
  const Scalar ortho = (gram - Mat3<Scalar>::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(t.rotation.determinant() - Scalar(1)) <= tol;
}

template <typename Scalar>
void validate_rigid(const RigidTransform<Scalar>& t, Scalar tol = Scalar(1e-9)) {
  if (!is_rigid(t, tol))
    throw GeometryError("rotation is not orthonormal with det +1");
}

template <typename Scalar>
Vec3<Scalar> transform_point(const RigidTransform<Scalar>& t, const Vec3<Scalar>& p) {
  return t.rotation * p + t.translation;
}

template <typename Scalar>
Vec3<Scalar> transform_vector(const RigidTransform<Scalar>& t, const Vec3<Scalar>& v) {
  return t.rotation * v;
}

template <typename Scalar>
struct PinholeCamera {
  Scalar focal = Scalar(0);              // px; negative in the canonical rig
  Vec2<Scalar> center = Vec2<Scalar>::Zero();    // px
  Vec2<Scalar> image_size = Vec2<Scalar>::Zero();  // (width, height) px
};

using PinholeCamerad = PinholeCamera<double>;

template <typename Scalar>
void validate_camera(const PinholeCamera<Scalar>& cam) {
  if (cam.focal == Scalar(0)) throw GeometryError("zero focal length");
  if (cam.image_size.x() <= Scalar(0) || cam.image_size.y() <= Scalar(0))
    throw GeometryError("non-positive image size");
  if (cam.center.x() < Scalar(0) || cam.center.x() > cam.image_size.x() ||
      cam.center.y() < Scalar(0) || cam.center.y() > cam.image_size.y())
    throw GeometryError("principal point outside the image");
}

// Focal length that makes a gel_extent-wide plane at depth |t_z| span
// image_px pixels exactly. Carries the sign of t_z.
template <typename Scalar>
Scalar default_focal(Scalar t_z, Scalar image_px = Scalar(440),
                     Scalar gel_extent_mm = Scalar(30)) {
  if (gel_extent_mm == Scalar(0)) throw std::invalid_argument("zero gel extent");
  return image_px / gel_extent_mm * t_z;
}

template <typename Scalar>
void check_projectable(const PinholeCamera<Scalar>& cam, const Vec3<Scalar>& s) {
  if (s.z() == Scalar(0)) throw ProjectionError("point on the image plane (z = 0)");
  if (s.z() * cam.focal < Scalar(0))
    throw ProjectionError("point behind the camera for this focal convention");
}

template <typename Scalar>
Vec2<Scalar> pinhole_project(const PinholeCamera<Scalar>& cam, const Vec3<Scalar>& s) {
  check_projectable(cam, s);
  return Vec2<Scalar>(cam.focal * s.x() / s.z() + cam.center.x(),
                      cam.focal * s.y() / s.z() + cam.center.y());
}

// Pixel displacement of a moving point: difference of the projections at the
// displaced and rest locations (the rest depth stays in the second term).
template <typename Scalar>
Vec2<Scalar> pinhole_project_pair(const PinholeCamera<Scalar>& cam,
                                  const Vec3<Scalar>& s, const Vec3<Scalar>& ds) {
  return pinhole_project(cam, Vec3<Scalar>(s + ds)) - pinhole_project(cam, s);
}

// Back-projects a pixel onto the plane z = z_plane.
template <typename Scalar>
Vec3<Scalar> invert_pinhole(const PinholeCamera<Scalar>& cam,
                            const Vec2<Scalar>& pixel, Scalar z_plane) {
  if (z_plane == Scalar(0)) throw ProjectionError("back-projection plane at z = 0");
  if (z_plane * cam.focal < Scalar(0))
    throw ProjectionError("back-projection plane behind the camera");
  return Vec3<Scalar>(z_plane * (pixel.x() - cam.center.x()) / cam.focal,
                      z_plane * (pixel.y() - cam.center.y()) / cam.focal, z_plane);
}

// Image radius of the occluding circle of a sphere (center s, radius R).
//
// In the plane spanned by the optical axis and the ray to the center, the
// grazing ray on the far-from-axis side touches the sphere at elevation
// gamma = alpha - beta; the projected distance between that tangent point and
// the sphere center bounds the sphere's silhouette from the projected center.
template <typename Scalar>
Scalar particle_projected_radius(const PinholeCamera<Scalar>& cam,
                                 const Vec3<Scalar>& s, Scalar radius) {
  if (radius <= Scalar(0)) throw std::invalid_argument("non-positive sphere radius");
  check_projectable(cam, s);
  const Scalar xt = std::hypot(s.x(), s.y());
  // Mirror to the z < 0 convention; the silhouette radius is symmetric in z.
  const Scalar zn = -std::abs(s.z());
  const Scalar dist = std::hypot(xt, zn);
  if (dist <= radius)
    throw GeometryError("sphere reaches the camera center (arcsin argument >= 1)");
  const Scalar alpha = std::atan2(-zn, xt);
  const Scalar beta = std::asin(radius / dist);
  const Scalar gamma = alpha - beta;
  const Scalar xr = xt + radius * std::sin(gamma);
  const Scalar zr = zn + radius * std::cos(gamma);
  if (zr == Scalar(0)) throw GeometryError("grazing point on the image plane");
  return std::abs(cam.focal * (xr / zr - xt / zn));
}

}  // namespace gelflow
