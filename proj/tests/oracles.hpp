// Brute-force reference implementations the fast paths are checked against.
// These favor directness over speed and deliberately avoid the library's
// accelerated code paths.
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace oracles {

// Image-space distance from the projected sphere center to the farthest point
// of the sphere's silhouette. The silhouette is the projection of the horizon
// circle {q : |q - c| = R, q . (q - c) = 0}; that circle is sampled densely
// and the best sample refined by golden-section search. No closed-form
// trigonometry from the production path is reused.
inline double silhouette_radius(double focal, const Eigen::Vector2d& principal,
                                const Eigen::Vector3d& c, double R) {
  const double d = c.norm();
  const double k = (R * R) / (d * d);
  const Eigen::Vector3d horizon_center = c * (1.0 - k);
  const double horizon_radius = R * std::sqrt(1.0 - k);

  const Eigen::Vector3d axis = c / d;
  Eigen::Vector3d seed(c.x(), c.y(), 0.0);
  if (seed.norm() < 1e-12) seed = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d e1 = (seed - seed.dot(axis) * axis).normalized();
  const Eigen::Vector3d e2 = axis.cross(e1);

  const auto project = [&](const Eigen::Vector3d& q) {
    return Eigen::Vector2d(focal * q.x() / q.z() + principal.x(),
                           focal * q.y() / q.z() + principal.y());
  };
  const Eigen::Vector2d pc = project(c);
  const auto dist_at = [&](double theta) {
    const Eigen::Vector3d q = horizon_center +
        horizon_radius * (std::cos(theta) * e1 + std::sin(theta) * e2);
    return (project(q) - pc).norm();
  };

  const int samples = 4096;
  double best_theta = 0.0, best = -1.0;
  for (int i = 0; i < samples; ++i) {
    const double theta = 2.0 * M_PI * i / samples;
    const double v = dist_at(theta);
    if (v > best) { best = v; best_theta = theta; }
  }

  // Golden-section refinement of the bracketed maximum.
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = best_theta - 2.0 * M_PI / samples;
  double b = best_theta + 2.0 * M_PI / samples;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = dist_at(x1), f2 = dist_at(x2);
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + gr * (b - a); f2 = dist_at(x2);
    } else {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - gr * (b - a); f1 = dist_at(x1);
    }
  }
  return std::max({best, f1, f2});
}

// Indices of the k nearest nodes by linear scan.
inline std::vector<int> knn_linear(const std::vector<Eigen::Vector3d>& nodes,
                                   const Eigen::Vector3d& query, int k) {
  std::vector<int> idx(nodes.size());
  std::iota(idx.begin(), idx.end(), 0);
  const int kk = std::min<int>(k, static_cast<int>(nodes.size()));
  std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(),
                    [&](int a, int b) {
                      return (nodes[a] - query).squaredNorm() <
                             (nodes[b] - query).squaredNorm();
                    });
  idx.resize(kk);
  return idx;
}

// All-pairs occlusion: particle i is hidden iff some strictly closer particle's
// occluding circle covers i's projected center. Inputs are already projected.
inline std::vector<bool> occlusion_all_pairs(
    const std::vector<Eigen::Vector2d>& pixels,
    const std::vector<double>& radii, const std::vector<double>& depths) {
  const std::size_t n = pixels.size();
  std::vector<bool> visible(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || depths[j] >= depths[i]) continue;
      if ((pixels[i] - pixels[j]).norm() <= radii[j]) {
        visible[i] = false;
        break;
      }
    }
  }
  return visible;
}

}  // namespace oracles
