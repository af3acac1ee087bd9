#pragma once

// Planar geometry for plate regions: corner quads, axis-aligned boxes,
// four-point homographies and the rectification frame.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "plateforge/error.hpp"
#include "plateforge/image.hpp"

namespace plateforge {

template <typename Scalar>
using Point = Eigen::Matrix<Scalar, 2, 1>;

using Point2d = Point<double>;

/// Corners in clockwise order starting at the top-left (image coordinates, y down).
template <typename Scalar>
struct Quad {
  Point<Scalar> tl = Point<Scalar>::Zero();
  Point<Scalar> tr = Point<Scalar>::Zero();
  Point<Scalar> br = Point<Scalar>::Zero();
  Point<Scalar> bl = Point<Scalar>::Zero();

  Quad() = default;
  Quad(const Point<Scalar>& tl_, const Point<Scalar>& tr_, const Point<Scalar>& br_, const Point<Scalar>& bl_)
      : tl(tl_), tr(tr_), br(br_), bl(bl_) {}

  static Quad from_array(const std::array<Scalar, 8>& v) {
    return {{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}};
  }
  std::array<Scalar, 8> to_array() const { return {tl.x(), tl.y(), tr.x(), tr.y(), br.x(), br.y(), bl.x(), bl.y()}; }

  const Point<Scalar>& operator[](int i) const {
    switch (i) {
      case 0: return tl;
      case 1: return tr;
      case 2: return br;
      default: return bl;
    }
  }
  Point<Scalar>& operator[](int i) { return const_cast<Point<Scalar>&>(std::as_const(*this)[i]); }

  /// Corners as the columns of a 2x4 matrix.
  Eigen::Matrix<Scalar, 2, 4> matrix() const {
    Eigen::Matrix<Scalar, 2, 4> m;
    m << tl, tr, br, bl;
    return m;
  }

  bool is_finite() const { return matrix().allFinite(); }

  /// Shoelace area; positive for the clockwise-on-screen convention.
  Scalar signed_area() const {
    Scalar acc = 0;
    for (int i = 0; i < 4; ++i) {
      const auto& a = (*this)[i];
      const auto& b = (*this)[(i + 1) % 4];
      acc += a.x() * b.y() - b.x() * a.y();
    }
    return acc / 2;
  }

  friend bool operator==(const Quad& a, const Quad& b) { return a.matrix() == b.matrix(); }
};

using Quadd = Quad<double>;

template <typename Scalar>
Quad<Scalar> axis_aligned_quad(Scalar x0, Scalar y0, Scalar x1, Scalar y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

template <typename Scalar>
struct BBox {
  Scalar x = 0, y = 0, w = 0, h = 0;

  Scalar right() const { return x + w; }
  Scalar bottom() const { return y + h; }
  Scalar area() const { return w * h; }
  Scalar diagonal() const { return std::hypot(w, h); }
  Point<Scalar> center() const { return {x + w / 2, y + h / 2}; }
  bool valid() const { return w > 0 && h > 0 && std::isfinite(x) && std::isfinite(y); }

  friend bool operator==(const BBox&, const BBox&) = default;
};

using BBoxd = BBox<double>;

/// Projective map defined up to scale. Canonical form has m(2,2) == 1 whenever
/// that entry is not negligible.
template <typename Scalar>
struct Homography {
  using Matrix = Eigen::Matrix<Scalar, 3, 3>;
  Matrix m = Matrix::Identity();

  static Homography identity() { return {}; }

  Point<Scalar> apply(const Point<Scalar>& p) const {
    const Eigen::Matrix<Scalar, 3, 1> q = m * p.homogeneous();
    return q.hnormalized();
  }

  Quad<Scalar> apply(const Quad<Scalar>& q) const { return {apply(q.tl), apply(q.tr), apply(q.br), apply(q.bl)}; }

  bool invertible() const {
    const Scalar norm = m.norm();
    if (!(norm > 0) || !m.allFinite()) return false;
    return std::abs((m / norm).determinant()) > Scalar(1e-12);
  }

  Homography inverse() const {
    if (!invertible()) throw Error(Errc::SingularSystem, "homography is not invertible");
    return Homography{m.inverse()}.canonical();
  }

  Homography canonical() const {
    Homography out = *this;
    if (std::abs(m(2, 2)) > Scalar(1e-12)) out.m /= m(2, 2);
    return out;
  }

  /// (*this) after `first`: maps p to this(first(p)).
  Homography operator*(const Homography& first) const { return Homography{m * first.m}.canonical(); }
};

using Homographyd = Homography<double>;

/// Output geometry for rectifying one plate.
struct RectifiedFrame {
  int width = 0;
  int height = 0;
  Quadd target;
};

namespace detail {

template <typename Scalar>
Scalar triangle_area(const Point<Scalar>& a, const Point<Scalar>& b, const Point<Scalar>& c) {
  const Point<Scalar> u = b - a, v = c - a;
  return std::abs(u.x() * v.y() - u.y() * v.x()) / 2;
}

}  // namespace detail

/// A quad is degenerate when it has non-finite corners or any three of its
/// corners are collinear (triangle area within `tol`).
template <typename Scalar>
bool is_degenerate(const Quad<Scalar>& q, Scalar tol = Scalar(1e-9)) {
  if (!q.is_finite()) return true;
  for (int skip = 0; skip < 4; ++skip) {
    std::array<int, 3> idx{};
    int k = 0;
    for (int i = 0; i < 4; ++i)
      if (i != skip) idx[k++] = i;
    if (detail::triangle_area(q[idx[0]], q[idx[1]], q[idx[2]]) <= tol) return true;
  }
  return false;
}

/// Four-point DLT with Hartley normalization. Maps every src corner onto the
/// matching dst corner.
template <typename Scalar>
Homography<Scalar> homography_from_quads(const Quad<Scalar>& src, const Quad<Scalar>& dst) {
  if (is_degenerate(src)) throw Error(Errc::DegenerateQuad, "source quad has collinear corners");
  if (is_degenerate(dst)) throw Error(Errc::DegenerateQuad, "destination quad has collinear corners");

  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  auto normalizer = [](const Quad<Scalar>& q) {
    const Eigen::Matrix<Scalar, 2, 4> pts = q.matrix();
    const Point<Scalar> mean = pts.rowwise().mean();
    const Scalar spread = (pts.colwise() - mean).colwise().norm().mean();
    const Scalar s = std::sqrt(Scalar(2)) / spread;
    Mat3 t;
    t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
    return t;
  };
  const Mat3 ts = normalizer(src);
  const Mat3 td = normalizer(dst);

  Eigen::Matrix<Scalar, 8, 9> a;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Matrix<Scalar, 3, 1> u = ts * src[i].homogeneous();
    const Eigen::Matrix<Scalar, 3, 1> v = td * dst[i].homogeneous();
    const Eigen::Matrix<Scalar, 1, 3> ut = u.transpose();
    a.row(2 * i) << ut, Eigen::Matrix<Scalar, 1, 3>::Zero(), -v.x() * ut;
    a.row(2 * i + 1) << Eigen::Matrix<Scalar, 1, 3>::Zero(), ut, -v.y() * ut;
  }

  const Eigen::JacobiSVD<Eigen::Matrix<Scalar, 8, 9>, Eigen::FullPivHouseholderQRPreconditioner> svd(
      a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0) || sv(7) <= sv(0) * Scalar(1e-12))
    throw Error(Errc::SingularSystem, "correspondence system is rank deficient");

  const Eigen::Matrix<Scalar, 9, 1> h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Homography<Scalar> out{td.inverse() * hn * ts};
  out = out.canonical();
  if (!out.invertible()) throw Error(Errc::SingularSystem, "solved homography is singular");
  return out;
}

/// Frame that a plate quad is rectified into: the longer of each pair of
/// opposite edges (Euclidean), rounded to whole pixels.
template <typename Scalar>
RectifiedFrame rect_target_frame(const Quad<Scalar>& q) {
  if (is_degenerate(q)) throw Error(Errc::DegenerateQuad, "cannot rectify a degenerate quad");
  const Scalar top = (q.tr - q.tl).norm();
  const Scalar bottom = (q.br - q.bl).norm();
  const Scalar left = (q.bl - q.tl).norm();
  const Scalar right = (q.br - q.tr).norm();
  const auto max_w = static_cast<long>(std::lround(static_cast<double>(std::max(top, bottom))));
  const auto max_h = static_cast<long>(std::lround(static_cast<double>(std::max(left, right))));
  if (max_w < 2 || max_h < 2)
    throw Error(Errc::TooSmall, "rectified frame " + std::to_string(max_w) + "x" + std::to_string(max_h));

  RectifiedFrame frame;
  frame.width = static_cast<int>(max_w);
  frame.height = static_cast<int>(max_h);
  frame.target = axis_aligned_quad<double>(0, 0, static_cast<double>(max_w - 1), static_cast<double>(max_h - 1));
  return frame;
}

/// Minimal axis-aligned box containing all four corners. Zero-extent boxes are rejected.
template <typename Scalar>
BBox<Scalar> enclosing_bbox(const Quad<Scalar>& q) {
  const Eigen::Matrix<Scalar, 2, 4> m = q.matrix();
  const Point<Scalar> lo = m.rowwise().minCoeff();
  const Point<Scalar> hi = m.rowwise().maxCoeff();
  BBox<Scalar> box{lo.x(), lo.y(), hi.x() - lo.x(), hi.y() - lo.y()};
  if (!(box.w > 0) || !(box.h > 0)) throw Error(Errc::DegenerateBox, "enclosing box has zero extent");
  return box;
}

template <typename Scalar>
Scalar intersection_area(const BBox<Scalar>& a, const BBox<Scalar>& b) {
  const Scalar w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const Scalar h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  return (w > 0 && h > 0) ? w * h : Scalar(0);
}

template <typename Scalar>
Scalar iou(const BBox<Scalar>& a, const BBox<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  const Scalar uni = a.area() + b.area() - inter;
  return uni > 0 ? std::clamp(inter / uni, Scalar(0), Scalar(1)) : Scalar(0);
}

/// Point-in-quad test; points on an edge count as inside.
template <typename Scalar>
bool contains(const Quad<Scalar>& q, const Point<Scalar>& p, Scalar tol = Scalar(1e-9)) {
  int winding = 0;
  for (int i = 0; i < 4; ++i) {
    const auto& a = q[i];
    const auto& b = q[(i + 1) % 4];
    const Point<Scalar> e = b - a;
    const Scalar cross = e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x());
    const Scalar len = e.norm();
    if (std::abs(cross) <= tol * std::max(len, Scalar(1))) {
      const Scalar t = e.dot(p - a);
      if (t >= -tol && t <= e.squaredNorm() + tol) return true;
    }
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && cross > 0) ++winding;
    } else if (b.y() <= p.y() && cross < 0) {
      --winding;
    }
  }
  return winding != 0;
}

/// Inverse-maps every output pixel through `h` (source -> frame) and samples
/// the source bilinearly. Samples outside the source are filled with kGray.
Image warp_image(const Image& img, const Homographyd& h, const RectifiedFrame& out);

/// Same as warp_image but into an arbitrary output size.
Image warp_image(const Image& img, const Homographyd& h, int out_width, int out_height, Rgb fill = kGray);

/// Convenience: frame + homography for a plate quad, then the warp.
Image rectify(const Image& img, const Quadd& plate);

}  // namespace plateforge
