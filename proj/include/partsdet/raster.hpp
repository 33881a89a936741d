#ifndef PARTSDET_RASTER_HPP
#define PARTSDET_RASTER_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "partsdet/errors.hpp"
#include "partsdet/regions.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

inline double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew monotone chain; returns hull in counter-clockwise order for the
// y-down pixel coordinate system. Collinear inputs collapse to <= 2 points.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point& a, const Point& b) {
                          return a.x == b.x && a.y == b.y;
                        }),
            pts.end());
  const size_t n = pts.size();
  if (n <= 2) return pts;
  std::vector<Point> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {  // lower
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

namespace detail {

inline void plot(GridU8& g, int x, int y) {
  if (x >= 0 && x < g.w && y >= 0 && y < g.h) g.at(y, x) = 1;
}

// Liang-Barsky clip of a segment against the canvas rectangle
// [-0.5, w-0.5] x [-0.5, h-0.5]; returns false when fully outside.
inline bool clip_segment(double& x0, double& y0, double& x1, double& y1,
                         int h, int w) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = x1 - x0, dy = y1 - y0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {x0 + 0.5, (w - 0.5) - x0, y0 + 0.5, (h - 0.5) - y0};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
    } else {
      const double r = q[i] / p[i];
      if (p[i] < 0.0) {
        if (r > t1) return false;
        if (r > t0) t0 = r;
      } else {
        if (r < t0) return false;
        if (r < t1) t1 = r;
      }
    }
  }
  const double nx0 = x0 + t0 * dx, ny0 = y0 + t0 * dy;
  const double nx1 = x0 + t1 * dx, ny1 = y0 + t1 * dy;
  x0 = nx0; y0 = ny0; x1 = nx1; y1 = ny1;
  return true;
}

inline void bresenham(GridU8& g, double fx0, double fy0, double fx1,
                      double fy1) {
  if (!clip_segment(fx0, fy0, fx1, fy1, g.h, g.w)) return;
  int x0 = (int)std::lround(fx0), y0 = (int)std::lround(fy0);
  int x1 = (int)std::lround(fx1), y1 = (int)std::lround(fy1);
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    plot(g, x0, y0);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) { err += dy; x0 += sx; }
    if (e2 <= dx) { err += dx; y0 += sy; }
  }
}

}  // namespace detail

// 1-pixel polyline through consecutive points, clipped to the canvas.
inline GridU8 rasterize_polyline(const std::vector<Point>& pts, int h, int w) {
  GridU8 g(h, w, 0);
  if (pts.size() == 1) {
    detail::plot(g, (int)std::lround(pts[0].x), (int)std::lround(pts[0].y));
    return g;
  }
  for (size_t i = 0; i + 1 < pts.size(); ++i)
    detail::bresenham(g, pts[i].x, pts[i].y, pts[i + 1].x, pts[i + 1].y);
  return g;
}

// Filled convex hull: integer pixel centers inside or on the hull are set.
// Degenerate hulls (collinear or coincident points) fall back to the
// polyline rasterization of the hull itself.
inline GridU8 rasterize_hull(const std::vector<Point>& pts, int h, int w) {
  const std::vector<Point> hull = convex_hull(pts);
  if (hull.size() <= 2) return rasterize_polyline(hull, h, w);

  GridU8 g(h, w, 0);
  double minx = hull[0].x, maxx = hull[0].x;
  double miny = hull[0].y, maxy = hull[0].y;
  for (const Point& p : hull) {
    minx = std::min(minx, p.x); maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y); maxy = std::max(maxy, p.y);
  }
  const int x0 = std::max(0, (int)std::ceil(minx));
  const int x1 = std::min(w - 1, (int)std::floor(maxx));
  const int y0 = std::max(0, (int)std::ceil(miny));
  const int y1 = std::min(h - 1, (int)std::floor(maxy));
  const size_t m = hull.size();
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Point p{double(x), double(y)};
      bool inside = true;
      for (size_t i = 0; i < m && inside; ++i) {
        if (cross(hull[i], hull[(i + 1) % m], p) < 0) inside = false;
      }
      if (inside) g.at(y, x) = 1;
    }
  }
  return g;
}

inline GridU8 rasterize_region(const std::vector<Point>& pts, RegionId region,
                               int h, int w) {
  if (pts.empty()) throw input_error("rasterize_region: empty point list");
  if (h <= 0 || w <= 0)
    throw invalid_parameter_error("rasterize_region: canvas must be positive");
  if (region == RegionId::Chin) return rasterize_polyline(pts, h, w);
  return rasterize_hull(pts, h, w);
}

}  // namespace partsdet

#endif
