#pragma once

// Planar geometry for stand delineation: Delaunay triangulation, alpha
// shapes, convex hull, point-in-polygon and buffered containment.

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace rotmap::geom {

struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point&) const = default;
};

/// Closed ring: front() == back().
using Ring = std::vector<Point>;

struct BoundingBox {
    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;

    bool contains(Point p, double margin = 0.0) const noexcept {
        return p.x >= min_x - margin && p.x <= max_x + margin && p.y >= min_y - margin && p.y <= max_y + margin;
    }
};

struct Polygon {
    Ring exterior;            // counterclockwise
    std::vector<Ring> holes;  // clockwise

    double area() const noexcept;
    BoundingBox bbox() const noexcept;
};

struct ShapeSet {
    std::vector<Polygon> polygons;

    double area() const noexcept;
};

struct Triangle {
    std::array<std::size_t, 3> v{};  // counterclockwise vertex indices
    Point circumcenter;
    double circumradius = 0.0;
};

struct Triangulation {
    std::vector<Point> vertices;
    std::vector<Triangle> triangles;
};

inline constexpr double kDuplicateTolerance = 1e-9;

/// Twice the signed area of (a, b, c); positive when counterclockwise.
double orient(Point a, Point b, Point c) noexcept;

/// Signed ring area; positive for counterclockwise rings.
double signed_area(const Ring& ring) noexcept;

/// Lexicographically sorted points with near-duplicates merged.
std::vector<Point> deduplicate(std::span<const Point> points, double tolerance = kDuplicateTolerance);

/// Throws DegenerateGeometry for fewer than 3 distinct or all-collinear points.
Triangulation delaunay_triangulate(std::span<const Point> points);

/// Union of Delaunay triangles with circumradius <= alpha, as boundary
/// polygons. Throws EmptyShape when no triangle survives.
ShapeSet alpha_shape(std::span<const Point> points, double alpha);
ShapeSet alpha_shape(const Triangulation& triangulation, double alpha);

ShapeSet convex_hull(std::span<const Point> points);

/// Assembles polygons from directed boundary edges (region on the left).
/// Counterclockwise rings become exteriors, clockwise rings become holes of
/// the smallest exterior enclosing them.
ShapeSet polygons_from_boundary(std::span<const Point> vertices,
                                std::span<const std::pair<std::size_t, std::size_t>> edges);

/// Even-odd test; points on the ring count as inside.
bool point_in_polygon(Point p, const Ring& ring) noexcept;

/// Inside the exterior and not strictly inside any hole.
bool point_in_polygon(Point p, const Polygon& polygon) noexcept;

bool contains(const ShapeSet& shape, Point p) noexcept;

double distance_to_segment(Point p, Point a, Point b) noexcept;

/// Inside any polygon, or within `buffer` of any ring segment.
bool within_buffer(Point p, const ShapeSet& shape, double buffer) noexcept;

}  // namespace rotmap::geom
