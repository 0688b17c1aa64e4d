#include "rotmap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "rotmap/error.hpp"

namespace rotmap::geom {

double orient(Point a, Point b, Point c) noexcept {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

double signed_area(const Ring& ring) noexcept {
    if (ring.size() < 3) return 0.0;
    double twice = 0.0;
    const Point base = ring.front();
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const Point a{ring[i].x - base.x, ring[i].y - base.y};
        const Point b{ring[i + 1].x - base.x, ring[i + 1].y - base.y};
        twice += a.x * b.y - a.y * b.x;
    }
    return 0.5 * twice;
}

double Polygon::area() const noexcept {
    double a = std::abs(signed_area(exterior));
    for (const auto& h : holes) a -= std::abs(signed_area(h));
    return a;
}

BoundingBox Polygon::bbox() const noexcept {
    BoundingBox box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& p : exterior) {
        box.min_x = std::min(box.min_x, p.x);
        box.min_y = std::min(box.min_y, p.y);
        box.max_x = std::max(box.max_x, p.x);
        box.max_y = std::max(box.max_y, p.y);
    }
    return box;
}

double ShapeSet::area() const noexcept {
    double a = 0.0;
    for (const auto& p : polygons) a += p.area();
    return a;
}

std::vector<Point> deduplicate(std::span<const Point> points, double tolerance) {
    std::vector<Point> sorted(points.begin(), points.end());
    std::sort(sorted.begin(), sorted.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    std::vector<Point> kept;
    kept.reserve(sorted.size());
    const double tol2 = tolerance * tolerance;
    for (const Point p : sorted) {
        bool duplicate = false;
        for (auto it = kept.rbegin(); it != kept.rend() && it->x >= p.x - tolerance; ++it) {
            const double dx = it->x - p.x;
            const double dy = it->y - p.y;
            if (dx * dx + dy * dy <= tol2) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) kept.push_back(p);
    }
    return kept;
}

namespace {

constexpr int kGhost = -1;

struct Mesh {
    struct Tri {
        std::array<int, 3> v{};
        std::array<int, 3> nb{-1, -1, -1};  // neighbour across the edge opposite v[i]
        bool alive = true;
        bool ghost() const { return v[2] == kGhost; }
    };

    // Coordinates are shifted to the bounding-box centre and predicates run in
    // long double, which keeps incircle well conditioned for geographic inputs.
    std::vector<std::array<long double, 2>> pts;
    std::vector<Tri> tris;
    std::vector<int> free_slots;

    long double orient(int a, int b, int c) const {
        const auto& pa = pts[a];
        const auto& pb = pts[b];
        const auto& pc = pts[c];
        return (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]);
    }

    long double incircle(int a, int b, int c, int d) const {
        const long double adx = pts[a][0] - pts[d][0], ady = pts[a][1] - pts[d][1];
        const long double bdx = pts[b][0] - pts[d][0], bdy = pts[b][1] - pts[d][1];
        const long double cdx = pts[c][0] - pts[d][0], cdy = pts[c][1] - pts[d][1];
        const long double alift = adx * adx + ady * ady;
        const long double blift = bdx * bdx + bdy * bdy;
        const long double clift = cdx * cdx + cdy * cdy;
        return alift * (bdx * cdy - bdy * cdx) + blift * (cdx * ady - cdy * adx) + clift * (adx * bdy - ady * bdx);
    }

    bool strictly_between(int u, int w, int p) const {
        const long double dx = pts[w][0] - pts[u][0], dy = pts[w][1] - pts[u][1];
        const long double t = (pts[p][0] - pts[u][0]) * dx + (pts[p][1] - pts[u][1]) * dy;
        return t > 0 && t < dx * dx + dy * dy;
    }

    bool conflicts(int t, int p) const {
        const Tri& tri = tris[t];
        if (tri.ghost()) {
            const long double o = orient(tri.v[0], tri.v[1], p);
            if (o > 0) return true;
            return o == 0 && strictly_between(tri.v[0], tri.v[1], p);
        }
        return incircle(tri.v[0], tri.v[1], tri.v[2], p) > 0;
    }

    int add(std::array<int, 3> v) {
        Tri tri;
        tri.v = v;
        if (!free_slots.empty()) {
            const int slot = free_slots.back();
            free_slots.pop_back();
            tris[slot] = tri;
            return slot;
        }
        tris.push_back(tri);
        return static_cast<int>(tris.size()) - 1;
    }

    int locate(int start, int p) const {
        int t = start;
        const std::size_t limit = 4 * tris.size() + 16;
        for (std::size_t step = 0; step < limit; ++step) {
            const Tri& tri = tris[t];
            if (tri.ghost()) return t;
            int next = -1;
            for (int k = 0; k < 3; ++k) {
                const int i = static_cast<int>((k + step) % 3);
                const int a = tri.v[(i + 1) % 3];
                const int b = tri.v[(i + 2) % 3];
                if (orient(a, b, p) < 0) {
                    next = tri.nb[i];
                    break;
                }
            }
            if (next < 0) return t;
            t = next;
        }
        return -1;
    }

    void insert(int p, int& hint) {
        int seed = locate(hint, p);
        if (seed < 0 || !conflicts(seed, p)) {
            seed = -1;
            for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
                if (tris[t].alive && conflicts(t, p)) {
                    seed = t;
                    break;
                }
            }
            if (seed < 0) return;  // numerically coincident; nothing to do
        }

        std::vector<int> cavity{seed};
        std::vector<char> in_cavity(tris.size(), 0);
        in_cavity[seed] = 1;
        for (std::size_t k = 0; k < cavity.size(); ++k) {
            const Tri& tri = tris[cavity[k]];
            for (int nb : tri.nb) {
                if (nb >= 0 && !in_cavity[nb] && conflicts(nb, p)) {
                    in_cavity[nb] = 1;
                    cavity.push_back(nb);
                }
            }
        }

        struct Boundary {
            int a, b, outside;
        };
        std::vector<Boundary> boundary;
        for (int t : cavity) {
            const Tri& tri = tris[t];
            for (int i = 0; i < 3; ++i) {
                const int nb = tri.nb[i];
                if (nb >= 0 && in_cavity[nb]) continue;
                boundary.push_back({tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], nb});
            }
        }
        for (int t : cavity) {
            tris[t].alive = false;
            free_slots.push_back(t);
        }

        std::map<std::pair<int, int>, std::pair<int, int>> open_edges;
        auto link = [&](int tri_index, int local) {
            const Tri& tri = tris[tri_index];
            const int a = tri.v[(local + 1) % 3];
            const int b = tri.v[(local + 2) % 3];
            auto it = open_edges.find({b, a});
            if (it != open_edges.end()) {
                tris[tri_index].nb[local] = it->second.first;
                tris[it->second.first].nb[it->second.second] = tri_index;
                open_edges.erase(it);
            } else {
                open_edges[{a, b}] = {tri_index, local};
            }
        };

        for (const auto& e : boundary) {
            // (a, b, p) is counterclockwise; rotate so a ghost vertex sits last.
            std::array<int, 3> v{e.a, e.b, p};
            int across = 2;  // local index opposite the boundary edge
            if (e.a == kGhost) {
                v = {e.b, p, kGhost};
                across = 1;
            } else if (e.b == kGhost) {
                v = {p, e.a, kGhost};
                across = 0;
            }
            const int t = add(v);
            tris[t].nb[across] = e.outside;
            if (e.outside >= 0) {
                Tri& out = tris[e.outside];
                for (int i = 0; i < 3; ++i) {
                    const int oa = out.v[(i + 1) % 3];
                    const int ob = out.v[(i + 2) % 3];
                    if (oa == e.b && ob == e.a) out.nb[i] = t;
                }
            }
            for (int i = 0; i < 3; ++i) {
                if (i != across) link(t, i);
            }
            if (!tris[t].ghost()) hint = t;
        }
    }
};

}  // namespace

Triangulation delaunay_triangulate(std::span<const Point> input) {
    const std::vector<Point> points = deduplicate(input);
    if (points.size() < 3) throw DegenerateGeometry("fewer than 3 distinct points");

    Mesh mesh;
    double min_x = points.front().x, max_x = points.back().x;
    double min_y = points.front().y, max_y = points.front().y;
    for (const auto& p : points) {
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const long double cx = 0.5L * (static_cast<long double>(min_x) + max_x);
    const long double cy = 0.5L * (static_cast<long double>(min_y) + max_y);
    mesh.pts.reserve(points.size());
    for (const auto& p : points) mesh.pts.push_back({p.x - cx, p.y - cy});

    const int n = static_cast<int>(points.size());
    int third = -1;
    for (int i = 2; i < n; ++i) {
        if (mesh.orient(0, 1, i) != 0) {
            third = i;
            break;
        }
    }
    if (third < 0) throw DegenerateGeometry("all points are collinear");

    int a = 0, b = 1, c = third;
    if (mesh.orient(a, b, c) < 0) std::swap(a, b);
    const int t0 = mesh.add({a, b, c});
    const int g_ab = mesh.add({b, a, kGhost});
    const int g_bc = mesh.add({c, b, kGhost});
    const int g_ca = mesh.add({a, c, kGhost});
    mesh.tris[t0].nb = {g_bc, g_ca, g_ab};
    mesh.tris[g_ab].nb = {g_ca, g_bc, t0};
    mesh.tris[g_bc].nb = {g_ab, g_ca, t0};
    mesh.tris[g_ca].nb = {g_bc, g_ab, t0};

    int hint = t0;
    for (int i = 2; i < n; ++i) {
        if (i == third) continue;
        mesh.insert(i, hint);
    }

    Triangulation out;
    out.vertices = points;
    for (const auto& tri : mesh.tris) {
        if (!tri.alive || tri.ghost()) continue;
        Triangle t;
        t.v = {static_cast<std::size_t>(tri.v[0]), static_cast<std::size_t>(tri.v[1]),
               static_cast<std::size_t>(tri.v[2])};
        const Point pa = points[t.v[0]], pb = points[t.v[1]], pc = points[t.v[2]];
        const double bx = pb.x - pa.x, by = pb.y - pa.y;
        const double qx = pc.x - pa.x, qy = pc.y - pa.y;
        const double d = 2.0 * (bx * qy - by * qx);
        const double b2 = bx * bx + by * by, q2 = qx * qx + qy * qy;
        const double ux = (qy * b2 - by * q2) / d;
        const double uy = (bx * q2 - qx * b2) / d;
        t.circumcenter = {pa.x + ux, pa.y + uy};
        t.circumradius = std::hypot(ux, uy);
        out.triangles.push_back(t);
    }
    // Canonical order: makes output independent of slot reuse history.
    for (auto& t : out.triangles) {
        const auto first = std::min_element(t.v.begin(), t.v.end()) - t.v.begin();
        std::rotate(t.v.begin(), t.v.begin() + first, t.v.end());
    }
    std::sort(out.triangles.begin(), out.triangles.end(),
              [](const Triangle& l, const Triangle& r) { return l.v < r.v; });
    return out;
}

namespace {

std::pair<std::size_t, std::size_t> undirected(std::size_t a, std::size_t b) { return {std::min(a, b), std::max(a, b)}; }

// Angle swept rotating `from` clockwise until it points along `to`, in (0, 2pi].
double clockwise_angle(Point from, Point to) {
    const double cross = from.x * to.y - from.y * to.x;
    const double dot = from.x * to.x + from.y * to.y;
    double ccw = std::atan2(cross, dot);
    if (ccw < 0) ccw += 2.0 * std::numbers::pi;
    double cw = 2.0 * std::numbers::pi - ccw;
    if (cw <= 0.0) cw = 2.0 * std::numbers::pi;
    return cw;
}

}  // namespace

ShapeSet alpha_shape(std::span<const Point> points, double alpha) {
    return alpha_shape(delaunay_triangulate(points), alpha);
}

ShapeSet alpha_shape(const Triangulation& tri, double alpha) {
    std::vector<const Triangle*> kept;
    for (const auto& t : tri.triangles) {
        if (t.circumradius <= alpha) kept.push_back(&t);
    }
    if (kept.empty()) throw EmptyShape("no Delaunay triangle has circumradius <= alpha");

    std::map<std::pair<std::size_t, std::size_t>, int> edge_use;
    for (const auto* t : kept) {
        for (int i = 0; i < 3; ++i) ++edge_use[undirected(t->v[i], t->v[(i + 1) % 3])];
    }
    std::vector<std::pair<std::size_t, std::size_t>> boundary;
    for (const auto* t : kept) {
        for (int i = 0; i < 3; ++i) {
            const std::size_t a = t->v[i], b = t->v[(i + 1) % 3];
            if (edge_use[undirected(a, b)] == 1) boundary.emplace_back(a, b);
        }
    }
    return polygons_from_boundary(tri.vertices, boundary);
}

namespace {

// A hole that touches the exterior at one vertex comes out of the wedge
// pairing as a single ring visiting that vertex twice. Cutting every closed
// sub-loop off yields simple rings: counterclockwise exteriors and clockwise
// holes.
void split_at_repeats(const Ring& ring, std::vector<Ring>& out) {
    std::vector<Point> stack;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const Point p = ring[i];
        auto it = std::find(stack.begin(), stack.end(), p);
        if (it != stack.end()) {
            Ring loop(it, stack.end());
            loop.push_back(p);
            if (loop.size() >= 4) out.push_back(std::move(loop));
            stack.erase(it + 1, stack.end());
        } else {
            stack.push_back(p);
        }
    }
    if (stack.size() >= 3) {
        stack.push_back(stack.front());
        out.push_back(std::move(stack));
    }
}

}  // namespace

ShapeSet polygons_from_boundary(std::span<const Point> pts,
                                std::span<const std::pair<std::size_t, std::size_t>> boundary) {
    struct Edge {
        std::size_t from, to;
        bool used = false;
    };
    std::vector<Edge> edges;
    edges.reserve(boundary.size());
    std::unordered_map<std::size_t, std::vector<std::size_t>> outgoing;
    for (const auto& [a, b] : boundary) {
        outgoing[a].push_back(edges.size());
        edges.push_back({a, b});
    }

    std::vector<Ring> rings;
    for (std::size_t start = 0; start < edges.size(); ++start) {
        if (edges[start].used) continue;
        Ring ring{pts[edges[start].from]};
        std::size_t current = start;
        for (;;) {
            edges[current].used = true;
            const std::size_t u = edges[current].from, v = edges[current].to;
            ring.push_back(pts[v]);
            // Continue along the first boundary edge clockwise from the way we
            // came in; at pinch vertices this splits the boundary into simple rings.
            const Point back{pts[u].x - pts[v].x, pts[u].y - pts[v].y};
            auto angle_to = [&](std::size_t e) {
                const Point dir{pts[edges[e].to].x - pts[v].x, pts[edges[e].to].y - pts[v].y};
                return clockwise_angle(back, dir);
            };
            std::size_t best = edges.size();
            double best_angle = std::numeric_limits<double>::infinity();
            if (v == edges[start].from) {
                best = start;
                best_angle = angle_to(start);
            }
            for (std::size_t e : outgoing[v]) {
                if (edges[e].used) continue;
                const double angle = angle_to(e);
                if (angle < best_angle) {
                    best_angle = angle;
                    best = e;
                }
            }
            if (best == start || best == edges.size()) break;
            current = best;
        }
        if (ring.size() >= 4 && ring.front() == ring.back()) split_at_repeats(ring, rings);
    }

    ShapeSet shape;
    std::vector<Ring> holes;
    for (auto& r : rings) {
        if (signed_area(r) > 0) shape.polygons.push_back({std::move(r), {}});
        else holes.push_back(std::move(r));
    }
    for (auto& h : holes) {
        std::size_t owner = shape.polygons.size();
        double owner_area = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < shape.polygons.size(); ++i) {
            const auto& ext = shape.polygons[i].exterior;
            const bool inside = std::all_of(h.begin(), h.end(), [&](Point p) { return point_in_polygon(p, ext); });
            const double a = signed_area(ext);
            if (inside && a < owner_area) {
                owner = i;
                owner_area = a;
            }
        }
        if (owner < shape.polygons.size()) shape.polygons[owner].holes.push_back(std::move(h));
    }
    return shape;
}

ShapeSet convex_hull(std::span<const Point> input) {
    const std::vector<Point> pts = deduplicate(input);
    if (pts.size() < 3) throw DegenerateGeometry("fewer than 3 distinct points");
    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && orient(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && orient(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k);  // last point repeats the first
    if (hull.size() < 4) throw DegenerateGeometry("all points are collinear");
    ShapeSet shape;
    shape.polygons.push_back({std::move(hull), {}});
    return shape;
}

double distance_to_segment(Point p, Point a, Point b) noexcept {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

bool point_in_polygon(Point p, const Ring& ring) noexcept {
    bool inside = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const Point a = ring[i], b = ring[j];
        if (distance_to_segment(p, a, b) <= kDuplicateTolerance) return true;
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

bool point_in_polygon(Point p, const Polygon& polygon) noexcept {
    if (!point_in_polygon(p, polygon.exterior)) return false;
    for (const auto& hole : polygon.holes) {
        if (!point_in_polygon(p, hole)) continue;
        bool on_edge = false;
        for (std::size_t i = 0; i + 1 < hole.size() && !on_edge; ++i) {
            on_edge = distance_to_segment(p, hole[i], hole[i + 1]) <= kDuplicateTolerance;
        }
        if (!on_edge) return false;
    }
    return true;
}

bool contains(const ShapeSet& shape, Point p) noexcept {
    return std::any_of(shape.polygons.begin(), shape.polygons.end(),
                       [&](const Polygon& poly) { return point_in_polygon(p, poly); });
}

bool within_buffer(Point p, const ShapeSet& shape, double buffer) noexcept {
    for (const auto& poly : shape.polygons) {
        if (!poly.bbox().contains(p, buffer + kDuplicateTolerance)) continue;
        if (point_in_polygon(p, poly)) return true;
        auto near_ring = [&](const Ring& ring) {
            for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
                if (distance_to_segment(p, ring[i], ring[i + 1]) <= buffer) return true;
            }
            return false;
        };
        if (near_ring(poly.exterior)) return true;
        for (const auto& hole : poly.holes) {
            if (near_ring(hole)) return true;
        }
    }
    return false;
}

}  // namespace rotmap::geom
