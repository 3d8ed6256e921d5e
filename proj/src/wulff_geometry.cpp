#include "perciso/wulff_geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "linalg.hpp"
#include "perciso/errors.hpp"
#include "perciso/parallel.hpp"
#include "perciso/rng.hpp"

namespace perciso {

namespace {

using V3 = std::array<double, 3>;

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

V3 to3(const Vec& v) { return {v[0], v[1], v.size() > 2 ? v[2] : 0.0}; }
V3 sub(const V3& a, const V3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
V3 add(const V3& a, const V3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
V3 mul(const V3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double dot3(const V3& a, const V3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
V3 cross(const V3& a, const V3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double len3(const V3& a) { return std::sqrt(dot3(a, a)); }

double cross2(const Vec& o, const Vec& a, const Vec& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Counter-clockwise hull indices, collinear points removed.
std::vector<int> hull2d(const std::vector<Vec>& pts, double eps) {
    std::vector<int> idx(pts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return pts[a][0] < pts[b][0] || (pts[a][0] == pts[b][0] && pts[a][1] < pts[b][1]);
    });
    if (idx.size() < 3) return idx;
    std::vector<int> h(2 * idx.size());
    int k = 0;
    for (int i : idx) {
        while (k >= 2 && cross2(pts[h[k - 2]], pts[h[k - 1]], pts[i]) <= eps) --k;
        h[k++] = i;
    }
    for (int j = static_cast<int>(idx.size()) - 2, t = k + 1; j >= 0; --j) {
        int i = idx[j];
        while (k >= t && cross2(pts[h[k - 2]], pts[h[k - 1]], pts[i]) <= eps) --k;
        h[k++] = i;
    }
    h.resize(k - 1);
    return h;
}

struct Tri {
    int a, b, c;
    V3 n;
    double off;
};

Tri make_tri(const std::vector<V3>& p, int a, int b, int c) {
    V3 n = cross(sub(p[b], p[a]), sub(p[c], p[a]));
    double l = len3(n);
    n = mul(n, 1.0 / l);
    return {a, b, c, n, dot3(n, p[a])};
}

// Incremental 3D hull; triangles oriented outward. Throws when the points are (nearly) coplanar.
std::vector<Tri> hull3d(const std::vector<V3>& p, double eps) {
    const int n = static_cast<int>(p.size());
    if (n < 4) throw Error(ErrorCode::UnboundedCrystal, "too few half-spaces for a bounded body");
    int i0 = 0, i1 = -1, i2 = -1, i3 = -1;
    double best = -1;
    for (int i = 0; i < n; ++i) {
        double d = len3(sub(p[i], p[i0]));
        if (d > best) best = d, i1 = i;
    }
    best = -1;
    for (int i = 0; i < n; ++i) {
        double d = len3(cross(sub(p[i1], p[i0]), sub(p[i], p[i0])));
        if (d > best) best = d, i2 = i;
    }
    if (best < eps) throw Error(ErrorCode::UnboundedCrystal, "dual points are collinear");
    V3 nrm = cross(sub(p[i1], p[i0]), sub(p[i2], p[i0]));
    nrm = mul(nrm, 1.0 / len3(nrm));
    best = -1;
    for (int i = 0; i < n; ++i) {
        double d = std::abs(dot3(nrm, sub(p[i], p[i0])));
        if (d > best) best = d, i3 = i;
    }
    if (best < eps) throw Error(ErrorCode::UnboundedCrystal, "dual points are coplanar");
    V3 inner = mul(add(add(p[i0], p[i1]), add(p[i2], p[i3])), 0.25);
    std::vector<Tri> faces;
    auto add_face = [&](int a, int b, int c) {
        Tri t = make_tri(p, a, b, c);
        if (dot3(t.n, inner) - t.off > 0) t = make_tri(p, a, c, b);
        faces.push_back(t);
    };
    add_face(i0, i1, i2);
    add_face(i0, i1, i3);
    add_face(i0, i2, i3);
    add_face(i1, i2, i3);
    for (int i = 0; i < n; ++i) {
        if (i == i0 || i == i1 || i == i2 || i == i3) continue;
        std::vector<char> vis(faces.size(), 0);
        bool any = false;
        for (std::size_t f = 0; f < faces.size(); ++f)
            if (dot3(faces[f].n, p[i]) - faces[f].off > eps) vis[f] = 1, any = true;
        if (!any) continue;
        std::set<std::pair<int, int>> edges;
        for (std::size_t f = 0; f < faces.size(); ++f) {
            if (!vis[f]) continue;
            edges.insert({faces[f].a, faces[f].b});
            edges.insert({faces[f].b, faces[f].c});
            edges.insert({faces[f].c, faces[f].a});
        }
        std::vector<Tri> next;
        for (std::size_t f = 0; f < faces.size(); ++f)
            if (!vis[f]) next.push_back(faces[f]);
        for (const auto& [u, v] : edges)
            if (!edges.count({v, u})) next.push_back(make_tri(p, u, v, i));
        faces.swap(next);
    }
    return faces;
}

void fill_measures(Polytope& P) {
    for (auto& f : P.faces) {
        if (P.d == 2) {
            const Vec& a = P.vertices[f.vertices[0]];
            const Vec& b = P.vertices[f.vertices[1]];
            f.measure = std::hypot(b[0] - a[0], b[1] - a[1]);
        } else {
            V3 p0 = to3(P.vertices[f.vertices[0]]);
            V3 acc{0, 0, 0};
            for (std::size_t k = 1; k + 1 < f.vertices.size(); ++k)
                acc = add(acc, cross(sub(to3(P.vertices[f.vertices[k]]), p0),
                                     sub(to3(P.vertices[f.vertices[k + 1]]), p0)));
            f.measure = 0.5 * len3(acc);
        }
    }
}

using Faces3 = std::vector<std::vector<V3>>;

Faces3 faces_of(const Polytope& P) {
    Faces3 out;
    for (const auto& f : P.faces) {
        std::vector<V3> poly;
        for (int v : f.vertices) poly.push_back(to3(P.vertices[v]));
        out.push_back(poly);
    }
    return out;
}

std::vector<Vec> clip_polygon(const std::vector<Vec>& poly, const Vec& n, double b) {
    std::vector<Vec> out;
    const std::size_t m = poly.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Vec& a = poly[i];
        const Vec& c = poly[(i + 1) % m];
        double da = dot(n, a) - b, dc = dot(n, c) - b;
        if (da <= 1e-12) out.push_back(a);
        if ((da < -1e-12 && dc > 1e-12) || (da > 1e-12 && dc < -1e-12)) {
            double t = da / (da - dc);
            out.push_back({a[0] + t * (c[0] - a[0]), a[1] + t * (c[1] - a[1])});
        }
    }
    return out;
}

double polygon_area(const std::vector<Vec>& poly) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec& a = poly[i];
        const Vec& b = poly[(i + 1) % poly.size()];
        s += a[0] * b[1] - a[1] * b[0];
    }
    return 0.5 * s;
}

Faces3 clip_faces(const Faces3& faces, const V3& n, double b) {
    Faces3 out;
    std::vector<V3> cap;
    bool face_on_plane = false;
    for (const auto& poly : faces) {
        std::vector<V3> kept;
        bool flat = true;
        const std::size_t m = poly.size();
        for (std::size_t i = 0; i < m; ++i) {
            const V3& a = poly[i];
            const V3& c = poly[(i + 1) % m];
            double da = dot3(n, a) - b, dc = dot3(n, c) - b;
            flat = flat && std::abs(da) <= 1e-12;
            if (da <= 1e-12) {
                kept.push_back(a);
                if (da >= -1e-12) cap.push_back(a);
            }
            if ((da < -1e-12 && dc > 1e-12) || (da > 1e-12 && dc < -1e-12)) {
                double t = da / (da - dc);
                V3 x = add(a, mul(sub(c, a), t));
                kept.push_back(x);
                cap.push_back(x);
            }
        }
        if (kept.size() >= 3) out.push_back(kept);
        face_on_plane = face_on_plane || (flat && kept.size() >= 3);
    }
    if (!face_on_plane && cap.size() >= 3) {
        std::vector<V3> uniq;
        for (const V3& x : cap) {
            bool dup = false;
            for (const V3& y : uniq)
                if (len3(sub(x, y)) < 1e-10) dup = true;
            if (!dup) uniq.push_back(x);
        }
        if (uniq.size() >= 3) {
            V3 g{0, 0, 0};
            for (const V3& x : uniq) g = add(g, x);
            g = mul(g, 1.0 / uniq.size());
            V3 u = std::abs(n[0]) < 0.9 ? V3{1, 0, 0} : V3{0, 1, 0};
            u = sub(u, mul(n, dot3(u, n)));
            u = mul(u, 1.0 / len3(u));
            V3 w = cross(n, u);
            std::sort(uniq.begin(), uniq.end(), [&](const V3& a, const V3& c) {
                V3 da = sub(a, g), dc = sub(c, g);
                return std::atan2(dot3(da, w), dot3(da, u)) < std::atan2(dot3(dc, w), dot3(dc, u));
            });
            out.push_back(uniq);
        }
    }
    return out;
}

double faces_volume(const Faces3& faces) {
    if (faces.empty()) return 0.0;
    V3 ref{0, 0, 0};
    std::size_t cnt = 0;
    for (const auto& poly : faces)
        for (const V3& x : poly) ref = add(ref, x), ++cnt;
    ref = mul(ref, 1.0 / cnt);
    double s = 0.0;
    for (const auto& poly : faces)
        for (std::size_t k = 1; k + 1 < poly.size(); ++k)
            s += dot3(sub(poly[0], ref), cross(sub(poly[k], ref), sub(poly[k + 1], ref)));
    return s / 6.0;
}

}  // namespace

bool Polytope::contains(const Vec& x, double tol) const {
    for (const auto& h : halfspaces)
        if (dot(h.normal, x) > h.offset + tol) return false;
    return true;
}

Vec Polytope::centroid() const {
    Vec c(d, 0.0);
    for (const Vec& v : vertices)
        for (int i = 0; i < d; ++i) c[i] += v[i];
    for (double& x : c) x /= static_cast<double>(vertices.size());
    return c;
}

Polytope polytope_from_halfspaces(const std::vector<Halfspace>& hs_in, int d, const Vec& interior) {
    if (d != 2 && d != 3) throw Error(ErrorCode::InvalidArgument, "polytopes are supported for d = 2, 3");
    Vec c = interior.empty() ? Vec(d, 0.0) : interior;
    std::vector<Halfspace> hs;
    std::vector<Vec> dual;
    for (const auto& h : hs_in) {
        if (static_cast<int>(h.normal.size()) != d) throw Error(ErrorCode::InvalidArgument, "normal dimension mismatch");
        double l = std::sqrt(dot(h.normal, h.normal));
        if (l < 1e-15) throw Error(ErrorCode::InvalidArgument, "zero normal");
        Halfspace u{h.normal, h.offset / l};
        for (double& x : u.normal) x /= l;
        double b = u.offset - dot(u.normal, c);
        if (!(b > kGeomTol)) throw Error(ErrorCode::InvalidArgument, "interior point violates a half-space");
        Vec q(d);
        for (int i = 0; i < d; ++i) q[i] = u.normal[i] / b;
        bool dup = false;
        for (const Vec& w : dual) {
            double m = 0.0;
            for (int i = 0; i < d; ++i) m = std::max(m, std::abs(w[i] - q[i]));
            if (m < 1e-12) dup = true;
        }
        if (dup) continue;
        hs.push_back(u);
        dual.push_back(q);
    }
    double scale = 0.0;
    for (const Vec& q : dual) scale = std::max(scale, std::sqrt(dot(q, q)));

    Polytope P;
    P.d = d;
    if (d == 2) {
        if (dual.size() < 3) throw Error(ErrorCode::UnboundedCrystal, "too few half-spaces for a bounded body");
        std::vector<int> h = hull2d(dual, 1e-12 * scale * scale);
        const int k = static_cast<int>(h.size());
        if (k < 3) throw Error(ErrorCode::UnboundedCrystal, "directions do not positively span");
        Vec origin{0.0, 0.0};
        for (int i = 0; i < k; ++i)
            if (cross2(dual[h[i]], dual[h[(i + 1) % k]], origin) <= 1e-12 * scale * scale)
                throw Error(ErrorCode::UnboundedCrystal, "directions do not positively span");
        // edge i of the dual hull joins h[i], h[i+1]; its pole is a primal vertex
        std::vector<Vec> verts(k);
        for (int i = 0; i < k; ++i) {
            const Vec& a = dual[h[i]];
            const Vec& b = dual[h[(i + 1) % k]];
            Vec x;
            detail::solve_linear({a[0], a[1], b[0], b[1]}, {1.0, 1.0}, 2, x, 1e-300);
            verts[i] = {x[0] + c[0], x[1] + c[1]};
        }
        P.vertices = verts;
        for (int i = 0; i < k; ++i) {
            int j = (i + 1) % k;  // face of dual vertex h[j] runs from vertex i to vertex j
            PolyFace f;
            f.vertices = {i, j};
            f.normal = hs[h[j]].normal;
            P.faces.push_back(f);
            P.halfspaces.push_back(hs[h[j]]);
        }
    } else {
        std::vector<V3> pts;
        for (const Vec& q : dual) pts.push_back(to3(q));
        std::vector<Tri> tris = hull3d(pts, 1e-12 * scale);
        std::vector<Vec> verts;
        std::vector<int> tri_vertex(tris.size());
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!(tris[t].off > 1e-12 * scale))
                throw Error(ErrorCode::UnboundedCrystal, "directions do not positively span");
            Vec x{tris[t].n[0] / tris[t].off, tris[t].n[1] / tris[t].off, tris[t].n[2] / tris[t].off};
            int id = -1;
            for (std::size_t v = 0; v < verts.size(); ++v) {
                double m = 0.0;
                for (int i = 0; i < 3; ++i) m = std::max(m, std::abs(verts[v][i] - x[i]));
                if (m < kGeomTol * (1.0 + std::sqrt(dot(x, x)))) {
                    id = static_cast<int>(v);
                    break;
                }
            }
            if (id < 0) {
                id = static_cast<int>(verts.size());
                verts.push_back(x);
            }
            tri_vertex[t] = id;
        }
        std::map<int, std::set<int>> incident;
        for (std::size_t t = 0; t < tris.size(); ++t)
            for (int a : {tris[t].a, tris[t].b, tris[t].c}) incident[a].insert(tri_vertex[t]);
        std::vector<int> used(verts.size(), -1);
        std::vector<Vec> kept;
        for (auto& [hi, vs] : incident) {
            if (vs.size() < 3) continue;
            const Vec& nrm = hs[hi].normal;
            V3 n3 = to3(nrm);
            V3 g{0, 0, 0};
            for (int v : vs) g = add(g, to3(verts[v]));
            g = mul(g, 1.0 / vs.size());
            V3 u = std::abs(n3[0]) < 0.9 ? V3{1, 0, 0} : V3{0, 1, 0};
            u = sub(u, mul(n3, dot3(u, n3)));
            u = mul(u, 1.0 / len3(u));
            V3 w = cross(n3, u);
            std::vector<int> cyc(vs.begin(), vs.end());
            std::sort(cyc.begin(), cyc.end(), [&](int a, int b) {
                V3 da = sub(to3(verts[a]), g), db = sub(to3(verts[b]), g);
                return std::atan2(dot3(da, w), dot3(da, u)) < std::atan2(dot3(db, w), dot3(db, u));
            });
            PolyFace f;
            for (int v : cyc) {
                if (used[v] < 0) {
                    used[v] = static_cast<int>(kept.size());
                    kept.push_back(verts[v]);
                }
                f.vertices.push_back(used[v]);
            }
            f.normal = nrm;
            P.faces.push_back(f);
            P.halfspaces.push_back(hs[hi]);
        }
        for (Vec& v : kept)
            for (int i = 0; i < 3; ++i) v[i] += c[i];
        P.vertices = kept;
    }
    fill_measures(P);
    return P;
}

Polytope wulff_crystal(const NormTable& table) {
    if (table.entries.empty()) throw Error(ErrorCode::UnboundedCrystal, "empty norm table");
    bool any_positive = false, any_nonpositive = false;
    for (const auto& e : table.entries) {
        if (!std::isfinite(e.beta)) throw Error(ErrorCode::DegenerateNorm, "non-finite beta");
        (e.beta > 0.0 ? any_positive : any_nonpositive) = true;
    }
    if (any_nonpositive) throw Error(ErrorCode::DegenerateNorm, any_positive ? "beta <= 0 in some direction" : "beta vanishes");
    std::vector<Halfspace> hs;
    for (const auto& e : table.entries) {
        double l = std::sqrt(dot(e.v, e.v));
        Halfspace h{e.v, e.beta / l};
        for (double& x : h.normal) x /= l;
        hs.push_back(h);
    }
    return polytope_from_halfspaces(hs, table.d);
}

Polytope wulff_crystal(int d, const std::vector<Vec>& dirs, const NormFn& norm) {
    return wulff_crystal(exact_norm_table(d, dirs, norm, "function"));
}

Polytope axis_box(const Vec& lo, const Vec& hi) {
    const int d = static_cast<int>(lo.size());
    std::vector<Halfspace> hs;
    Vec c(d);
    for (int i = 0; i < d; ++i) {
        Vec n(d, 0.0);
        n[i] = 1.0;
        hs.push_back({n, hi[i]});
        n[i] = -1.0;
        hs.push_back({n, -lo[i]});
        c[i] = 0.5 * (lo[i] + hi[i]);
    }
    return polytope_from_halfspaces(hs, d, c);
}

Polytope scaled(const Polytope& P, double s) {
    Polytope Q = P;
    for (Vec& v : Q.vertices)
        for (double& x : v) x *= s;
    for (auto& h : Q.halfspaces) h.offset *= s;
    for (auto& f : Q.faces) f.measure *= std::pow(s, P.d - 1);
    return Q;
}

Polytope translated(const Polytope& P, const Vec& t) {
    Polytope Q = P;
    for (Vec& v : Q.vertices)
        for (int i = 0; i < P.d; ++i) v[i] += t[i];
    for (auto& h : Q.halfspaces) h.offset += dot(h.normal, t);
    return Q;
}

double volume(const Polytope& P) {
    if (P.d == 2) return std::abs(polygon_area(P.vertices));
    return std::abs(faces_volume(faces_of(P)));
}

Polytope dilate_to_volume(const Polytope& P, double target) {
    double v = volume(P);
    if (!(v > 0.0)) throw Error(ErrorCode::DegenerateNorm, "polytope has zero volume");
    if (!(target > 0.0)) throw Error(ErrorCode::InvalidArgument, "target volume must be positive");
    if (target == v) return P;
    return scaled(P, std::pow(target / v, 1.0 / P.d));
}

double surface_energy(const Polytope& P, const NormFn& norm) {
    double s = 0.0;
    for (const auto& f : P.faces) s += norm(f.normal) * f.measure;
    return s;
}

double surface_energy(const Polytope& P, const NormTable& table) {
    return surface_energy(P, [&](const Vec& n) { return norm_value(table, n); });
}

double continuum_conductance(const Polytope& P, const NormTable& table, double theta) {
    if (!(theta > 0.0)) throw Error(ErrorCode::InvalidArgument, "theta must be positive");
    return surface_energy(P, table) / (theta * volume(P));
}

double support(const Polytope& P, const Vec& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (const Vec& x : P.vertices) m = std::max(m, dot(x, v));
    return m;
}

double vertex_hausdorff(const Polytope& P, const Polytope& Q) {
    auto one_way = [](const Polytope& A, const Polytope& B) {
        double worst = 0.0;
        for (const Vec& a : A.vertices) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec& b : B.vertices) {
                double s = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
                best = std::min(best, std::sqrt(s));
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(one_way(P, Q), one_way(Q, P));
}

int euler_characteristic(const Polytope& P) {
    std::set<std::pair<int, int>> edges;
    for (const auto& f : P.faces)
        for (std::size_t k = 0; k < f.vertices.size(); ++k) {
            int a = f.vertices[k], b = f.vertices[(k + 1) % f.vertices.size()];
            edges.insert({std::min(a, b), std::max(a, b)});
        }
    return static_cast<int>(P.vertices.size()) - static_cast<int>(edges.size()) + static_cast<int>(P.faces.size());
}

double wulff_volume_target(int d) {
    double f = 1.0;
    for (int i = 2; i <= d; ++i) f *= i;
    return std::pow(2.0, d) / f;
}

double clipped_volume(const Polytope& P, const std::vector<Halfspace>& cuts) {
    if (P.d == 2) {
        std::vector<Vec> poly = P.vertices;
        for (const auto& h : cuts) {
            poly = clip_polygon(poly, h.normal, h.offset);
            if (poly.size() < 3) return 0.0;
        }
        return std::abs(polygon_area(poly));
    }
    Faces3 faces = faces_of(P);
    for (const auto& h : cuts) {
        faces = clip_faces(faces, to3(h.normal), h.offset);
        if (faces.size() < 4) return 0.0;
    }
    return std::abs(faces_volume(faces));
}

double intersection_volume(const Polytope& P, const Polytope& Q) { return clipped_volume(P, Q.halfspaces); }

double box_intersection_volume(const Polytope& P, const Vec& lo, const Vec& hi) {
    std::vector<Halfspace> cuts;
    for (int i = 0; i < P.d; ++i) {
        Vec n(P.d, 0.0);
        n[i] = 1.0;
        cuts.push_back({n, hi[i]});
        n[i] = -1.0;
        cuts.push_back({n, -lo[i]});
    }
    return clipped_volume(P, cuts);
}

EnergyReport energy_report(const Polytope& P, const NormTable& table, double theta) {
    EnergyReport r;
    r.volume = volume(P);
    r.energy = surface_energy(P, table);
    r.theta = theta;
    r.conductance = continuum_conductance(P, table, theta);
    r.provenance = table.provenance;
    return r;
}

Polytope random_polytope(int d, std::uint64_t seed) {
    SplitMix64 rng(seed);
    int m = d + 2 + static_cast<int>(rng.below(8));
    std::vector<Halfspace> hs;
    for (int k = 0; k < m; ++k) {
        Vec n(d);
        double s = 0.0;
        for (double& x : n) {
            x = rng.normal();
            s += x * x;
        }
        for (double& x : n) x /= std::sqrt(s);
        hs.push_back({n, 0.5 + rng.uniform()});
    }
    for (int i = 0; i < d; ++i)
        for (double sg : {1.0, -1.0}) {
            Vec n(d, 0.0);
            n[i] = sg;
            hs.push_back({n, 2.5});
        }
    return polytope_from_halfspaces(hs, d);
}

double asymmetry_index(const Polytope& F, const Polytope& W) {
    const int d = F.d;
    const double vf = volume(F);
    Polytope G = dilate_to_volume(W, vf);
    Vec cf = F.centroid(), cg = G.centroid();
    Vec center(d);
    for (int i = 0; i < d; ++i) center[i] = cf[i] - cg[i];
    double diam = 0.0;
    for (const Vec& a : F.vertices)
        for (const Vec& b : F.vertices) {
            double s = 0.0;
            for (int i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
            diam = std::max(diam, std::sqrt(s));
        }
    auto sym = [&](const Vec& x) {
        Polytope T = translated(G, x);
        return 2.0 * (vf - intersection_volume(F, T)) / vf;
    };
    double best = sym(center);
    Vec arg = center;
    double step = diam / 4.0;
    const int half = 2;
    for (int level = 0; level < 3; ++level) {
        Vec base = arg;
        int total = 1;
        for (int i = 0; i < d; ++i) total *= 2 * half + 1;
        for (int code = 0; code < total; ++code) {
            Vec x = base;
            int t = code;
            for (int i = 0; i < d; ++i) {
                x[i] += step * ((t % (2 * half + 1)) - half);
                t /= 2 * half + 1;
            }
            double v = sym(x);
            if (v < best - 1e-15) {
                best = v;
                arg = x;
            }
        }
        step /= 4.0;
    }
    return std::max(0.0, best);
}

DeficitReport isoperimetric_deficit_test(const NormTable& table, int trials, std::uint64_t seed, bool with_asymmetry) {
    if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
    const int d = table.d;
    Polytope W = dilate_to_volume(wulff_crystal(table), wulff_volume_target(d));
    DeficitReport rep;
    rep.trials = trials;
    rep.volume_wulff = volume(W);
    rep.energy_wulff = surface_energy(W, table);
    struct One {
        double deficit = 0.0, asym = 0.0;
        bool violation = false;
    };
    auto rows = parallel_map<One>(static_cast<std::size_t>(trials), [&](std::size_t i) {
        std::uint64_t s = derive_seed(seed, i);
        Polytope F = dilate_to_volume(random_polytope(d, s), rep.volume_wulff);
        SplitMix64 rng(s ^ 0x5bd1e995ULL);
        Vec shift(d);
        for (double& x : shift) x = rng.uniform() - 0.5;
        F = translated(F, shift);
        One o;
        double I = surface_energy(F, table);
        o.deficit = (I - rep.energy_wulff) / rep.energy_wulff;
        o.violation = I < rep.energy_wulff - kReportTol;
        if (with_asymmetry) o.asym = asymmetry_index(F, W);
        return o;
    });
    rep.min_deficit = std::numeric_limits<double>::infinity();
    for (const auto& o : rows) {
        rep.deficits.push_back(o.deficit);
        if (with_asymmetry) rep.asymmetry.push_back(o.asym);
        rep.violations += o.violation;
        rep.min_deficit = std::min(rep.min_deficit, o.deficit);
    }
    return rep;
}

namespace {
std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
}  // namespace

std::string polytope_off(const Polytope& P) {
    std::ostringstream out;
    out << "OFF\n" << P.vertices.size() << " " << (P.d == 2 ? 1 : P.faces.size()) << " 0\n";
    for (const Vec& v : P.vertices) out << fmt(v[0]) << " " << fmt(v[1]) << " " << (P.d == 2 ? "0" : fmt(v[2])) << "\n";
    if (P.d == 2) {
        out << P.vertices.size();
        for (std::size_t i = 0; i < P.vertices.size(); ++i) out << " " << i;
        out << "\n";
    } else {
        for (const auto& f : P.faces) {
            out << f.vertices.size();
            for (int v : f.vertices) out << " " << v;
            out << "\n";
        }
    }
    return out.str();
}

std::string polytope_json(const Polytope& P) {
    nlohmann::json j;
    j["d"] = P.d;
    nlohmann::json hs = nlohmann::json::array();
    for (const auto& h : P.halfspaces) hs.push_back({{"normal", h.normal}, {"offset", h.offset}});
    j["halfspaces"] = hs;
    j["vertices"] = P.vertices;
    nlohmann::json fs = nlohmann::json::array();
    for (const auto& f : P.faces) fs.push_back({{"vertices", f.vertices}, {"normal", f.normal}, {"measure", f.measure}});
    j["faces"] = fs;
    j["volume"] = volume(P);
    return j.dump(2);
}

std::string energy_report_json(const EnergyReport& r) {
    nlohmann::json j;
    j["volume"] = r.volume;
    j["energy"] = r.energy;
    j["conductance"] = r.conductance;
    j["theta"] = r.theta;
    j["norm"] = r.provenance;
    return j.dump(2);
}

}  // namespace perciso
