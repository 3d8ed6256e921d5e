#include "perciso/cylinder_cuts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "perciso/errors.hpp"
#include "perciso/flow.hpp"

namespace perciso {

namespace {

constexpr double kTol = 1e-9;

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

Frame upper_frame(const Vec& v) {
    const int d = static_cast<int>(v.size());
    const int m = d - 1;
    Vec y(m);
    for (int i = 0; i < m; ++i) y[i] = v[i] / (1.0 + v[m]);
    double yy = 0.0;
    for (double c : y) yy += c * c;
    Frame f;
    f.v = v;
    for (int i = 0; i < m; ++i) {
        Vec col(d, 0.0);
        col[i] += 1.0 + yy;
        col[m] -= y[i] * (1.0 + yy);
        for (int j = 0; j < m; ++j) col[j] -= y[i] * 2.0 * y[j];
        col[m] -= y[i] * (1.0 - yy);
        // Gram-Schmidt against v and the previous columns
        double pv = dot(col, v);
        for (int j = 0; j < d; ++j) col[j] -= pv * v[j];
        for (const Vec& b : f.basis) {
            double pb = dot(col, b);
            for (int j = 0; j < d; ++j) col[j] -= pb * b[j];
        }
        double len = norm2(col);
        for (double& c : col) c /= len;
        f.basis.push_back(col);
    }
    return f;
}

}  // namespace

bool canonical_orientation(const Vec& v) {
    for (int i = static_cast<int>(v.size()) - 1; i >= 0; --i) {
        if (std::abs(v[i]) > 1e-12) return v[i] > 0.0;
    }
    return true;
}

Frame chosen_square(const Vec& v) {
    if (v.size() < 2) throw Error(ErrorCode::InvalidArgument, "direction must have dimension >= 2");
    if (std::abs(norm2(v) - 1.0) > 1e-12) throw Error(ErrorCode::InvalidArgument, "direction must be a unit vector");
    if (v.back() >= 0.0) return upper_frame(v);
    Vec w(v);
    for (double& c : w) c = -c;
    Frame f = upper_frame(w);
    f.v = v;
    for (Vec& b : f.basis)
        for (double& c : b) c = -c;
    return f;
}

double frame_distance(const Frame& a, const Frame& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.basis.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.basis[i].size(); ++j) {
            double t = a.basis[i][j] - b.basis[i][j];
            s += t * t;
        }
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

double CylinderSpec::face_separation_threshold() const {
    if (min_face_separation >= 0.0) return min_face_separation;
    if (policy == SuitabilityPolicy::Literal) return 100.0 * static_cast<double>(frame.v.size());
    return 2.0;
}

CylinderSpec CylinderSpec::anchored(const Vec& v, double r, double half_width, double height) {
    CylinderSpec s;
    s.center.assign(v.size(), 0.0);
    s.frame = chosen_square(v);
    s.half_width = half_width;
    s.height = height;
    s.scale = r;
    return s;
}

std::size_t DiscreteCylinder::find(const Coord& x) const {
    auto it = std::lower_bound(vertices.begin(), vertices.end(), x);
    if (it == vertices.end() || *it != x) return vertices.size();
    return static_cast<std::size_t>(it - vertices.begin());
}

namespace {

struct CylGeom {
    int d;
    Vec c;
    double rho_l, w_l;
    const CylinderSpec* spec;

    explicit CylGeom(const CylinderSpec& s) : d(static_cast<int>(s.frame.v.size())), spec(&s) {
        if (static_cast<int>(s.center.size()) != d) throw Error(ErrorCode::InvalidArgument, "center dimension mismatch");
        if (!(s.scale > 0.0 && s.height > 0.0 && s.half_width > 0.0))
            throw Error(ErrorCode::InvalidArgument, "cylinder scale, height and width must be positive");
        c.resize(d);
        for (int i = 0; i < d; ++i) c[i] = s.scale * s.center[i];
        rho_l = s.scale * s.height;
        w_l = s.scale * s.half_width;
    }
    double height_of(const Coord& z) const {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += (z[i] - c[i]) * spec->frame.v[i];
        return s;
    }
    double height_of(const Vec& z) const {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += (z[i] - c[i]) * spec->frame.v[i];
        return s;
    }
    // tangential extent: max |t_i| for squares, |t| for discs
    double radial_of(const Coord& z) const {
        double m = 0.0, ss = 0.0;
        for (const Vec& b : spec->frame.basis) {
            double t = 0.0;
            for (int i = 0; i < d; ++i) t += (z[i] - c[i]) * b[i];
            m = std::max(m, std::abs(t));
            ss += t * t;
        }
        return spec->shape == BaseShape::Square ? m : std::sqrt(ss);
    }
    bool in_slab(const Coord& z) const { return std::abs(height_of(z)) <= rho_l + kTol; }
    bool inside(const Coord& z) const { return in_slab(z) && radial_of(z) <= w_l + kTol; }
    int side_of(double s, bool canonical) const {
        if (s > kTol) return 1;
        if (s < -kTol) return -1;
        return canonical ? 1 : -1;
    }
};

}  // namespace

DiscreteCylinder discrete_cylinder(const CylinderSpec& spec, bool throw_if_unsuitable) {
    CylGeom g(spec);
    const int d = g.d;
    const bool canonical = canonical_orientation(spec.frame.v);
    double R = std::sqrt(g.rho_l * g.rho_l + (d - 1) * g.w_l * g.w_l) + 1.0;
    Coord lo{}, hi{};
    for (int i = 0; i < d; ++i) {
        lo[i] = static_cast<int>(std::floor(g.c[i] - R)) - 1;
        hi[i] = static_cast<int>(std::ceil(g.c[i] + R)) + 1;
    }
    std::array<std::int64_t, kMaxDim> stride{};
    std::int64_t total = 1;
    for (int i = d - 1; i >= 0; --i) {
        stride[i] = total;
        total *= hi[i] - lo[i] + 1;
    }
    auto coord_of = [&](std::int64_t idx) {
        Coord z{};
        for (int i = 0; i < d; ++i) {
            z[i] = lo[i] + static_cast<int>(idx / stride[i]);
            idx %= stride[i];
        }
        return z;
    };
    std::vector<char> in(total, 0);
    for (std::int64_t idx = 0; idx < total; ++idx) in[idx] = g.inside(coord_of(idx)) ? 1 : 0;

    // flood the complement from the frame of the local grid
    std::vector<char> outer(total, 0);
    std::vector<std::int64_t> stack;
    for (std::int64_t idx = 0; idx < total; ++idx) {
        Coord z = coord_of(idx);
        bool shell = false;
        for (int i = 0; i < d; ++i)
            if (z[i] == lo[i] || z[i] == hi[i]) shell = true;
        if (shell && !in[idx]) {
            outer[idx] = 1;
            stack.push_back(idx);
        }
    }
    while (!stack.empty()) {
        std::int64_t idx = stack.back();
        stack.pop_back();
        Coord z = coord_of(idx);
        for (int i = 0; i < d; ++i) {
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                int zi = z[i] + sgn;
                if (zi < lo[i] || zi > hi[i]) continue;
                std::int64_t j = idx + sgn * stride[i];
                if (!in[j] && !outer[j]) {
                    outer[j] = 1;
                    stack.push_back(j);
                }
            }
        }
    }

    DiscreteCylinder dc;
    dc.d = d;
    for (std::int64_t idx = 0; idx < total; ++idx) {
        if (!in[idx]) continue;
        Coord z = coord_of(idx);
        dc.vertices.push_back(z);
        double s = g.height_of(z);
        dc.side.push_back(static_cast<signed char>(g.side_of(s, canonical)));
        bool boundary = false, face = false;
        for (int i = 0; i < d; ++i) {
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                std::int64_t j = idx + sgn * stride[i];
                if (outer[j]) boundary = true;
                Coord q = z;
                q[i] += sgn;
                if (!g.in_slab(q)) face = true;
            }
        }
        std::size_t k = dc.vertices.size() - 1;
        if (boundary) (dc.side[k] > 0 ? dc.hemi_plus : dc.hemi_minus).push_back(k);
        if (face) (dc.side[k] > 0 ? dc.face_plus : dc.face_minus).push_back(k);
    }
    // vertices were produced in lexicographic order by construction

    double sep = std::numeric_limits<double>::infinity();
    for (auto a : dc.face_plus) {
        for (auto b : dc.face_minus) {
            double s2 = 0.0;
            for (int i = 0; i < d; ++i) {
                double t = dc.vertices[a][i] - dc.vertices[b][i];
                s2 += t * t;
            }
            sep = std::min(sep, s2);
        }
    }
    dc.face_separation = std::isinf(sep) ? 0.0 : std::sqrt(sep);

    dc.suitable = true;
    if (dc.hemi_plus.empty() || dc.hemi_minus.empty()) {
        dc.suitable = false;
        dc.reason = "empty hemisphere";
    } else if (dc.face_plus.empty() || dc.face_minus.empty()) {
        dc.suitable = false;
        dc.reason = "empty face";
    } else if (dc.face_separation < spec.face_separation_threshold()) {
        dc.suitable = false;
        dc.reason = "faces closer than " + std::to_string(spec.face_separation_threshold());
    }
    if (!dc.suitable && throw_if_unsuitable) throw Error(ErrorCode::Unsuitable, dc.reason);
    return dc;
}

CutResult min_open_cut(const Configuration& cfg, const std::vector<std::int64_t>& sources,
                       const std::vector<std::int64_t>& sinks, const std::vector<std::int64_t>& arena_in) {
    if (sources.empty() || sinks.empty()) throw Error(ErrorCode::InvalidArgument, "sources and sinks must be nonempty");
    const BoxSpec& box = cfg.box();
    std::vector<std::int64_t> arena(arena_in);
    std::sort(arena.begin(), arena.end());
    arena.erase(std::unique(arena.begin(), arena.end()), arena.end());
    auto local = [&](std::int64_t v) -> int {
        auto it = std::lower_bound(arena.begin(), arena.end(), v);
        if (it == arena.end() || *it != v) return -1;
        return static_cast<int>(it - arena.begin());
    };
    const int N = static_cast<int>(arena.size());
    MaxFlow flow(N + 2);
    const int S = N, T = N + 1;
    const std::int64_t inf = static_cast<std::int64_t>(box.d()) * N + 1;
    std::vector<char> role(N, 0);
    for (auto v : sources) {
        int a = local(v);
        if (a < 0) throw Error(ErrorCode::InvalidArgument, "source outside arena");
        role[a] = 1;
    }
    for (auto v : sinks) {
        int a = local(v);
        if (a < 0) throw Error(ErrorCode::InvalidArgument, "sink outside arena");
        if (role[a] == 1) throw Error(ErrorCode::InvalidArgument, "sources and sinks intersect");
        role[a] = 2;
    }
    for (int a = 0; a < N; ++a) {
        if (role[a] == 1) flow.add_arc(S, a, inf);
        if (role[a] == 2) flow.add_arc(a, T, inf);
    }
    struct ArenaEdge {
        EdgeSlot slot;
        int a, b;
    };
    std::vector<ArenaEdge> open_edges;
    for (int a = 0; a < N; ++a) {
        std::int64_t v = arena[a];
        for_each_neighbor(box, v, [&](std::int64_t w, EdgeSlot s) {
            if (w < v || !cfg.open(s)) return;
            int b = local(w);
            if (b < 0) return;
            flow.add_edge(a, b, 1);
            open_edges.push_back({s, a, b});
        });
    }
    CutResult res;
    res.value = flow.solve(S, T);
    std::vector<char> side = flow.source_side();
    for (const auto& e : open_edges)
        if (side[e.a] != side[e.b]) res.witness.push_back(e.slot);
    std::sort(res.witness.begin(), res.witness.end());
    if (static_cast<std::int64_t>(res.witness.size()) != res.value)
        throw Error(ErrorCode::InvalidArgument, "internal: witness size differs from flow value");
    return res;
}

BoxSpec cylinder_box(const CylinderSpec& spec) {
    CylGeom g(spec);
    double R = std::sqrt(g.rho_l * g.rho_l + (g.d - 1) * g.w_l * g.w_l);
    double m = 0.0;
    for (double c : g.c) m = std::max(m, std::abs(c));
    return BoxSpec(g.d, static_cast<int>(std::ceil(R + m)) + 2, 0);
}

std::vector<std::int64_t> to_box_indices(const BoxSpec& box, const DiscreteCylinder& cyl,
                                         const std::vector<std::size_t>& which) {
    std::vector<std::int64_t> out;
    out.reserve(which.size());
    for (auto k : which) {
        if (!box.contains(cyl.vertices[k])) throw Error(ErrorCode::OutOfRange, "cylinder leaves the configuration box");
        out.push_back(box.index(cyl.vertices[k]));
    }
    return out;
}

namespace {

std::vector<std::size_t> all_indices(const DiscreteCylinder& cyl) {
    std::vector<std::size_t> v(cyl.vertices.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
    return v;
}

CutResult cut_between(const Configuration& cfg, const DiscreteCylinder& cyl, const std::vector<std::size_t>& a,
                      const std::vector<std::size_t>& b) {
    if (!cyl.suitable) {
        CutResult r;
        r.suitable = false;
        r.reason = cyl.reason;
        return r;
    }
    const BoxSpec& box = cfg.box();
    CutResult r = min_open_cut(cfg, to_box_indices(box, cyl, a), to_box_indices(box, cyl, b),
                               to_box_indices(box, cyl, all_indices(cyl)));
    r.suitable = true;
    return r;
}

}  // namespace

CutResult xi_hemi(const Configuration& cfg, const DiscreteCylinder& cyl) {
    return cut_between(cfg, cyl, cyl.hemi_plus, cyl.hemi_minus);
}

CutResult xi_face(const Configuration& cfg, const DiscreteCylinder& cyl) {
    return cut_between(cfg, cyl, cyl.face_plus, cyl.face_minus);
}

CutResult xi_hemi(const Configuration& cfg, const CylinderSpec& spec) { return xi_hemi(cfg, discrete_cylinder(spec)); }
CutResult xi_face(const Configuration& cfg, const CylinderSpec& spec) { return xi_face(cfg, discrete_cylinder(spec)); }

std::vector<EdgeSlot> equatorial_cut(const BoxSpec& box, const DiscreteCylinder& cyl) {
    std::vector<EdgeSlot> out;
    for (std::size_t k = 0; k < cyl.vertices.size(); ++k) {
        for (int i = 0; i < cyl.d; ++i) {
            Coord q = cyl.vertices[k];
            q[i] += 1;
            std::size_t j = cyl.find(q);
            if (j == cyl.vertices.size() || cyl.side[j] == cyl.side[k]) continue;
            if (!box.contains(cyl.vertices[k]) || !box.contains(q))
                throw Error(ErrorCode::OutOfRange, "cylinder leaves the configuration box");
            out.push_back(slot_of(box, box.index(cyl.vertices[k]), i));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<EdgeSlot> equatorial_ring(const BoxSpec& box, const CylinderSpec& spec, const DiscreteCylinder& cyl,
                                      double radius) {
    CylGeom g(spec);
    std::vector<EdgeSlot> out;
    for (std::size_t k = 0; k < cyl.vertices.size(); ++k) {
        for (int i = 0; i < cyl.d; ++i) {
            Coord q = cyl.vertices[k];
            q[i] += 1;
            if (cyl.find(q) == cyl.vertices.size()) continue;
            Vec mid(g.d);
            for (int j = 0; j < g.d; ++j) mid[j] = cyl.vertices[k][j] + (j == i ? 0.5 : 0.0);
            double s = g.height_of(mid);
            double rad = 0.0, ss = 0.0;
            for (const Vec& b : spec.frame.basis) {
                double t = 0.0;
                for (int j = 0; j < g.d; ++j) t += (mid[j] - g.c[j]) * b[j];
                rad = std::max(rad, std::abs(t));
                ss += t * t;
            }
            if (spec.shape == BaseShape::Disc) rad = std::sqrt(ss);
            double gap = g.w_l - rad;
            if (s * s + gap * gap <= radius * radius)
                out.push_back(slot_of(box, box.index(cyl.vertices[k]), i));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string cut_result_json(const BoxSpec& box, const CutResult& res, const CylinderSpec& spec) {
    nlohmann::json j;
    j["value"] = res.value;
    j["suitable"] = res.suitable;
    j["reason"] = res.reason;
    std::vector<std::uint64_t> ids;
    for (auto s : res.witness) ids.push_back(canonical_edge_id(box, s));
    j["witness_edges"] = ids;
    nlohmann::json sp;
    sp["shape"] = spec.shape == BaseShape::Square ? "square" : "disc";
    sp["center"] = spec.center;
    sp["v"] = spec.frame.v;
    sp["basis"] = spec.frame.basis;
    sp["half_width"] = spec.half_width;
    sp["height"] = spec.height;
    sp["scale"] = spec.scale;
    sp["min_face_separation"] = spec.face_separation_threshold();
    j["spec"] = sp;
    return j.dump(2);
}

}  // namespace perciso
