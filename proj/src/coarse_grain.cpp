#include "perciso/coarse_grain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"
#include "perciso/errors.hpp"
#include "perciso/flow.hpp"
#include "perciso/parallel.hpp"
#include "perciso/rng.hpp"

namespace perciso {

CubeGrid::CubeGrid(int d_, int k_) : d(d_), k(k_) {
    if (d < 2 || d > kMaxDim) throw Error(ErrorCode::InvalidArgument, "dimension out of range");
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "renormalization parameter must be >= 1");
}

Coord CubeGrid::center(const Coord& x) const {
    Coord c{};
    for (int i = 0; i < d; ++i) c[i] = 2 * k * x[i];
    return c;
}

bool CubeGrid::in_cube(const Coord& z, const Coord& x, int half) const {
    for (int i = 0; i < d; ++i)
        if (std::abs(z[i] - 2 * k * x[i]) > half) return false;
    return true;
}

std::vector<Coord> CubeGrid::cubes_containing(const Coord& z) const {
    std::vector<Coord> out{Coord{}};
    for (int i = 0; i < d; ++i) {
        // nearest centre, plus the neighbour when z sits on a shared face
        int q = static_cast<int>(std::floor((z[i] + k) / static_cast<double>(2 * k)));
        std::vector<int> opts{q};
        if (z[i] - 2 * k * q == -k) opts.push_back(q - 1);
        std::vector<Coord> next;
        for (const Coord& c : out)
            for (int o : opts) {
                Coord e = c;
                e[i] = o;
                next.push_back(e);
            }
        out.swap(next);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string cube_type_name(CubeType t) {
    switch (t) {
        case CubeType::None: return "none";
        case CubeType::TypeI: return "type-I";
        case CubeType::TypeII: return "type-II";
        case CubeType::Both: return "both";
    }
    return "?";
}

std::string pond_status_name(PondStatus s) {
    switch (s) {
        case PondStatus::Live: return "live";
        case PondStatus::AlmostLive: return "almost-live";
        case PondStatus::Dead: return "dead";
    }
    return "?";
}

namespace {

struct DSU {
    std::vector<int> parent;
    explicit DSU(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) {
        a = find(a), b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

CubeType classify_cube(const Configuration& cfg, const CubeGrid& grid, const Coord& x) {
    const BoxSpec& box = cfg.box();
    const int d = grid.d, k = grid.k, R = 3 * k, side = 2 * R + 1;
    if (box.d() != d) throw Error(ErrorCode::InvalidArgument, "dimension mismatch");
    Coord c = grid.center(x);
    for (int i = 0; i < d; ++i)
        if (std::abs(c[i]) + R > box.half()) throw Error(ErrorCode::OutOfRange, "3k-cube leaves the box");
    int total = 1;
    for (int i = 0; i < d; ++i) total *= side;
    auto rel = [&](int idx) {
        Coord r{};
        for (int i = d - 1; i >= 0; --i) {
            r[i] = idx % side - R;
            idx /= side;
        }
        return r;
    };
    auto on_boundary = [&](const Coord& r) {
        for (int i = 0; i < d; ++i)
            if (std::abs(r[i]) == R) return true;
        return false;
    };
    DSU dsu(total);
    std::vector<int> stride(d);
    for (int i = d - 1, s = 1; i >= 0; --i, s *= side) stride[i] = s;
    for (int idx = 0; idx < total; ++idx) {
        Coord r = rel(idx);
        Coord z{};
        for (int i = 0; i < d; ++i) z[i] = c[i] + r[i];
        std::int64_t v = box.index(z);
        bool bd = on_boundary(r);
        for (int a = 0; a < d; ++a) {
            if (r[a] == R) continue;
            Coord r2 = r;
            r2[a] += 1;
            if (bd && on_boundary(r2)) continue;  // not internal
            if (cfg.open(v, a)) dsu.unite(idx, idx + stride[a]);
        }
    }
    // clusters meeting B+ and the boundary of B3
    std::map<int, std::pair<bool, bool>> flags;
    for (int idx = 0; idx < total; ++idx) {
        Coord r = rel(idx);
        bool plus = true;
        for (int i = 0; i < d; ++i) plus = plus && std::abs(r[i]) <= 2 * k + 1;
        auto& f = flags[dsu.find(idx)];
        f.first = f.first || plus;
        f.second = f.second || on_boundary(r);
    }
    std::vector<int> crossing;
    for (const auto& [root, f] : flags)
        if (f.first && f.second) crossing.push_back(root);
    if (crossing.empty()) return CubeType::None;
    bool type2 = crossing.size() >= 2;

    // surfaces: faces of the 3^d k-cubes in B3, id = (axis, level among -3k,-k,k,3k, slots of the other axes)
    int per_axis = 4;
    for (int i = 1; i < d; ++i) per_axis *= 3;
    const int n_surf = d * per_axis;
    bool type1 = false;
    for (int root : crossing) {
        std::vector<char> met(n_surf, 0);
        for (int idx = 0; idx < total; ++idx) {
            if (dsu.find(idx) != root) continue;
            Coord r = rel(idx);
            for (int a = 0; a < d; ++a) {
                if ((r[a] + R) % (2 * k) != 0) continue;
                int level = (r[a] + R) / (2 * k);
                // slots of the other axes (two when on a shared face)
                std::vector<int> ids{level};
                for (int j = 0; j < d; ++j) {
                    if (j == a) continue;
                    std::vector<int> slots;
                    for (int s = -1; s <= 1; ++s)
                        if (std::abs(r[j] - 2 * k * s) <= k) slots.push_back(s + 1);
                    std::vector<int> next;
                    for (int id : ids)
                        for (int s : slots) next.push_back(id * 3 + s);
                    ids.swap(next);
                }
                for (int id : ids) met[a * per_axis + id] = 1;
            }
        }
        if (std::find(met.begin(), met.end(), 0) != met.end()) {
            type1 = true;
            break;
        }
    }
    if (type1 && type2) return CubeType::Both;
    if (type1) return CubeType::TypeI;
    return type2 ? CubeType::TypeII : CubeType::None;
}

std::vector<TypeRateRow> type_rate(double p, int d, const std::vector<int>& ks, int samples, std::uint64_t seed) {
    if (samples < 1) throw Error(ErrorCode::InvalidArgument, "samples must be >= 1");
    std::vector<TypeRateRow> rows;
    for (std::size_t j = 0; j < ks.size(); ++j) {
        const int k = ks[j];
        CubeGrid grid(d, k);
        BoxSpec box(d, 3 * k, 0);
        std::uint64_t sk = derive_seed(seed, j);
        auto bad = parallel_map<char>(static_cast<std::size_t>(samples), [&](std::size_t i) {
            auto cfg = sample_configuration(p, box, derive_seed(sk, i));
            return static_cast<char>(is_bad(classify_cube(cfg, grid, Coord{})) ? 1 : 0);
        });
        TypeRateRow row;
        row.k = k;
        row.samples = samples;
        for (char b : bad) row.bad += b;
        row.rate = static_cast<double>(row.bad) / samples;
        row.stderr_ = std::sqrt(row.rate * (1.0 - row.rate) / samples);
        rows.push_back(row);
    }
    return rows;
}

namespace {

std::vector<Coord> cubes_of(const BoxSpec& box, const CubeGrid& grid, const std::vector<std::int64_t>& verts) {
    std::set<Coord> out;
    for (auto v : verts)
        for (const Coord& x : grid.cubes_containing(box.coord(v))) out.insert(x);
    return {out.begin(), out.end()};
}

}  // namespace

CoarseBoundary coarse_boundary(const Subgraph& G, const CubeGrid& grid) {
    CoarseBoundary cb;
    if (G.empty()) return cb;
    const BoxSpec& box = G.box;
    OuterBoundary ob = outer_boundaries(G);
    std::vector<std::int64_t> ends;
    for (auto s : ob.edges) {
        ends.push_back(slot_vertex(box, s));
        ends.push_back(slot_head(box, s));
    }
    cb.a_cubes = cubes_of(box, grid, ends);
    std::vector<std::int64_t> all(G.vertices);
    all.insert(all.end(), ends.begin(), ends.end());
    cb.g_cubes = cubes_of(box, grid, all);
    return cb;
}

Subgraph giant_blob(const Configuration& cfg, int radius) {
    const BoxSpec& box = cfg.box();
    ClusterLabeling lab = clusters(cfg);
    if (lab.giant_label == ClusterLabeling::kIsolated) throw Error(ErrorCode::EmptyCluster, "no open edge");
    auto linf = [&](std::int64_t v) {
        Coord z = box.coord(v);
        int m = 0;
        for (int i = 0; i < box.d(); ++i) m = std::max(m, std::abs(z[i]));
        return m;
    };
    std::int64_t start = -1;
    int best = INT32_MAX;
    for (std::int64_t v = 0; v < box.vertex_count(); ++v)
        if (lab.label[v] == lab.giant_label && linf(v) < best) best = linf(v), start = v;
    if (best > radius) throw Error(ErrorCode::EmptyCluster, "giant cluster misses the ball");
    std::vector<char> seen(box.vertex_count(), 0);
    std::vector<std::int64_t> out{start};
    seen[start] = 1;
    for (std::size_t i = 0; i < out.size(); ++i)
        for_each_neighbor(box, out[i], [&](std::int64_t w, EdgeSlot s) {
            if (cfg.open(s) && !seen[w] && linf(w) <= radius) {
                seen[w] = 1;
                out.push_back(w);
            }
        });
    return Subgraph(box, std::move(out));
}

bool separates_from_hull(const Configuration& cfg, const Subgraph& G, const std::vector<EdgeSlot>& cut) {
    const BoxSpec& box = cfg.box();
    std::vector<char> removed(box.slot_count(), 0);
    for (auto s : cut) removed[s] = 1;
    std::vector<char> seen(box.vertex_count(), 0);
    std::vector<std::int64_t> stack(G.vertices);
    for (auto v : stack) seen[v] = 1;
    while (!stack.empty()) {
        std::int64_t v = stack.back();
        stack.pop_back();
        if (box.on_hull(box.coord(v))) return false;
        for_each_neighbor(box, v, [&](std::int64_t w, EdgeSlot s) {
            if (cfg.open(s) && !removed[s] && !seen[w]) {
                seen[w] = 1;
                stack.push_back(w);
            }
        });
    }
    return true;
}

ZhangDecomposition zhang_decompose(const Configuration& cfg, const Subgraph& G, const CubeGrid& grid) {
    const BoxSpec& box = cfg.box();
    const int d = grid.d, k = grid.k;
    if (box.d() != d || !(G.box == box)) throw Error(ErrorCode::InvalidArgument, "dimension or box mismatch");
    if (G.empty()) throw Error(ErrorCode::InvalidArgument, "G is empty");
    if (!open_connected(G, cfg)) throw Error(ErrorCode::InvalidArgument, "G is not connected");
    {
        bool inside_some = true;
        for (int i = 0; i < d && inside_some; ++i) {
            int lo = INT32_MAX, hi = INT32_MIN;
            for (auto v : G.vertices) {
                Coord z = box.coord(v);
                lo = std::min(lo, z[i]);
                hi = std::max(hi, z[i]);
            }
            // some centre 2kx with hi - 3k <= 2kx <= lo + 3k
            int xmin = static_cast<int>(std::ceil((hi - 3.0 * k) / (2.0 * k)));
            inside_some = 2 * k * xmin <= lo + 3 * k;
        }
        if (inside_some) throw Error(ErrorCode::HypothesisViolated, "G lies inside a 3k-cube");
    }

    ZhangDecomposition z;
    z.grid = grid;
    CoarseBoundary cb = coarse_boundary(G, grid);
    z.g_cubes = cb.g_cubes;
    z.a_cubes = cb.a_cubes;

    // modified configuration: close the open outer-boundary edges
    OuterBoundary ob = outer_boundaries(G);
    z.omega_prime = cfg;
    for (auto s : ob.edges)
        if (cfg.open(s)) {
            z.closed_edges.push_back(s);
            z.omega_prime.set_open(s, false);
        }
    const Configuration& wp = z.omega_prime;

    // cube domain: closed k-cubes inside the box
    const int h = box.half();
    const int xlo = static_cast<int>(std::ceil((k - h) / (2.0 * k)));
    const int xhi = static_cast<int>(std::floor((h - k) / (2.0 * k)));
    const int W = xhi - xlo + 1;
    if (W < 3) throw Error(ErrorCode::OceanAmbiguous, "box too small for the cube grid");
    std::int64_t ncubes = 1;
    for (int i = 0; i < d; ++i) ncubes *= W;
    auto cidx = [&](const Coord& x) {
        std::int64_t id = 0;
        for (int i = 0; i < d; ++i) id = id * W + (x[i] - xlo);
        return id;
    };
    auto cube_at = [&](std::int64_t id) {
        Coord x{};
        for (int i = d - 1; i >= 0; --i) {
            x[i] = static_cast<int>(id % W) + xlo;
            id /= W;
        }
        return x;
    };
    auto in_domain = [&](const Coord& x) {
        for (int i = 0; i < d; ++i)
            if (x[i] < xlo || x[i] > xhi) return false;
        return true;
    };
    auto star_neighbors = [&](const Coord& x, auto&& fn) {
        int total = 1;
        for (int i = 0; i < d; ++i) total *= 3;
        for (int code = 0; code < total; ++code) {
            Coord y = x;
            bool zero = true;
            int t = code;
            for (int i = 0; i < d; ++i) {
                int o = t % 3 - 1;
                t /= 3;
                y[i] += o;
                zero = zero && o == 0;
            }
            if (!zero && in_domain(y)) fn(y);
        }
    };

    std::vector<char> in_g(ncubes, 0);
    for (const Coord& x : z.g_cubes) {
        if (!in_domain(x)) throw Error(ErrorCode::OceanAmbiguous, "G reaches the edge of the cube domain");
        in_g[cidx(x)] = 1;
    }
    // complement components; -1 = ocean, i >= 0 = pond i
    std::vector<int> comp(ncubes, -2);
    auto flood = [&](std::int64_t start, int label) {
        std::vector<std::int64_t> stack{start};
        comp[start] = label;
        while (!stack.empty()) {
            Coord x = cube_at(stack.back());
            stack.pop_back();
            star_neighbors(x, [&](const Coord& y) {
                std::int64_t j = cidx(y);
                if (!in_g[j] && comp[j] == -2) {
                    comp[j] = label;
                    stack.push_back(j);
                }
            });
        }
    };
    for (std::int64_t id = 0; id < ncubes; ++id) {
        Coord x = cube_at(id);
        bool edge = false;
        for (int i = 0; i < d; ++i) edge = edge || x[i] == xlo || x[i] == xhi;
        if (!edge) continue;
        if (in_g[id]) throw Error(ErrorCode::OceanAmbiguous, "G reaches the edge of the cube domain");
        if (comp[id] == -2) flood(id, -1);
    }
    int n_ponds = 0;
    for (std::int64_t id = 0; id < ncubes; ++id)
        if (!in_g[id] && comp[id] == -2) flood(id, n_ponds++);
    z.ponds.resize(n_ponds);
    for (std::int64_t id = 0; id < ncubes; ++id) {
        if (comp[id] == -1) z.ocean.push_back(cube_at(id));
        if (comp[id] >= 0) z.ponds[comp[id]].cubes.push_back(cube_at(id));
    }

    // vertex regions: -1 ocean (or outside every domain cube), i >= 0 pond, -2 otherwise
    const auto nv = box.vertex_count();
    std::vector<int> region(nv, -2);
    std::vector<char> in_gcube(nv, 0);
    for (std::int64_t v = 0; v < nv; ++v) {
        bool any = false;
        for (const Coord& x : grid.cubes_containing(box.coord(v))) {
            if (!in_domain(x)) continue;
            any = true;
            std::int64_t id = cidx(x);
            if (in_g[id]) in_gcube[v] = 1;
            else region[v] = comp[id];
        }
        if (!any) region[v] = -1;
    }

    ClusterLabeling lab = clusters(wp);
    auto cluster_of = [&](std::int64_t v) { return lab.label[v] >= 0 ? lab.label[v] : nv + v; };
    std::set<std::int64_t> ocean_clusters;
    std::vector<std::set<std::int64_t>> pond_clusters(n_ponds);
    std::map<std::int64_t, std::vector<int>> ponds_of_cluster;
    for (std::int64_t v = 0; v < nv; ++v) {
        if (region[v] == -1) ocean_clusters.insert(cluster_of(v));
        if (region[v] >= 0) pond_clusters[region[v]].insert(cluster_of(v));
    }
    for (int i = 0; i < n_ponds; ++i)
        for (auto c : pond_clusters[i]) ponds_of_cluster[c].push_back(i);
    std::vector<int> queue;
    for (int i = 0; i < n_ponds; ++i) {
        for (auto c : pond_clusters[i])
            if (ocean_clusters.count(c)) {
                z.ponds[i].status = PondStatus::Live;
                queue.push_back(i);
                break;
            }
    }
    for (std::size_t q = 0; q < queue.size(); ++q)
        for (auto c : pond_clusters[queue[q]])
            for (int j : ponds_of_cluster[c])
                if (z.ponds[j].status == PondStatus::Dead) {
                    z.ponds[j].status = PondStatus::AlmostLive;
                    queue.push_back(j);
                }
    std::set<std::int64_t> active_clusters(ocean_clusters);
    for (int i = 0; i < n_ponds; ++i)
        if (z.ponds[i].status != PondStatus::Dead) active_clusters.insert(pond_clusters[i].begin(), pond_clusters[i].end());

    for (std::int64_t v = 0; v < nv; ++v) {
        if (!in_gcube[v] || !active_clusters.count(cluster_of(v))) continue;
        if (region[v] == -1) continue;
        if (region[v] >= 0 && z.ponds[region[v]].status != PondStatus::Dead) continue;
        z.bridge.push_back(v);
    }
    {
        std::set<Coord> bc;
        for (auto v : z.bridge)
            for (const Coord& x : grid.cubes_containing(box.coord(v)))
                if (in_domain(x)) bc.insert(x);
        z.bridge_cubes.assign(bc.begin(), bc.end());
    }

    std::set<Coord> gam(z.bridge_cubes.begin(), z.bridge_cubes.end());
    for (std::int64_t id = 0; id < ncubes; ++id) {
        if (comp[id] != -1 && !(comp[id] >= 0 && z.ponds[comp[id]].status != PondStatus::Dead)) continue;
        star_neighbors(cube_at(id), [&](const Coord& y) {
            if (comp[cidx(y)] != comp[id]) gam.insert(y);
        });
    }
    z.gamma_cubes.assign(gam.begin(), gam.end());

    // minimal closed cutset inside the augmented cubes
    std::vector<char> eligible(box.slot_count(), 0);
    for (const Coord& x : z.gamma_cubes) {
        Coord c = grid.center(x);
        const int R = 2 * k + 1;
        Coord lo{}, hi{};
        for (int i = 0; i < d; ++i) {
            lo[i] = std::max(c[i] - R, -h);
            hi[i] = std::min(c[i] + R, h);
        }
        Coord p = lo;
        while (true) {
            std::int64_t v = box.index(p);
            for (int a = 0; a < d; ++a)
                if (p[a] < hi[a] && !wp.open(v, a)) eligible[slot_of(box, v, a)] = 1;
            int i = d - 1;
            while (i >= 0 && ++p[i] > hi[i]) p[i] = lo[i], --i;
            if (i < 0) break;
        }
    }
    const std::int64_t inf = box.edge_count() + 1;
    MaxFlow flow(static_cast<int>(nv) + 2);
    const int S = static_cast<int>(nv), T = S + 1;
    for (std::int64_t v = 0; v < nv; ++v)
        for (int a = 0; a < d; ++a) {
            EdgeSlot s = slot_of(box, v, a);
            if (!box.edge_exists(s)) continue;
            flow.add_edge(static_cast<int>(v), static_cast<int>(slot_head(box, s)), eligible[s] ? 1 : inf);
        }
    for (auto v : G.vertices) flow.add_arc(S, static_cast<int>(v), inf);
    for (std::int64_t v = 0; v < nv; ++v)
        if (box.on_hull(box.coord(v))) flow.add_arc(static_cast<int>(v), T, inf);
    std::int64_t value = flow.solve(S, T, inf);
    if (value >= inf) throw Error(ErrorCode::HypothesisViolated, "augmented cubes hold no closed cutset");
    std::vector<char> side = flow.source_side();
    for (std::int64_t v = 0; v < nv; ++v)
        for (int a = 0; a < d; ++a) {
            EdgeSlot s = slot_of(box, v, a);
            if (!box.edge_exists(s)) continue;
            if (side[v] != side[slot_head(box, s)]) z.gamma.push_back(s);
        }

    for (const Coord& x : z.gamma_cubes) z.gamma_types.push_back(classify_cube(wp, grid, x));
    return z;
}

std::string decomposition_json(const ZhangDecomposition& z) {
    const int d = z.grid.d;
    auto cubes = [&](const std::vector<Coord>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const Coord& x : v) a.push_back(std::vector<int>(x.begin(), x.begin() + d));
        return a;
    };
    nlohmann::json j;
    j["d"] = d;
    j["k"] = z.grid.k;
    j["g_cubes"] = cubes(z.g_cubes);
    j["a_cubes"] = cubes(z.a_cubes);
    j["ocean_size"] = z.ocean.size();
    nlohmann::json ponds = nlohmann::json::array();
    for (const auto& p : z.ponds) ponds.push_back({{"status", pond_status_name(p.status)}, {"cubes", cubes(p.cubes)}});
    j["ponds"] = ponds;
    j["bridge_cubes"] = cubes(z.bridge_cubes);
    j["gamma_cubes"] = cubes(z.gamma_cubes);
    nlohmann::json types = nlohmann::json::array();
    for (auto t : z.gamma_types) types.push_back(cube_type_name(t));
    j["gamma_types"] = types;
    std::vector<std::uint64_t> ids;
    for (auto s : z.gamma) ids.push_back(canonical_edge_id(z.omega_prime.box(), s));
    std::sort(ids.begin(), ids.end());
    j["gamma_edges"] = ids;
    return j.dump(2);
}

}  // namespace perciso
