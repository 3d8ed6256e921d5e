#include "perciso/cheeger.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "perciso/cylinder_cuts.hpp"
#include "perciso/errors.hpp"
#include "perciso/parallel.hpp"
#include "perciso/rng.hpp"

namespace perciso {

namespace {

std::int64_t factorial(int d) {
    std::int64_t f = 1;
    for (int i = 2; i <= d; ++i) f *= i;
    return f;
}

int open_degree(const Configuration& cfg, std::int64_t v) {
    int deg = 0;
    for_each_neighbor(cfg.box(), v, [&](std::int64_t, EdgeSlot s) { deg += cfg.open(s) ? 1 : 0; });
    return deg;
}

// a/b < c/e
bool ratio_less(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t e) {
    return static_cast<__int128>(a) * e < static_cast<__int128>(c) * b;
}

CheegerSolution make_solution(const CheegerProblem& prob, std::vector<std::int64_t> verts, CheegerMethod m) {
    CheegerSolution sol;
    sol.witness = Subgraph(prob.cfg.box(), std::move(verts));
    sol.den = static_cast<std::int64_t>(sol.witness.size());
    sol.num = static_cast<std::int64_t>(open_edge_boundary(sol.witness, prob.cfg).size());
    sol.method = m;
    return sol;
}

}  // namespace

std::string method_name(CheegerMethod m) {
    switch (m) {
        case CheegerMethod::Exact: return "exact";
        case CheegerMethod::Anneal: return "anneal";
        case CheegerMethod::Carve: return "carve";
    }
    return "?";
}

CheegerProblem CheegerProblem::from_configuration(const Configuration& cfg, std::int64_t cap) {
    if (cfg.box().pad() < 1) throw Error(ErrorCode::InvalidArgument, "Cheeger problems need pad >= 1");
    CheegerProblem prob;
    prob.cfg = cfg;
    prob.cn = giant_cluster_in_box(cfg);
    if (prob.cn.empty()) throw Error(ErrorCode::EmptyCluster, "giant cluster misses the core box");
    prob.cap = cap >= 0 ? cap : static_cast<std::int64_t>(prob.cn.size()) / factorial(cfg.box().d());
    return prob;
}

bool better_solution(const CheegerSolution& a, const CheegerSolution& b) {
    if (ratio_less(a.num, a.den, b.num, b.den)) return true;
    if (ratio_less(b.num, b.den, a.num, a.den)) return false;
    return a.witness.vertices < b.witness.vertices;
}

bool audit_solution(const CheegerProblem& prob, const CheegerSolution& sol) {
    const Subgraph& H = sol.witness;
    if (H.empty() || static_cast<std::int64_t>(H.size()) > prob.cap) return false;
    if (sol.den != static_cast<std::int64_t>(H.size())) return false;
    for (auto v : H.vertices)
        if (!prob.cn.contains(v)) return false;
    return static_cast<std::int64_t>(open_edge_boundary(H, prob.cfg).size()) == sol.num;
}

CheegerSolution cheeger_exact(const CheegerProblem& prob) {
    if (prob.cap < 1) throw Error(ErrorCode::InfeasibleCap, "volume cap is below 1");
    const auto& cn = prob.cn.vertices;
    const int m = static_cast<int>(cn.size());
    if (m > static_cast<int>(kExactBudget)) throw Error(ErrorCode::BudgetExceeded, "exact search needs |Cn| <= 22");
    const BoxSpec& box = prob.cfg.box();
    std::vector<std::uint32_t> adj(m, 0);
    std::vector<int> deg(m);
    for (int i = 0; i < m; ++i) {
        deg[i] = open_degree(prob.cfg, cn[i]);
        for_each_neighbor(box, cn[i], [&](std::int64_t w, EdgeSlot s) {
            if (!prob.cfg.open(s)) return;
            auto it = std::lower_bound(cn.begin(), cn.end(), w);
            if (it != cn.end() && *it == w) adj[i] |= 1u << (it - cn.begin());
        });
    }
    const int cap = static_cast<int>(std::min<std::int64_t>(prob.cap, m));
    std::int64_t best_b = 1, best_s = 0;
    std::uint32_t best_mask = 0;
    auto as_list = [&](std::uint32_t mask) {
        std::vector<int> out;
        for (int i = 0; i < m; ++i)
            if (mask >> i & 1u) out.push_back(i);
        return out;
    };
    auto record = [&](std::uint32_t mask, std::int64_t s, std::int64_t b) {
        if (best_s == 0 || ratio_less(b, s, best_b, best_s)) {
            best_b = b, best_s = s, best_mask = mask;
        } else if (!ratio_less(best_b, best_s, b, s) && as_list(mask) < as_list(best_mask)) {
            best_b = b, best_s = s, best_mask = mask;
        }
    };
    // each connected set is grown once from its smallest vertex
    std::function<void(std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t, int, std::int64_t)> extend =
        [&](std::uint32_t sub, std::uint32_t ext, std::uint32_t nbhd, std::uint32_t above, int size, std::int64_t b) {
            record(sub, size, b);
            if (size == cap) return;
            while (ext) {
                int w = std::countr_zero(ext);
                ext &= ext - 1;
                std::uint32_t next = ext | (adj[w] & ~nbhd & above);
                std::int64_t nb = b + deg[w] - 2 * std::popcount(adj[w] & sub);
                extend(sub | (1u << w), next, nbhd | adj[w], above, size + 1, nb);
            }
        };
    for (int r = 0; r < m; ++r) {
        std::uint32_t above = r + 1 >= 32 ? 0u : ~((1u << (r + 1)) - 1u);
        extend(1u << r, adj[r] & above, (1u << r) | adj[r], above, 1, deg[r]);
    }
    std::vector<std::int64_t> verts;
    for (int i : as_list(best_mask)) verts.push_back(cn[i]);
    CheegerSolution sol = make_solution(prob, std::move(verts), CheegerMethod::Exact);
    sol.certified = true;
    return sol;
}

namespace {

class Chain {
public:
    Chain(const CheegerProblem& prob, const AnnealParams& params, std::uint64_t seed)
        : prob_(prob), box_(prob.cfg.box()), params_(params), rng_(seed) {
        const auto nv = box_.vertex_count();
        in_cn_.assign(nv, 0);
        in_h_.assign(nv, 0);
        pos_.assign(nv, -1);
        stamp_.assign(nv, 0);
        deg_.assign(nv, 0);
        for (auto v : prob.cn.vertices) {
            in_cn_[v] = 1;
            deg_[v] = open_degree(prob.cfg, v);
        }
    }

    void start(const std::vector<std::int64_t>& init) {
        for (auto v : hlist_) in_h_[v] = 0, pos_[v] = -1;
        hlist_.clear();
        b_ = 0;
        for (auto v : init) insert(v);
    }

    std::vector<std::int64_t> seed_set(const Subgraph& seed) {
        // largest open component of seed ∩ Cn, truncated to the cap in BFS order
        ++gen_;
        std::vector<std::int64_t> best;
        for (auto s : seed.vertices) {
            if (!in_cn_[s] || stamp_[s] == gen_) continue;
            std::vector<std::int64_t> comp{s};
            stamp_[s] = gen_;
            for (std::size_t i = 0; i < comp.size(); ++i)
                for_each_neighbor(box_, comp[i], [&](std::int64_t w, EdgeSlot sl) {
                    if (prob_.cfg.open(sl) && in_cn_[w] && stamp_[w] != gen_ && seed.contains(w)) {
                        stamp_[w] = gen_;
                        comp.push_back(w);
                    }
                });
            if (comp.size() > best.size()) best.swap(comp);
        }
        if (static_cast<std::int64_t>(best.size()) > prob_.cap) best.resize(prob_.cap);
        return best;
    }

    std::int64_t random_cn_vertex() { return prob_.cn.vertices[rng_.below(prob_.cn.size())]; }

    void run(std::vector<std::int64_t>& best, std::int64_t& best_b) {
        const std::int64_t per = std::max<std::int64_t>(1, params_.proposals / std::max(1, params_.cooling_steps));
        double T = params_.t0;
        record(best, best_b);
        for (std::int64_t it = 0; it < params_.proposals; ++it) {
            if (it > 0 && it % per == 0) T *= params_.cooling;
            double u = rng_.uniform();
            if (u < params_.translate_rate)
                try_translate(T, best, best_b);
            else if (u < params_.translate_rate + 0.5 * (1.0 - params_.translate_rate))
                try_add(T, best, best_b);
            else
                try_remove(T, best, best_b);
        }
    }

private:
    const CheegerProblem& prob_;
    const BoxSpec& box_;
    const AnnealParams& params_;
    SplitMix64 rng_;
    std::vector<char> in_cn_, in_h_;
    std::vector<std::int64_t> pos_;
    std::vector<std::uint32_t> stamp_;
    std::uint32_t gen_ = 0;
    std::vector<int> deg_;
    std::vector<std::int64_t> hlist_;
    std::int64_t b_ = 0;

    std::int64_t size() const { return static_cast<std::int64_t>(hlist_.size()); }

    int h_neighbors(std::int64_t v) const {
        int c = 0;
        for_each_neighbor(box_, v, [&](std::int64_t w, EdgeSlot s) { c += (prob_.cfg.open(s) && in_h_[w]) ? 1 : 0; });
        return c;
    }

    void insert(std::int64_t v) {
        b_ += deg_[v] - 2 * h_neighbors(v);
        in_h_[v] = 1;
        pos_[v] = size();
        hlist_.push_back(v);
    }

    void erase(std::int64_t v) {
        in_h_[v] = 0;
        std::int64_t p = pos_[v];
        hlist_[p] = hlist_.back();
        pos_[hlist_[p]] = p;
        hlist_.pop_back();
        pos_[v] = -1;
        b_ -= deg_[v] - 2 * h_neighbors(v);
    }

    bool accept(double cur, double next, double T) {
        if (next <= cur) return true;
        return rng_.uniform() < std::exp(-(next - cur) / T);
    }

    void record(std::vector<std::int64_t>& best, std::int64_t& best_b) {
        if (best.empty() || ratio_less(b_, size(), best_b, static_cast<std::int64_t>(best.size()))) {
            best = hlist_;
            best_b = b_;
        }
    }

    void try_add(double T, std::vector<std::int64_t>& best, std::int64_t& best_b) {
        if (size() >= prob_.cap) return;
        std::int64_t h = hlist_[rng_.below(hlist_.size())];
        int dir = static_cast<int>(rng_.below(2 * box_.d()));
        int axis = dir / 2;
        Coord x = box_.coord(h);
        x[axis] += (dir & 1) ? -1 : 1;
        if (!box_.contains(x)) return;
        std::int64_t w = box_.index(x);
        EdgeSlot s = (dir & 1) ? slot_of(box_, w, axis) : slot_of(box_, h, axis);
        if (!prob_.cfg.open(s) || !in_cn_[w] || in_h_[w]) return;
        std::int64_t nb = b_ + deg_[w] - 2 * h_neighbors(w);
        double cur = static_cast<double>(b_) / size(), next = static_cast<double>(nb) / (size() + 1);
        if (!accept(cur, next, T)) return;
        insert(w);
        record(best, best_b);
    }

    void try_remove(double T, std::vector<std::int64_t>& best, std::int64_t& best_b) {
        if (size() <= 1) return;
        std::int64_t h = hlist_[rng_.below(hlist_.size())];
        std::vector<std::int64_t> nbrs;
        for_each_neighbor(box_, h, [&](std::int64_t w, EdgeSlot s) {
            if (prob_.cfg.open(s) && in_h_[w]) nbrs.push_back(w);
        });
        std::int64_t nb = b_ - deg_[h] + 2 * static_cast<std::int64_t>(nbrs.size());
        double cur = static_cast<double>(b_) / size(), next = static_cast<double>(nb) / (size() - 1);
        if (next > cur && rng_.uniform() >= std::exp(-(next - cur) / T)) return;
        if (nbrs.size() > 1 && !still_connected(h, nbrs)) return;
        erase(h);
        record(best, best_b);
    }

    // local BFS in H \ {h}; gives up (reports unsafe) after the budget
    bool still_connected(std::int64_t h, const std::vector<std::int64_t>& nbrs) {
        ++gen_;
        stamp_[h] = gen_;
        std::vector<std::int64_t> queue{nbrs[0]};
        stamp_[nbrs[0]] = gen_;
        std::size_t found = 1;
        auto is_target = [&](std::int64_t w) { return std::find(nbrs.begin(), nbrs.end(), w) != nbrs.end(); };
        for (std::size_t i = 0; i < queue.size() && static_cast<int>(queue.size()) <= params_.bfs_budget; ++i) {
            bool done = false;
            for_each_neighbor(box_, queue[i], [&](std::int64_t w, EdgeSlot s) {
                if (done || !prob_.cfg.open(s) || !in_h_[w] || stamp_[w] == gen_) return;
                stamp_[w] = gen_;
                queue.push_back(w);
                if (is_target(w) && ++found == nbrs.size()) done = true;
            });
            if (done) return true;
        }
        return found == nbrs.size();
    }

    void try_translate(double T, std::vector<std::int64_t>& best, std::int64_t& best_b) {
        int dir = static_cast<int>(rng_.below(2 * box_.d()));
        std::int64_t shift = box_.stride(dir / 2) * ((dir & 1) ? -1 : 1);
        ++gen_;
        std::vector<std::int64_t> moved;
        moved.reserve(hlist_.size());
        for (auto v : hlist_) {
            Coord x = box_.coord(v);
            x[dir / 2] += (dir & 1) ? -1 : 1;
            if (!box_.contains(x)) return;
            std::int64_t w = v + shift;
            if (!in_cn_[w]) return;
            moved.push_back(w);
            stamp_[w] = gen_;
        }
        std::int64_t nb = 0, internal = 0;
        for (auto w : moved) {
            nb += deg_[w];
            for_each_neighbor(box_, w, [&](std::int64_t u, EdgeSlot s) {
                if (prob_.cfg.open(s) && stamp_[u] == gen_) ++internal;
            });
        }
        nb -= internal;  // each internal edge was seen twice
        // connectivity of the moved set
        std::uint32_t mark = gen_;
        ++gen_;
        std::vector<std::int64_t> queue{moved[0]};
        stamp_[moved[0]] = gen_;
        for (std::size_t i = 0; i < queue.size(); ++i)
            for_each_neighbor(box_, queue[i], [&](std::int64_t u, EdgeSlot s) {
                if (prob_.cfg.open(s) && stamp_[u] == mark) {
                    stamp_[u] = gen_;
                    queue.push_back(u);
                }
            });
        if (queue.size() != moved.size()) return;
        double cur = static_cast<double>(b_) / size(), next = static_cast<double>(nb) / size();
        if (!accept(cur, next, T)) return;
        start(moved);
        record(best, best_b);
    }
};

}  // namespace

CheegerSolution cheeger_anneal(const CheegerProblem& prob, const AnnealParams& params, std::uint64_t seed) {
    if (prob.cap < 1) throw Error(ErrorCode::InfeasibleCap, "volume cap is below 1");
    if (params.restarts < 1 || params.proposals < 0 || !(params.t0 > 0.0) || !(params.cooling > 0.0))
        throw Error(ErrorCode::InvalidArgument, "invalid annealing parameters");
    struct Found {
        std::vector<std::int64_t> verts;
        std::int64_t b = 0;
    };
    auto runs = parallel_map<Found>(static_cast<std::size_t>(params.restarts), [&](std::size_t r) {
        Chain chain(prob, params, derive_seed(seed, r));
        std::vector<std::int64_t> init;
        if (r < params.seeds.size()) init = chain.seed_set(params.seeds[r]);
        if (init.empty()) init = {chain.random_cn_vertex()};
        chain.start(init);
        Found f;
        chain.run(f.verts, f.b);
        return f;
    });
    CheegerSolution best;
    bool have = false;
    for (auto& f : runs) {
        CheegerSolution s = make_solution(prob, std::move(f.verts), CheegerMethod::Anneal);
        if (!have || better_solution(s, best)) {
            best = std::move(s);
            have = true;
        }
    }
    best.seed = seed;
    return best;
}

double carve_delta(double theta, int d, double eps) {
    double ratio = (theta - 2.0 * eps) / ((theta + eps) * (1.0 + eps));
    ratio = std::clamp(ratio, 0.05, 1.0);
    return 1.0 - std::pow(ratio, 1.0 / d);
}

namespace {

struct Tile {
    CylinderSpec spec;
    double w;
};

Vec unit(Vec v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    for (double& x : v) x /= s;
    return v;
}

std::vector<Tile> face_tiles(const Polytope& Q, double rho, const CarveParams& params) {
    const int d = Q.d;
    const double m = rho + params.margin;
    const double shift = 1e-6;
    std::vector<Tile> tiles;
    for (std::size_t f = 0; f < Q.faces.size(); ++f) {
        Vec nrm = unit(Q.halfspaces[f].normal);
        Frame frame = chosen_square(nrm);
        auto clear_of_edges = [&](const Vec& x) {
            for (std::size_t j = 0; j < Q.halfspaces.size(); ++j) {
                if (j == f) continue;
                double s = 0.0;
                for (int i = 0; i < d; ++i) s += Q.halfspaces[j].normal[i] * x[i];
                if (s > Q.halfspaces[j].offset - m) return false;
            }
            return true;
        };
        auto add_tile = [&](const Vec& c, double w) {
            CylinderSpec spec;
            spec.shape = BaseShape::Square;
            spec.center = c;
            for (int i = 0; i < d; ++i) spec.center[i] -= shift * nrm[i];
            spec.frame = frame;
            spec.half_width = w;
            spec.height = rho;
            spec.scale = 1.0;
            tiles.push_back({spec, w});
        };
        const auto& fv = Q.faces[f].vertices;
        Vec g(d, 0.0);
        for (int v : fv)
            for (int i = 0; i < d; ++i) g[i] += Q.vertices[v][i] / fv.size();
        if (d == 2) {
            double w = 0.5 * Q.faces[f].measure - m;
            if (w >= 1.5) add_tile(g, w);
            continue;
        }
        double w = params.tile_half_width > 0.0 ? params.tile_half_width : std::max(3.0, 2.0 * rho);
        double step = 2.0 * w + 1.0;
        double reach = 0.0;
        for (int v : fv) {
            double s = 0.0;
            for (int i = 0; i < d; ++i) s += (Q.vertices[v][i] - g[i]) * (Q.vertices[v][i] - g[i]);
            reach = std::max(reach, std::sqrt(s));
        }
        int R = static_cast<int>(std::ceil(reach / step)) + 1;
        const Vec& b1 = frame.basis[0];
        const Vec& b2 = frame.basis[1];
        for (int a = -R; a <= R; ++a)
            for (int b = -R; b <= R; ++b) {
                Vec c(d);
                for (int i = 0; i < d; ++i) c[i] = g[i] + step * (a * b1[i] + b * b2[i]);
                bool ok = true;
                for (int sa = -1; sa <= 1 && ok; sa += 2)
                    for (int sb = -1; sb <= 1 && ok; sb += 2) {
                        Vec corner(d);
                        for (int i = 0; i < d; ++i) corner[i] = c[i] + w * (sa * b1[i] + sb * b2[i]);
                        ok = clear_of_edges(corner);
                    }
                if (ok) add_tile(c, w);
            }
    }
    return tiles;
}

}  // namespace

CheegerSolution carve_polytope(const CheegerProblem& prob, const Polytope& P, double h, const CarveParams& params) {
    const BoxSpec& box = prob.cfg.box();
    const int d = box.d();
    const int n = box.n();
    if (P.d != d) throw Error(ErrorCode::InvalidArgument, "polytope dimension mismatch");
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "cylinder height must be positive");
    for (const Vec& v : P.vertices)
        for (double x : v)
            if (std::abs(x) > 1.0 + kGeomTol) throw Error(ErrorCode::InvalidArgument, "polytope leaves [-1,1]^d");
    if (volume(P) > wulff_volume_target(d) * (1.0 + kReportTol))
        throw Error(ErrorCode::InvalidArgument, "polytope volume exceeds 2^d/d!");
    if (prob.cap < 1) throw Error(ErrorCode::InfeasibleCap, "volume cap is below 1");

    const double theta = static_cast<double>(prob.cn.size()) / static_cast<double>(box.core_vertex_count());
    double delta = params.delta >= 0.0 ? params.delta : carve_delta(theta, d, params.eps);
    const double rho = std::max(1.0, h * n);
    const auto lab = clusters(prob.cfg);
    const auto nv = box.vertex_count();

    for (int attempt = 0; attempt <= params.retries; ++attempt) {
        if (attempt > 0) delta = 1.0 - 0.9 * (1.0 - delta);
        Polytope Q = scaled(P, n * (1.0 - delta));
        std::vector<Tile> tiles = face_tiles(Q, rho, params);

        std::vector<int> owner(nv, -1), zone(nv, -1);
        std::vector<EdgeSlot> gamma;
        for (std::size_t t = 0; t < tiles.size(); ++t) {
            DiscreteCylinder cyl = discrete_cylinder(tiles[t].spec);
            if (!cyl.suitable) continue;
            std::vector<std::size_t> all(cyl.vertices.size());
            for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
            auto idx = to_box_indices(box, cyl, all);
            for (std::size_t k = 0; k < idx.size(); ++k) {
                if (owner[idx[k]] >= 0) throw Error(ErrorCode::InvalidArgument, "face cylinders overlap; decrease h");
                owner[idx[k]] = static_cast<int>(t);
            }
            CutResult cut = min_open_cut(prob.cfg, to_box_indices(box, cyl, cyl.hemi_minus),
                                         to_box_indices(box, cyl, cyl.hemi_plus), idx);
            gamma.insert(gamma.end(), cut.witness.begin(), cut.witness.end());
            const Vec& c = tiles[t].spec.center;
            for (std::size_t k = 0; k < idx.size(); ++k) {
                double rad = 0.0;
                for (const Vec& b : tiles[t].spec.frame.basis) {
                    double s = 0.0;
                    for (int i = 0; i < d; ++i) s += (cyl.vertices[k][i] - c[i]) * b[i];
                    rad = std::max(rad, std::abs(s));
                }
                if (rad <= tiles[t].w - 1.0) zone[idx[k]] = static_cast<int>(t);
            }
        }

        // A_n: open edges crossing ∂Q outside the protected tile interiors
        auto outside = [&](std::int64_t v) {
            Coord x = box.coord(v);
            double g = -std::numeric_limits<double>::infinity();
            for (const auto& hs : Q.halfspaces) {
                double s = -hs.offset;
                for (int i = 0; i < d; ++i) s += hs.normal[i] * x[i];
                g = std::max(g, s);
            }
            return g + 1e-6 > 0.0;
        };
        std::vector<char> out(nv);
        for (std::int64_t v = 0; v < nv; ++v) out[v] = outside(v) ? 1 : 0;
        for (std::int64_t v = 0; v < nv; ++v)
            for (int a = 0; a < d; ++a) {
                EdgeSlot s = slot_of(box, v, a);
                if (!box.edge_exists(s) || !prob.cfg.open(s)) continue;
                std::int64_t w = slot_head(box, s);
                if (out[v] == out[w]) continue;
                if (zone[v] >= 0 && zone[v] == zone[w]) continue;
                gamma.push_back(s);
            }
        std::sort(gamma.begin(), gamma.end());
        gamma.erase(std::unique(gamma.begin(), gamma.end()), gamma.end());

        std::vector<char> removed(prob.cfg.box().slot_count(), 0);
        for (auto s : gamma) removed[s] = 1;
        std::vector<char> reached(nv, 0);
        std::vector<std::int64_t> stack;
        for (std::int64_t v = 0; v < nv; ++v)
            if (box.on_hull(box.coord(v))) reached[v] = 1, stack.push_back(v);
        while (!stack.empty()) {
            std::int64_t v = stack.back();
            stack.pop_back();
            for_each_neighbor(box, v, [&](std::int64_t w, EdgeSlot s) {
                if (prob.cfg.open(s) && !removed[s] && !reached[w]) {
                    reached[w] = 1;
                    stack.push_back(w);
                }
            });
        }
        std::vector<std::int64_t> H;
        bool escapes = false;
        for (std::int64_t v = 0; v < nv; ++v) {
            if (reached[v] || lab.label[v] != lab.giant_label) continue;
            if (!box.in_core(box.coord(v))) escapes = true;
            H.push_back(v);
        }
        if (H.empty()) throw Error(ErrorCode::CarveFailed, "carved set is empty");
        if (escapes || static_cast<std::int64_t>(H.size()) > prob.cap) continue;
        CheegerSolution sol = make_solution(prob, std::move(H), CheegerMethod::Carve);
        sol.delta = delta;
        sol.retries = attempt;
        sol.gamma = std::move(gamma);
        return sol;
    }
    throw Error(ErrorCode::CarveFailed, "carved set exceeds the volume cap after retries");
}

std::int64_t dyadic_index(const Vec& t, int k) {
    const std::int64_t side = std::int64_t{1} << k;
    std::int64_t idx = 0;
    for (double x : t) {
        auto j = static_cast<std::int64_t>(std::ceil((x + 1.0) * std::ldexp(1.0, k - 1))) - 1;
        j = std::clamp<std::int64_t>(j, 0, side - 1);
        idx = idx * side + j;
    }
    return idx;
}

std::int64_t dyadic_index(const Coord& x, int d, int n, int k) {
    const std::int64_t side = std::int64_t{1} << k;
    const std::int64_t den = 2 * static_cast<std::int64_t>(n);
    std::int64_t idx = 0;
    for (int i = 0; i < d; ++i) {
        std::int64_t num = (static_cast<std::int64_t>(x[i]) + n) * side;
        std::int64_t j = (num + den - 1) / den - 1;
        j = std::clamp<std::int64_t>(j, 0, side - 1);
        idx = idx * side + j;
    }
    return idx;
}

namespace {

EmpiricalMeasure blank_measure(int d, int K) {
    if (K < 0 || d * K > 30) throw Error(ErrorCode::InvalidArgument, "dyadic depth out of range");
    EmpiricalMeasure m;
    m.d = d;
    m.K = K;
    for (int k = 0; k <= K; ++k) m.mass.emplace_back(std::size_t{1} << (d * k), 0.0);
    return m;
}

}  // namespace

EmpiricalMeasure empirical_measure(const Subgraph& H, int K) {
    const BoxSpec& box = H.box;
    const int d = box.d(), n = box.n();
    EmpiricalMeasure m = blank_measure(d, K);
    for (int k = 0; k <= K; ++k) m.count.emplace_back(std::size_t{1} << (d * k), 0);
    m.denom = std::pow(static_cast<double>(n), d);
    for (auto v : H.vertices) {
        Coord x = box.coord(v);
        if (!box.in_core(x)) throw Error(ErrorCode::OutOfRange, "vertex outside [-n,n]^d");
        for (int k = 0; k <= K; ++k) ++m.count[k][dyadic_index(x, d, n, k)];
    }
    for (int k = 0; k <= K; ++k)
        for (std::size_t q = 0; q < m.mass[k].size(); ++q) m.mass[k][q] = static_cast<double>(m.count[k][q]) / m.denom;
    m.total_count = static_cast<std::int64_t>(H.size());
    m.total = static_cast<double>(m.total_count) / m.denom;
    return m;
}

EmpiricalMeasure point_measure(int d, int K, const std::vector<Vec>& points, const std::vector<double>& weights) {
    if (points.size() != weights.size()) throw Error(ErrorCode::InvalidArgument, "points and weights differ in length");
    EmpiricalMeasure m = blank_measure(d, K);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (weights[i] < 0.0) throw Error(ErrorCode::InvalidArgument, "negative weight");
        for (int k = 0; k <= K; ++k) m.mass[k][dyadic_index(points[i], k)] += weights[i];
        m.total += weights[i];
    }
    return m;
}

EmpiricalMeasure measure_of_set(const Polytope& E, double theta, int n, int K) {
    const int d = E.d;
    EmpiricalMeasure m = blank_measure(d, K);
    m.denom = std::pow(static_cast<double>(n), d);
    auto& fine = m.mass[K];
    const std::int64_t side_k = std::int64_t{1} << K;
    // fill every finest cube below (k, j) with its share of `per_cube`
    std::function<void(int, std::vector<std::int64_t>&)> visit = [&](int k, std::vector<std::int64_t>& j) {
        const double len = std::ldexp(2.0, -k);
        Vec lo(d), hi(d);
        for (int i = 0; i < d; ++i) {
            lo[i] = -1.0 + j[i] * len;
            hi[i] = lo[i] + len;
        }
        bool full = true;
        for (const auto& hs : E.halfspaces) {
            double mx = -hs.offset, mn = -hs.offset;
            for (int i = 0; i < d; ++i) {
                mx += std::max(hs.normal[i] * lo[i], hs.normal[i] * hi[i]);
                mn += std::min(hs.normal[i] * lo[i], hs.normal[i] * hi[i]);
            }
            if (mn >= 0.0) return;
            if (mx > 0.0) full = false;
        }
        if (!full && k < K) {
            std::vector<std::int64_t> child(d);
            for (int code = 0; code < (1 << d); ++code) {
                for (int i = 0; i < d; ++i) child[i] = 2 * j[i] + ((code >> (d - 1 - i)) & 1);
                visit(k + 1, child);
            }
            return;
        }
        const std::int64_t span = std::int64_t{1} << (K - k);
        const double mass = full ? theta * std::pow(std::ldexp(2.0, -K), d) : theta * box_intersection_volume(E, lo, hi);
        std::vector<std::int64_t> off(d, 0);
        while (true) {
            std::int64_t idx = 0;
            for (int i = 0; i < d; ++i) idx = idx * side_k + j[i] * span + off[i];
            fine[idx] = mass;
            int i = d - 1;
            while (i >= 0 && ++off[i] == span) off[i--] = 0;
            if (i < 0) break;
        }
    };
    std::vector<std::int64_t> root(d, 0);
    visit(0, root);
    for (int k = K - 1; k >= 0; --k) {
        const std::int64_t side = std::int64_t{1} << k;
        for (std::size_t q = 0; q < m.mass[k + 1].size(); ++q) {
            std::int64_t rest = static_cast<std::int64_t>(q), parent = 0, mult = 1;
            for (int i = d - 1; i >= 0; --i) {
                std::int64_t ji = rest % (2 * side);
                rest /= 2 * side;
                parent += (ji / 2) * mult;
                mult *= side;
            }
            m.mass[k][parent] += m.mass[k + 1][q];
        }
    }
    m.total = m.mass[0][0];
    return m;
}

MetricValue d_metric(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    if (a.d != b.d || a.K != b.K) throw Error(ErrorCode::ScaleMismatch, "measures differ in dimension or depth");
    MetricValue r;
    for (int k = 0; k <= a.K; ++k) {
        double s = 0.0;
        for (std::size_t q = 0; q < a.mass[k].size(); ++q) s += std::abs(a.mass[k][q] - b.mass[k][q]);
        r.value += std::ldexp(s, -k * (a.d + 1));
    }
    r.truncation = std::ldexp(a.total + b.total, -a.K);
    return r;
}

namespace {

using Lattice = std::vector<int>;

// coarse-to-fine search over integer translations; ties keep the earlier (lexicographically smaller) point
Lattice grid_search(int d, int n, const TranslationGrid& grid, const std::function<bool(const Lattice&)>& feasible,
                    const std::function<double(const Lattice&)>& eval) {
    int step = std::max(1, grid.coarse_step);
    Lattice best(d, 0);
    double best_v = eval(best);
    auto consider = [&](const Lattice& z) {
        if (!feasible(z)) return;
        double v = eval(z);
        if (v < best_v) best_v = v, best = z;
    };
    auto sweep = [&](const Lattice& base, int lo, int hi, int st) {
        Lattice off(d, lo);
        while (true) {
            Lattice z(d);
            for (int i = 0; i < d; ++i) z[i] = base[i] + off[i] * st;
            if (z != best) consider(z);
            int i = d - 1;
            while (i >= 0 && ++off[i] > hi) off[i--] = lo;
            if (i < 0) break;
        }
    };
    sweep(Lattice(d, 0), -(n / step), n / step, step);
    while (step > 1) {
        step /= 2;
        sweep(Lattice(best), -grid.refine_radius, grid.refine_radius, step);
    }
    return best;
}

bool fits(const Polytope& W, const Vec& x) {
    for (const Vec& v : W.vertices)
        for (int i = 0; i < W.d; ++i)
            if (std::abs(v[i] + x[i]) > 1.0 + kGeomTol) return false;
    return true;
}

}  // namespace

ShapeDistance distance_to_wulff_set(const EmpiricalMeasure& mu, const Polytope& W, double theta, int n,
                                    const TranslationGrid& grid) {
    if (W.d != mu.d) throw Error(ErrorCode::ScaleMismatch, "dimension mismatch");
    auto to_x = [&](const Lattice& z) {
        Vec x(W.d);
        for (int i = 0; i < W.d; ++i) x[i] = static_cast<double>(z[i]) / n;
        return x;
    };
    auto eval = [&](const Lattice& z) {
        return d_metric(mu, measure_of_set(translated(W, to_x(z)), theta, n, mu.K)).value;
    };
    Lattice z = grid_search(W.d, n, grid, [&](const Lattice& q) { return fits(W, to_x(q)); }, eval);
    return {eval(z), to_x(z)};
}

ShapeDistance l1_shape_distance(const Subgraph& H, const CheegerProblem& prob, const Polytope& W,
                                const TranslationGrid& grid) {
    const BoxSpec& box = prob.cfg.box();
    const int d = box.d(), n = box.n();
    if (W.d != d) throw Error(ErrorCode::ScaleMismatch, "dimension mismatch");
    std::vector<char> in_h = H.mask();
    std::vector<Coord> coords;
    for (auto v : prob.cn.vertices) coords.push_back(box.coord(v));
    auto to_x = [&](const Lattice& z) {
        Vec x(d);
        for (int i = 0; i < d; ++i) x[i] = static_cast<double>(z[i]) / n;
        return x;
    };
    auto eval = [&](const Lattice& z) {
        std::int64_t s = 0, both = 0;
        Vec y(d);
        for (std::size_t k = 0; k < coords.size(); ++k) {
            for (int i = 0; i < d; ++i) y[i] = static_cast<double>(coords[k][i] - z[i]) / n;
            if (W.contains(y)) {
                ++s;
                both += in_h[prob.cn.vertices[k]] ? 1 : 0;
            }
        }
        return static_cast<double>(static_cast<std::int64_t>(H.size()) + s - 2 * both) / std::pow(n, d);
    };
    Lattice z = grid_search(d, n, grid, [&](const Lattice& q) { return fits(W, to_x(q)); }, eval);
    return {eval(z), to_x(z)};
}

std::string solution_json(const CheegerSolution& sol, bool with_witness) {
    nlohmann::json j;
    j["phi_num"] = sol.num;
    j["phi_den"] = sol.den;
    j["phi"] = sol.value();
    j["size"] = sol.witness.size();
    j["method"] = method_name(sol.method);
    j["certified"] = sol.certified;
    j["seed"] = sol.seed;
    if (sol.method == CheegerMethod::Carve) {
        j["delta"] = sol.delta;
        j["retries"] = sol.retries;
        j["gamma_edges"] = sol.gamma.size();
    }
    if (with_witness) {
        nlohmann::json w = nlohmann::json::array();
        const int d = sol.witness.box.d();
        for (auto v : sol.witness.vertices) {
            Coord x = sol.witness.box.coord(v);
            w.push_back(std::vector<int>(x.begin(), x.begin() + d));
        }
        j["witness"] = w;
    }
    return j.dump(2);
}

std::string measure_csv(const EmpiricalMeasure& m) {
    std::ostringstream out;
    out << "k,cube,mass\n";
    char buf[64];
    for (int k = 0; k <= m.K; ++k)
        for (std::size_t q = 0; q < m.mass[k].size(); ++q) {
            if (m.mass[k][q] == 0.0) continue;
            std::snprintf(buf, sizeof buf, "%d,%zu,%.17g\n", k, q, m.mass[k][q]);
            out << buf;
        }
    return out.str();
}

}  // namespace perciso
