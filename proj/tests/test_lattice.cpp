#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "doctest.h"
#include "perciso/errors.hpp"
#include "perciso/lattice.hpp"
#include "perciso/rng.hpp"

using namespace perciso;

namespace {

// Independent re-derivation of the per-edge rule.
std::uint64_t sm(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

bool oracle_open(std::uint64_t seed, std::uint64_t id, double p) {
    std::uint64_t h = sm(sm(seed) ^ sm(id ^ 0x632BE59BD9B4E019ULL));
    return static_cast<double>(h >> 11) * std::ldexp(1.0, -53) < p;
}

std::uint64_t oracle_id_2d(int x, int y, int axis) {
    const std::uint64_t R = static_cast<std::uint64_t>(std::pow(9.2e18 / 2, 0.5) - 1.0) / 2 - 1;
    const std::uint64_t W = 2 * R + 1;
    return ((static_cast<std::uint64_t>(x + static_cast<std::int64_t>(R)) * W) +
            static_cast<std::uint64_t>(y + static_cast<std::int64_t>(R))) * 2 + axis;
}

std::vector<std::int64_t> bfs_labels(const Configuration& cfg) {
    const BoxSpec& b = cfg.box();
    std::vector<std::int64_t> lab(b.vertex_count(), -2);
    for (std::int64_t s = 0; s < b.vertex_count(); ++s) {
        if (lab[s] != -2) continue;
        std::vector<std::int64_t> comp{s};
        lab[s] = s;
        for (std::size_t q = 0; q < comp.size(); ++q) {
            Coord x = b.coord(comp[q]);
            for (int i = 0; i < b.d(); ++i)
                for (int sg = -1; sg <= 1; sg += 2) {
                    Coord y = x;
                    y[i] += sg;
                    if (!b.contains(y)) continue;
                    Coord tail = sg > 0 ? x : y;
                    if (!cfg.open(b.index(tail), i)) continue;
                    std::int64_t w = b.index(y);
                    if (lab[w] == -2) {
                        lab[w] = s;
                        comp.push_back(w);
                    }
                }
        }
        if (comp.size() == 1) lab[s] = -1;
    }
    return lab;
}

Subgraph random_connected(const BoxSpec& box, int size, SplitMix64& rng) {
    Coord c{};
    std::set<Coord> cells{c};
    std::vector<Coord> list{c};
    while (static_cast<int>(cells.size()) < size) {
        Coord x = list[rng.below(list.size())];
        int axis = static_cast<int>(rng.below(box.d()));
        x[axis] += rng.below(2) ? 1 : -1;
        if (!box.in_core(x)) continue;
        if (cells.insert(x).second) list.push_back(x);
    }
    std::vector<std::int64_t> v;
    for (auto& x : cells) v.push_back(box.index(x));
    return Subgraph(box, v);
}

}  // namespace

TEST_CASE("box indexing round-trips and edge count") {
    BoxSpec b(3, 2, 1);
    CHECK(b.vertex_count() == 7 * 7 * 7);
    for (std::int64_t v = 0; v < b.vertex_count(); ++v) CHECK(b.index(b.coord(v)) == v);
    std::int64_t valid = 0;
    for (EdgeSlot s = 0; s < b.slot_count(); ++s) valid += b.edge_exists(s);
    CHECK(valid == b.edge_count());
    CHECK(b.edge_count() == 3 * 6 * 49);
    CHECK_THROWS_AS(BoxSpec(1, 3), Error);
}

TEST_CASE("degenerate probabilities") {
    BoxSpec b(2, 3);
    CHECK(sample_configuration(1.0, b, 5).open_count() == b.edge_count());
    CHECK(sample_configuration(0.0, b, 5).open_count() == 0);
}

TEST_CASE("p=0.5 sample matches per-edge recomputation") {
    BoxSpec b(2, 4, 0);
    auto cfg = sample_configuration(0.5, b, 7);
    std::int64_t open = 0;
    for (EdgeSlot s = 0; s < b.slot_count(); ++s) {
        if (!b.edge_exists(s)) continue;
        Coord x = b.coord(slot_vertex(b, s));
        bool expect = oracle_open(7, oracle_id_2d(x[0], x[1], slot_axis(b, s)), 0.5);
        CHECK(cfg.open(s) == expect);
        open += expect;
    }
    double m = static_cast<double>(b.edge_count());
    CHECK(std::abs(open - 0.5 * m) <= 5 * std::sqrt(0.25 * m));
}

TEST_CASE("nested boxes share edge states") {
    BoxSpec small(3, 2, 0), big(3, 4, 1);
    auto a = sample_configuration(0.4, small, 99);
    auto c = sample_configuration(0.4, big, 99);
    for (EdgeSlot s = 0; s < small.slot_count(); ++s) {
        if (!small.edge_exists(s)) continue;
        Coord x = small.coord(slot_vertex(small, s));
        CHECK(a.open(s) == c.open(big.index(x), slot_axis(small, s)));
    }
    auto again = sample_configuration(0.4, small, 99);
    CHECK(again.words() == a.words());
}

TEST_CASE("cluster labels") {
    SUBCASE("p=1 single cluster") {
        auto lab = clusters(sample_configuration(1.0, BoxSpec(2, 2), 1));
        CHECK(lab.sizes.size() == 1);
        CHECK(lab.giant_label == 0);
    }
    SUBCASE("p=0 isolated") {
        auto lab = clusters(sample_configuration(0.0, BoxSpec(2, 2), 1));
        CHECK(lab.sizes.empty());
        for (auto l : lab.label) CHECK(l == ClusterLabeling::kIsolated);
    }
    SUBCASE("BFS oracle") {
        for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
            auto cfg = sample_configuration(0.5, BoxSpec(2, 2), seed);
            auto lab = clusters(cfg);
            auto oracle = bfs_labels(cfg);
            CHECK(lab.label == oracle);
            std::int64_t total = 0;
            for (auto& [l, s] : lab.sizes) total += s;
            CHECK(total == std::count_if(oracle.begin(), oracle.end(), [](auto x) { return x >= 0; }));
        }
    }
}

TEST_CASE("giant cluster") {
    CHECK(giant_cluster_in_box(sample_configuration(1.0, BoxSpec(2, 1, 1), 3)).size() == 9);
    CHECK_THROWS_AS(giant_cluster_in_box(sample_configuration(0.0, BoxSpec(2, 1, 1), 3)), Error);
    auto cfg = sample_configuration(0.7, BoxSpec(2, 3, 3), 3);
    auto oracle = bfs_labels(cfg);
    std::map<std::int64_t, std::int64_t> sz;
    for (auto l : oracle)
        if (l >= 0) ++sz[l];
    std::int64_t best = -1, bl = -1;
    for (auto& [l, s] : sz)
        if (s > best) best = s, bl = l;
    std::vector<std::int64_t> expect;
    for (std::int64_t v = 0; v < cfg.box().vertex_count(); ++v)
        if (oracle[v] == bl && cfg.box().in_core(cfg.box().coord(v))) expect.push_back(v);
    CHECK(giant_cluster_in_box(cfg).vertices == expect);
}

TEST_CASE("open edge boundary") {
    BoxSpec b(2, 2);
    Subgraph origin(b, {b.index(Coord{})});
    CHECK(open_edge_boundary(origin, sample_configuration(1.0, b, 1)).size() == 4);
    CHECK(open_edge_boundary(origin, sample_configuration(0.0, b, 1)).empty());

    auto cfg = sample_configuration(0.6, b, 5);
    auto G = giant_cluster_in_box(cfg);
    Subgraph H(b, {G.vertices[0], G.vertices[1], G.vertices[2]});
    std::set<EdgeSlot> expect;
    for (EdgeSlot s = 0; s < b.slot_count(); ++s) {
        if (!b.edge_exists(s) || !cfg.open(s)) continue;
        bool a = H.contains(slot_vertex(b, s)), c = H.contains(slot_head(b, s));
        if (a != c) expect.insert(s);
    }
    auto got = open_edge_boundary(H, cfg);
    CHECK(std::vector<EdgeSlot>(expect.begin(), expect.end()) == got);

    SplitMix64 rng(77);
    for (int t = 0; t < 40; ++t) {
        BoxSpec bb(2 + t % 2, 1 + t % 3);
        auto c2 = sample_configuration(0.5, bb, 1000 + t);
        std::vector<std::int64_t> pick;
        int k = 1 + static_cast<int>(rng.below(12));
        for (int i = 0; i < k; ++i) {
            Coord x{};
            for (int a = 0; a < bb.d(); ++a) x[a] = static_cast<int>(rng.below(2 * bb.n() + 1)) - bb.n();
            pick.push_back(bb.index(x));
        }
        Subgraph h(bb, pick);
        std::int64_t scan = 0;
        for (EdgeSlot s = 0; s < bb.slot_count(); ++s)
            if (bb.edge_exists(s) && c2.open(s) && h.contains(slot_vertex(bb, s)) != h.contains(slot_head(bb, s)))
                ++scan;
        CHECK(static_cast<std::int64_t>(open_edge_boundary(h, c2).size()) == scan);
    }
    Subgraph hull(b, {0});
    CHECK_THROWS_AS(open_edge_boundary(hull, cfg), Error);
}

TEST_CASE("outer boundaries") {
    BoxSpec b(2, 3);
    auto idx = [&](int x, int y) { return b.index(Coord{x, y}); };
    SUBCASE("2x2 block") {
        Subgraph H(b, {idx(0, 0), idx(1, 0), idx(0, 1), idx(1, 1)});
        auto ob = outer_boundaries(H);
        CHECK(ob.edges.size() == 8);
        CHECK(ob.edges == edge_boundary(H));
        CHECK(ob.vertices.size() == 4);
    }
    SUBCASE("ring with hole") {
        std::vector<std::int64_t> v;
        for (int x = -1; x <= 1; ++x)
            for (int y = -1; y <= 1; ++y)
                if (x || y) v.push_back(idx(x, y));
        Subgraph H(b, v);
        auto ob = outer_boundaries(H);
        CHECK(edge_boundary(H).size() == 16);
        CHECK(ob.edges.size() == 12);
        CHECK(ob.vertices.size() == 8);
    }
    SUBCASE("random sets against per-edge path search") {
        SplitMix64 rng(5);
        for (int t = 0; t < 30; ++t) {
            std::vector<std::int64_t> v;
            while (v.size() < 6) {
                Coord x{static_cast<int>(rng.below(5)) - 2, static_cast<int>(rng.below(5)) - 2};
                v.push_back(b.index(x));
                std::sort(v.begin(), v.end());
                v.erase(std::unique(v.begin(), v.end()), v.end());
            }
            Subgraph H(b, v);
            std::vector<EdgeSlot> expect;
            for (EdgeSlot s : edge_boundary(H)) {
                std::int64_t out = H.contains(slot_vertex(b, s)) ? slot_head(b, s) : slot_vertex(b, s);
                std::vector<char> seen(b.vertex_count(), 0);
                std::queue<std::int64_t> q;
                q.push(out);
                seen[out] = 1;
                bool hit = false;
                while (!q.empty() && !hit) {
                    Coord x = b.coord(q.front());
                    q.pop();
                    if (b.on_hull(x)) hit = true;
                    for (int i = 0; i < 2; ++i)
                        for (int sg = -1; sg <= 1; sg += 2) {
                            Coord y = x;
                            y[i] += sg;
                            if (!b.contains(y)) continue;
                            std::int64_t w = b.index(y);
                            if (!seen[w] && !H.contains(w)) {
                                seen[w] = 1;
                                q.push(w);
                            }
                        }
                }
                if (hit) expect.push_back(s);
            }
            CHECK(outer_boundaries(H).edges == expect);
        }
    }
}

TEST_CASE("star connectivity") {
    CHECK(star_connected({Coord{0, 0}, Coord{1, 1}}, 2));
    CHECK_FALSE(star_connected({Coord{0, 0}, Coord{3, 3}}, 2));
    CHECK(star_connected(std::vector<Coord>{}, 2));
    SplitMix64 rng(31);
    for (int t = 0; t < 30; ++t) {
        BoxSpec b(2 + t % 2, 4);
        auto H = random_connected(b, 5 + static_cast<int>(rng.below(25)), rng);
        CHECK(star_connected(outer_boundaries(H).vertices));
    }
}

TEST_CASE("density estimates") {
    auto one = density_estimate(1.0, 2, 4, 3, 1);
    CHECK(one.theta == 1.0);
    CHECK(density_estimate(0.3, 2, 32, 50, 2).theta < 0.1);
    auto a = density_estimate(0.7, 2, 32, 50, 300);
    auto c = density_estimate(0.7, 2, 32, 50, 500);
    CHECK(std::abs(a.theta - c.theta) <= 3 * std::hypot(a.stderr_, c.stderr_));
}

TEST_CASE("binary round trip") {
    auto cfg = sample_configuration(0.37, BoxSpec(3, 2, 2), 4242);
    std::stringstream ss;
    write_configuration(ss, cfg);
    auto back = read_configuration(ss);
    CHECK(back.words() == cfg.words());
    CHECK(back.p() == cfg.p());
    CHECK(back.seed() == cfg.seed());
    CHECK(back.box() == cfg.box());
    CHECK(configuration_json(cfg).find("\"seed\": 4242") != std::string::npos);
}
