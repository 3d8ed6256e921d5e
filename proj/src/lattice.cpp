#include "perciso/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "perciso/errors.hpp"
#include "perciso/parallel.hpp"
#include "perciso/rng.hpp"

namespace perciso {

BoxSpec::BoxSpec(int d, int n, int pad) : d_(d), n_(n), pad_(pad < 0 ? n : pad) {
    if (d < 2 || d > kMaxDim) throw Error(ErrorCode::InvalidArgument, "dimension must be in [2, 6]");
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "half-side n must be >= 1");
    double total = std::pow(2.0 * (n_ + pad_) + 1.0, d);
    if (total > 4.0e9) throw Error(ErrorCode::InvalidArgument, "box too large");
    std::int64_t s = 1;
    for (int i = d - 1; i >= 0; --i) {
        stride_[i] = s;
        s *= side();
    }
    vertex_count_ = s;
}

std::int64_t BoxSpec::edge_count() const {
    std::int64_t L = side();
    std::int64_t c = L - 1;
    for (int i = 1; i < d_; ++i) c *= L;
    return c * d_;
}

std::int64_t BoxSpec::core_vertex_count() const {
    std::int64_t c = 1;
    for (int i = 0; i < d_; ++i) c *= 2 * n_ + 1;
    return c;
}

Coord BoxSpec::coord(std::int64_t index) const {
    Coord x{};
    for (int i = 0; i < d_; ++i) {
        x[i] = static_cast<int>(index / stride_[i]) - half();
        index %= stride_[i];
    }
    return x;
}

std::int64_t BoxSpec::index(const Coord& x) const {
    std::int64_t idx = 0;
    for (int i = 0; i < d_; ++i) idx += static_cast<std::int64_t>(x[i] + half()) * stride_[i];
    return idx;
}

bool BoxSpec::contains(const Coord& x) const {
    for (int i = 0; i < d_; ++i)
        if (x[i] < -half() || x[i] > half()) return false;
    return true;
}

bool BoxSpec::in_core(const Coord& x) const {
    for (int i = 0; i < d_; ++i)
        if (x[i] < -n_ || x[i] > n_) return false;
    return true;
}

bool BoxSpec::on_hull(const Coord& x) const {
    for (int i = 0; i < d_; ++i)
        if (x[i] == -half() || x[i] == half()) return true;
    return false;
}

bool BoxSpec::edge_exists(EdgeSlot slot) const {
    if (slot < 0 || slot >= slot_count()) return false;
    std::int64_t v = slot / d_;
    int axis = static_cast<int>(slot % d_);
    int xi = static_cast<int>((v / stride_[axis]) % side()) - half();
    return xi < half();
}

namespace {

std::int64_t global_radius(int d) {
    double limit = std::pow(9.2e18 / d, 1.0 / d);
    auto R = static_cast<std::int64_t>((limit - 1.0) / 2.0) - 1;
    return R;
}

}  // namespace

std::uint64_t canonical_edge_id(int d, const Coord& tail, int axis) {
    static const std::array<std::int64_t, kMaxDim + 1> radius = [] {
        std::array<std::int64_t, kMaxDim + 1> r{};
        for (int k = 2; k <= kMaxDim; ++k) r[k] = global_radius(k);
        return r;
    }();
    const std::uint64_t R = static_cast<std::uint64_t>(radius[d]);
    const std::uint64_t W = 2 * R + 1;
    std::uint64_t idx = 0;
    for (int i = 0; i < d; ++i) idx = idx * W + static_cast<std::uint64_t>(tail[i] + static_cast<std::int64_t>(R));
    return idx * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(axis);
}

std::uint64_t canonical_edge_id(const BoxSpec& box, EdgeSlot slot) {
    return canonical_edge_id(box.d(), box.coord(slot_vertex(box, slot)), slot_axis(box, slot));
}

Configuration::Configuration(BoxSpec box, double p, std::uint64_t seed, std::vector<std::uint64_t> words)
    : box_(box), p_(p), seed_(seed), words_(std::move(words)) {
    if (static_cast<std::int64_t>(words_.size()) != (box_.slot_count() + 63) / 64)
        throw Error(ErrorCode::InvalidArgument, "edge bitmap size mismatch");
}

void Configuration::set_open(EdgeSlot s, bool value) {
    if (!box_.edge_exists(s)) throw Error(ErrorCode::OutOfRange, "edge slot outside box");
    if (value)
        words_[s >> 6] |= 1ULL << (s & 63);
    else
        words_[s >> 6] &= ~(1ULL << (s & 63));
}

std::int64_t Configuration::open_count() const {
    std::int64_t c = 0;
    for (auto w : words_) c += __builtin_popcountll(w);
    return c;
}

Configuration sample_configuration(double p, const BoxSpec& box, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "p must lie in [0,1]");
    std::vector<std::uint64_t> words((box.slot_count() + 63) / 64, 0);
    const int d = box.d();
    const int h = box.half();
    Coord x{};
    for (int i = 0; i < d; ++i) x[i] = -h;
    for (std::int64_t v = 0; v < box.vertex_count(); ++v) {
        for (int a = 0; a < d; ++a) {
            if (x[a] == h) continue;
            if (edge_uniform(seed, canonical_edge_id(d, x, a)) < p) {
                EdgeSlot s = slot_of(box, v, a);
                words[s >> 6] |= 1ULL << (s & 63);
            }
        }
        for (int i = d - 1; i >= 0; --i) {
            if (++x[i] <= h) break;
            x[i] = -h;
        }
    }
    return Configuration(box, p, seed, std::move(words));
}

Subgraph::Subgraph(BoxSpec b, std::vector<std::int64_t> v) : box(b), vertices(std::move(v)) {
    std::sort(vertices.begin(), vertices.end());
    vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
    if (!vertices.empty() && (vertices.front() < 0 || vertices.back() >= box.vertex_count()))
        throw Error(ErrorCode::OutOfRange, "subgraph vertex outside box");
}

bool Subgraph::contains(std::int64_t v) const { return std::binary_search(vertices.begin(), vertices.end(), v); }

std::vector<char> Subgraph::mask() const {
    std::vector<char> m(box.vertex_count(), 0);
    for (auto v : vertices) m[v] = 1;
    return m;
}

std::int64_t ClusterLabeling::size_of(std::int64_t lab) const {
    auto it = std::lower_bound(sizes.begin(), sizes.end(), std::make_pair(lab, std::int64_t{0}));
    if (it == sizes.end() || it->first != lab) return 0;
    return it->second;
}

namespace {

struct UnionFind {
    std::vector<std::int64_t> parent;
    explicit UnionFind(std::int64_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::int64_t find(std::int64_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(std::int64_t a, std::int64_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) std::swap(a, b);
        parent[a] = b;
    }
};

}  // namespace

ClusterLabeling clusters(const Configuration& cfg) {
    const BoxSpec& box = cfg.box();
    const std::int64_t V = box.vertex_count();
    const int d = box.d();
    UnionFind uf(V);
    std::vector<char> touched(V, 0);
    for (EdgeSlot s = 0; s < box.slot_count(); ++s) {
        if (!cfg.open(s)) continue;
        std::int64_t v = s / d;
        std::int64_t w = v + box.stride(static_cast<int>(s % d));
        uf.unite(v, w);
        touched[v] = touched[w] = 1;
    }
    ClusterLabeling lab;
    lab.label.assign(V, ClusterLabeling::kIsolated);
    std::vector<std::int64_t> count(V, 0);
    for (std::int64_t v = 0; v < V; ++v) {
        if (!touched[v]) continue;
        std::int64_t r = uf.find(v);  // union by smaller index keeps the root minimal
        lab.label[v] = r;
        ++count[r];
    }
    std::int64_t best = 0;
    for (std::int64_t v = 0; v < V; ++v) {
        if (count[v] == 0) continue;
        lab.sizes.emplace_back(v, count[v]);
        if (count[v] > best) {
            best = count[v];
            lab.giant_label = v;
        }
    }
    return lab;
}

Subgraph giant_cluster_in_box(const Configuration& cfg, const ClusterLabeling& lab) {
    if (lab.giant_label == ClusterLabeling::kIsolated)
        throw Error(ErrorCode::EmptyCluster, "configuration has no open edge");
    const BoxSpec& box = cfg.box();
    std::vector<std::int64_t> verts;
    for (std::int64_t v = 0; v < box.vertex_count(); ++v)
        if (lab.label[v] == lab.giant_label && box.in_core(box.coord(v))) verts.push_back(v);
    return Subgraph(box, std::move(verts));
}

Subgraph giant_cluster_in_box(const Configuration& cfg) { return giant_cluster_in_box(cfg, clusters(cfg)); }

namespace {

void require_interior(const Subgraph& H) {
    for (auto v : H.vertices)
        if (H.box.on_hull(H.box.coord(v)))
            throw Error(ErrorCode::BoundaryClipped, "subgraph touches the padded-box hull");
}

}  // namespace

std::vector<EdgeSlot> edge_boundary(const Subgraph& H) {
    require_interior(H);
    std::vector<EdgeSlot> out;
    for (auto v : H.vertices)
        for_each_neighbor(H.box, v, [&](std::int64_t w, EdgeSlot s) {
            if (!H.contains(w)) out.push_back(s);
        });
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<EdgeSlot> open_edge_boundary(const Subgraph& H, const Configuration& cfg) {
    if (!(H.box == cfg.box())) throw Error(ErrorCode::InvalidArgument, "box mismatch");
    require_interior(H);
    std::vector<EdgeSlot> out;
    for (auto v : H.vertices)
        for_each_neighbor(H.box, v, [&](std::int64_t w, EdgeSlot s) {
            if (cfg.open(s) && !H.contains(w)) out.push_back(s);
        });
    std::sort(out.begin(), out.end());
    return out;
}

OuterBoundary outer_boundaries(const Subgraph& H) {
    require_interior(H);
    const BoxSpec& box = H.box;
    std::vector<char> in_h = H.mask();
    std::vector<char> reached(box.vertex_count(), 0);
    std::vector<std::int64_t> stack;
    for (std::int64_t v = 0; v < box.vertex_count(); ++v) {
        if (!in_h[v] && box.on_hull(box.coord(v))) {
            reached[v] = 1;
            stack.push_back(v);
        }
    }
    while (!stack.empty()) {
        std::int64_t v = stack.back();
        stack.pop_back();
        for_each_neighbor(box, v, [&](std::int64_t w, EdgeSlot) {
            if (!in_h[w] && !reached[w]) {
                reached[w] = 1;
                stack.push_back(w);
            }
        });
    }
    OuterBoundary ob;
    std::vector<std::int64_t> verts;
    for (auto v : H.vertices) {
        bool outer = false;
        for_each_neighbor(box, v, [&](std::int64_t w, EdgeSlot s) {
            if (!in_h[w] && reached[w]) {
                ob.edges.push_back(s);
                outer = true;
            }
        });
        if (outer) verts.push_back(v);
    }
    std::sort(ob.edges.begin(), ob.edges.end());
    ob.vertices = Subgraph(box, std::move(verts));
    return ob;
}

bool star_connected(const std::vector<Coord>& points, int d) {
    if (points.empty()) return true;
    std::vector<Coord> pts(points);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    std::vector<char> seen(pts.size(), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t visited = 1;
    int nbrs = 1;
    for (int i = 0; i < d; ++i) nbrs *= 3;
    while (!stack.empty()) {
        Coord c = pts[stack.back()];
        stack.pop_back();
        for (int code = 0; code < nbrs; ++code) {
            Coord q = c;
            int t = code;
            bool self = true;
            for (int i = 0; i < d; ++i) {
                int off = t % 3 - 1;
                t /= 3;
                q[i] += off;
                if (off != 0) self = false;
            }
            if (self) continue;
            auto it = std::lower_bound(pts.begin(), pts.end(), q);
            if (it == pts.end() || *it != q) continue;
            std::size_t j = static_cast<std::size_t>(it - pts.begin());
            if (!seen[j]) {
                seen[j] = 1;
                ++visited;
                stack.push_back(j);
            }
        }
    }
    return visited == pts.size();
}

bool star_connected(const Subgraph& V) {
    std::vector<Coord> pts;
    pts.reserve(V.size());
    for (auto v : V.vertices) pts.push_back(V.box.coord(v));
    return star_connected(pts, V.box.d());
}

bool open_connected(const Subgraph& H, const Configuration& cfg) {
    if (H.empty()) return true;
    std::vector<char> seen(H.size(), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!stack.empty()) {
        std::int64_t v = H.vertices[stack.back()];
        stack.pop_back();
        for_each_neighbor(H.box, v, [&](std::int64_t w, EdgeSlot s) {
            if (!cfg.open(s)) return;
            auto it = std::lower_bound(H.vertices.begin(), H.vertices.end(), w);
            if (it == H.vertices.end() || *it != w) return;
            std::size_t j = static_cast<std::size_t>(it - H.vertices.begin());
            if (!seen[j]) {
                seen[j] = 1;
                ++visited;
                stack.push_back(j);
            }
        });
    }
    return visited == H.size();
}

DensityEstimate density_estimate(double p, int d, int n, int samples, std::uint64_t seed, int pad) {
    if (samples < 1) throw Error(ErrorCode::InvalidArgument, "samples must be >= 1");
    BoxSpec box(d, n, pad);
    DensityEstimate est;
    est.samples = parallel_map<double>(static_cast<std::size_t>(samples), [&](std::size_t i) {
        Configuration cfg = sample_configuration(p, box, derive_seed(seed, i));
        try {
            return static_cast<double>(giant_cluster_in_box(cfg).size()) /
                   static_cast<double>(box.core_vertex_count());
        } catch (const Error& e) {
            if (e.code() == ErrorCode::EmptyCluster) return 0.0;
            throw;
        }
    });
    double sum = 0.0;
    for (double x : est.samples) sum += x;
    est.theta = sum / samples;
    if (samples > 1) {
        double ss = 0.0;
        for (double x : est.samples) ss += (x - est.theta) * (x - est.theta);
        est.stderr_ = std::sqrt(ss / (samples - 1) / samples);
    }
    return est;
}

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
    unsigned char buf[sizeof(T)];
    std::uint64_t bits = 0;
    std::memcpy(&bits, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw Error(ErrorCode::IoError, "truncated configuration file");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
}

}  // namespace

void write_configuration(std::ostream& out, const Configuration& cfg) {
    const BoxSpec& box = cfg.box();
    out.write("PCFG", 4);
    put_le<std::uint32_t>(out, 1);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(box.d()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(box.n()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(box.pad()));
    put_le<double>(out, cfg.p());
    put_le<std::uint64_t>(out, cfg.seed());
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(box.edge_count()));
    unsigned char byte = 0;
    int nbits = 0;
    for (EdgeSlot s = 0; s < box.slot_count(); ++s) {
        if (!box.edge_exists(s)) continue;
        if (cfg.open(s)) byte |= static_cast<unsigned char>(1u << nbits);
        if (++nbits == 8) {
            out.put(static_cast<char>(byte));
            byte = 0;
            nbits = 0;
        }
    }
    if (nbits) out.put(static_cast<char>(byte));
}

Configuration read_configuration(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PCFG", 4) != 0) throw Error(ErrorCode::IoError, "not a configuration file");
    if (get_le<std::uint32_t>(in) != 1) throw Error(ErrorCode::IoError, "unsupported configuration version");
    int d = static_cast<int>(get_le<std::uint32_t>(in));
    int n = static_cast<int>(get_le<std::uint32_t>(in));
    int pad = static_cast<int>(get_le<std::uint32_t>(in));
    double p = get_le<double>(in);
    std::uint64_t seed = get_le<std::uint64_t>(in);
    std::uint64_t count = get_le<std::uint64_t>(in);
    BoxSpec box(d, n, pad);
    if (count != static_cast<std::uint64_t>(box.edge_count())) throw Error(ErrorCode::IoError, "edge count mismatch");
    std::vector<std::uint64_t> words((box.slot_count() + 63) / 64, 0);
    int nbits = 8;
    unsigned char byte = 0;
    for (EdgeSlot s = 0; s < box.slot_count(); ++s) {
        if (!box.edge_exists(s)) continue;
        if (nbits == 8) {
            int c = in.get();
            if (c == std::char_traits<char>::eof()) throw Error(ErrorCode::IoError, "truncated edge bitmap");
            byte = static_cast<unsigned char>(c);
            nbits = 0;
        }
        if ((byte >> nbits) & 1u) words[s >> 6] |= 1ULL << (s & 63);
        ++nbits;
    }
    return Configuration(box, p, seed, std::move(words));
}

std::string configuration_json(const Configuration& cfg) {
    nlohmann::json j;
    j["d"] = cfg.box().d();
    j["n"] = cfg.box().n();
    j["pad"] = cfg.box().pad();
    j["p"] = cfg.p();
    j["seed"] = cfg.seed();
    j["edge_count"] = cfg.box().edge_count();
    j["open_edges"] = cfg.open_count();
    j["vertex_count"] = cfg.box().vertex_count();
    return j.dump(2);
}

}  // namespace perciso
