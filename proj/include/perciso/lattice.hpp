#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace perciso {

constexpr int kMaxDim = 6;
using Coord = std::array<int, kMaxDim>;
using EdgeSlot = std::int64_t;  // vertex_index * d + axis, edge v -> v + e_axis

class BoxSpec {
public:
    BoxSpec() = default;
    // pad < 0 selects the default pad = n
    BoxSpec(int d, int n, int pad = -1);

    int d() const { return d_; }
    int n() const { return n_; }
    int pad() const { return pad_; }
    int half() const { return n_ + pad_; }
    int side() const { return 2 * half() + 1; }
    std::int64_t vertex_count() const { return vertex_count_; }
    std::int64_t stride(int axis) const { return stride_[axis]; }
    std::int64_t edge_count() const;
    std::int64_t slot_count() const { return vertex_count_ * d_; }

    Coord coord(std::int64_t index) const;
    std::int64_t index(const Coord& x) const;
    bool contains(const Coord& x) const;
    bool in_core(const Coord& x) const;
    bool on_hull(const Coord& x) const;
    bool edge_exists(EdgeSlot slot) const;
    std::int64_t core_vertex_count() const;

    bool operator==(const BoxSpec& o) const { return d_ == o.d_ && n_ == o.n_ && pad_ == o.pad_; }

private:
    int d_ = 2, n_ = 1, pad_ = 1;
    std::int64_t vertex_count_ = 9;
    std::array<std::int64_t, kMaxDim> stride_{};
};

inline std::int64_t slot_of(const BoxSpec& box, std::int64_t v, int axis) { return v * box.d() + axis; }
inline std::int64_t slot_vertex(const BoxSpec& box, EdgeSlot s) { return s / box.d(); }
inline int slot_axis(const BoxSpec& box, EdgeSlot s) { return static_cast<int>(s % box.d()); }
inline std::int64_t slot_head(const BoxSpec& box, EdgeSlot s) {
    return slot_vertex(box, s) + box.stride(slot_axis(box, s));
}

// Box-independent id: lexicographic index in a fixed global reference box, times d, plus axis.
std::uint64_t canonical_edge_id(int d, const Coord& tail, int axis);
std::uint64_t canonical_edge_id(const BoxSpec& box, EdgeSlot slot);

// Visits the lattice neighbours of v that lie in the box together with the joining edge slot.
template <class Fn>
void for_each_neighbor(const BoxSpec& box, std::int64_t v, Fn&& fn) {
    const int d = box.d();
    const int h = box.half();
    std::int64_t rest = v;
    for (int i = 0; i < d; ++i) {
        const std::int64_t s = box.stride(i);
        const int xi = static_cast<int>(rest / s) - h;
        rest %= s;
        if (xi < h) fn(v + s, slot_of(box, v, i));
        if (xi > -h) fn(v - s, slot_of(box, v - s, i));
    }
}

class Configuration {
public:
    Configuration() = default;
    Configuration(BoxSpec box, double p, std::uint64_t seed, std::vector<std::uint64_t> words);

    const BoxSpec& box() const { return box_; }
    double p() const { return p_; }
    std::uint64_t seed() const { return seed_; }
    bool open(EdgeSlot s) const { return (words_[s >> 6] >> (s & 63)) & 1ULL; }
    bool open(std::int64_t v, int axis) const { return open(slot_of(box_, v, axis)); }
    void set_open(EdgeSlot s, bool value);
    std::int64_t open_count() const;
    const std::vector<std::uint64_t>& words() const { return words_; }

private:
    BoxSpec box_;
    double p_ = 0.0;
    std::uint64_t seed_ = 0;
    std::vector<std::uint64_t> words_;
};

struct Subgraph {
    BoxSpec box;
    std::vector<std::int64_t> vertices;

    Subgraph() = default;
    Subgraph(BoxSpec b, std::vector<std::int64_t> v);
    std::size_t size() const { return vertices.size(); }
    bool empty() const { return vertices.empty(); }
    bool contains(std::int64_t v) const;
    std::vector<char> mask() const;
};

struct ClusterLabeling {
    static constexpr std::int64_t kIsolated = -1;
    std::vector<std::int64_t> label;
    std::vector<std::pair<std::int64_t, std::int64_t>> sizes;  // (label, size), sorted by label
    std::int64_t giant_label = kIsolated;

    std::int64_t size_of(std::int64_t lab) const;
};

struct OuterBoundary {
    std::vector<EdgeSlot> edges;  // the outer edge boundary
    Subgraph vertices;            // H-endpoints of the outer edges
};

struct DensityEstimate {
    double theta = 0.0;
    double stderr_ = 0.0;
    std::vector<double> samples;
};

Configuration sample_configuration(double p, const BoxSpec& box, std::uint64_t seed);
ClusterLabeling clusters(const Configuration& cfg);
Subgraph giant_cluster_in_box(const Configuration& cfg);
Subgraph giant_cluster_in_box(const Configuration& cfg, const ClusterLabeling& lab);

std::vector<EdgeSlot> edge_boundary(const Subgraph& H);
std::vector<EdgeSlot> open_edge_boundary(const Subgraph& H, const Configuration& cfg);
OuterBoundary outer_boundaries(const Subgraph& H);

bool star_connected(const std::vector<Coord>& points, int d);
bool star_connected(const Subgraph& V);
bool open_connected(const Subgraph& H, const Configuration& cfg);

DensityEstimate density_estimate(double p, int d, int n, int samples, std::uint64_t seed, int pad = -1);

// Binary layout (little-endian): magic "PCFG", u32 version, u32 d, u32 n, u32 pad,
// f64 p, u64 seed, u64 edge count, then the valid edges in slot order packed 8 per byte (LSB first).
void write_configuration(std::ostream& out, const Configuration& cfg);
Configuration read_configuration(std::istream& in);
std::string configuration_json(const Configuration& cfg);

}  // namespace perciso
