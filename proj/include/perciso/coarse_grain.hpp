#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "perciso/lattice.hpp"

namespace perciso {

// k-cubes B(x) = 2kx + [-k,k]^d, 3k-cubes B3(x) = 2kx + [-3k,3k]^d, augmented B+(x) = 2kx + [-2k-1,2k+1]^d
struct CubeGrid {
    int d = 2;
    int k = 3;

    CubeGrid() = default;
    CubeGrid(int d, int k);

    Coord center(const Coord& x) const;
    // cubes whose closed k-cube contains z (between 1 and 2^d of them)
    std::vector<Coord> cubes_containing(const Coord& z) const;
    bool in_cube(const Coord& z, const Coord& x, int half) const;
    bool in_k(const Coord& z, const Coord& x) const { return in_cube(z, x, k); }
    bool in_3k(const Coord& z, const Coord& x) const { return in_cube(z, x, 3 * k); }
    bool in_plus(const Coord& z, const Coord& x) const { return in_cube(z, x, 2 * k + 1); }
};

enum class CubeType { None, TypeI, TypeII, Both };
std::string cube_type_name(CubeType t);
inline bool is_bad(CubeType t) { return t != CubeType::None; }

CubeType classify_cube(const Configuration& cfg, const CubeGrid& grid, const Coord& x);

struct TypeRateRow {
    int k = 0;
    int samples = 0;
    int bad = 0;
    double rate = 0.0;
    double stderr_ = 0.0;
};

std::vector<TypeRateRow> type_rate(double p, int d, const std::vector<int>& ks, int samples, std::uint64_t seed);

struct CoarseBoundary {
    std::vector<Coord> g_cubes;  // cubes meeting G or an endpoint of the outer boundary
    std::vector<Coord> a_cubes;  // cubes meeting an endpoint of the outer boundary
};

CoarseBoundary coarse_boundary(const Subgraph& G, const CubeGrid& grid);

enum class PondStatus { Live, AlmostLive, Dead };
std::string pond_status_name(PondStatus s);

struct Pond {
    std::vector<Coord> cubes;
    PondStatus status = PondStatus::Dead;
};

struct ZhangDecomposition {
    CubeGrid grid;
    std::vector<Coord> g_cubes, a_cubes, ocean, bridge_cubes, gamma_cubes;
    std::vector<Pond> ponds;
    std::vector<std::int64_t> bridge;   // vertex set (box indices)
    std::vector<EdgeSlot> closed_edges; // open edges of the outer boundary, closed in the modified configuration
    std::vector<EdgeSlot> gamma;        // extracted closed cutset
    std::vector<CubeType> gamma_types;  // per gamma cube, in the modified configuration
    Configuration omega_prime;
};

// Giant-cluster vertices joined to the giant vertex nearest the origin by open paths inside |z|_inf <= radius.
Subgraph giant_blob(const Configuration& cfg, int radius);

ZhangDecomposition zhang_decompose(const Configuration& cfg, const Subgraph& G, const CubeGrid& grid);

// Checks used by the tests and the acceptance run.
bool separates_from_hull(const Configuration& cfg, const Subgraph& G, const std::vector<EdgeSlot>& cut);

std::string decomposition_json(const ZhangDecomposition& z);

}  // namespace perciso
