#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "perciso/surface_tension.hpp"

namespace perciso {

constexpr double kGeomTol = 1e-9;
constexpr double kReportTol = 1e-6;

struct Halfspace {
    Vec normal;  // unit
    double offset = 0.0;
};

struct PolyFace {
    std::vector<int> vertices;  // d=2: the two endpoints; d=3: counter-clockwise cycle seen from outside
    Vec normal;
    double measure = 0.0;
};

struct Polytope {
    int d = 2;
    std::vector<Halfspace> halfspaces;  // one per face
    std::vector<Vec> vertices;          // d=2: counter-clockwise order
    std::vector<PolyFace> faces;

    bool contains(const Vec& x, double tol = kGeomTol) const;
    Vec centroid() const;  // vertex average
};

using NormFn = std::function<double(const Vec&)>;

// Intersection of half-spaces; `interior` must satisfy every inequality strictly.
Polytope polytope_from_halfspaces(const std::vector<Halfspace>& hs, int d, const Vec& interior = {});
Polytope wulff_crystal(const NormTable& table);
Polytope wulff_crystal(int d, const std::vector<Vec>& dirs, const NormFn& norm);
Polytope axis_box(const Vec& lo, const Vec& hi);
Polytope scaled(const Polytope& P, double s);
Polytope translated(const Polytope& P, const Vec& t);
Polytope dilate_to_volume(const Polytope& P, double target);

double volume(const Polytope& P);
double surface_energy(const Polytope& P, const NormTable& table);
double surface_energy(const Polytope& P, const NormFn& norm);
double continuum_conductance(const Polytope& P, const NormTable& table, double theta);
double support(const Polytope& P, const Vec& v);
double vertex_hausdorff(const Polytope& P, const Polytope& Q);
int euler_characteristic(const Polytope& P);  // V - E + F of the boundary (d=3)
double wulff_volume_target(int d);              // 2^d / d!

// Volume of P ∩ Q and of P ∩ box by convex clipping (independent of the dual-hull construction).
double intersection_volume(const Polytope& P, const Polytope& Q);
double box_intersection_volume(const Polytope& P, const Vec& lo, const Vec& hi);
double clipped_volume(const Polytope& P, const std::vector<Halfspace>& cuts);

struct EnergyReport {
    double volume = 0.0;
    double energy = 0.0;
    double conductance = 0.0;
    double theta = 1.0;
    std::string provenance;
};

EnergyReport energy_report(const Polytope& P, const NormTable& table, double theta);

// Random bounded polytope containing the origin: random half-spaces plus a bounding box.
Polytope random_polytope(int d, std::uint64_t seed);

// inf over translations x of vol(F Δ (x + W)) / vol(F), grid search with three refinements by 4
double asymmetry_index(const Polytope& F, const Polytope& W);

struct DeficitReport {
    int trials = 0;
    int violations = 0;
    double energy_wulff = 0.0;
    double volume_wulff = 0.0;
    std::vector<double> deficits;
    std::vector<double> asymmetry;
    double min_deficit = 0.0;
};

DeficitReport isoperimetric_deficit_test(const NormTable& table, int trials, std::uint64_t seed,
                                         bool with_asymmetry = true);

std::string polytope_off(const Polytope& P);
std::string polytope_json(const Polytope& P);
std::string energy_report_json(const EnergyReport& rep);

}  // namespace perciso
