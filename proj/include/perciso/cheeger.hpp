#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "perciso/lattice.hpp"
#include "perciso/wulff_geometry.hpp"

namespace perciso {

struct CheegerProblem {
    Configuration cfg;
    Subgraph cn;  // giant cluster ∩ [-n,n]^d
    std::int64_t cap = 0;

    // cap < 0 selects floor(|Cn| / d!)
    static CheegerProblem from_configuration(const Configuration& cfg, std::int64_t cap = -1);
};

enum class CheegerMethod { Exact, Anneal, Carve };
std::string method_name(CheegerMethod m);

struct CheegerSolution {
    std::int64_t num = 0;  // |∂^ω H|
    std::int64_t den = 1;  // |H|
    Subgraph witness;
    CheegerMethod method = CheegerMethod::Exact;
    bool certified = false;
    std::uint64_t seed = 0;
    // carve only
    double delta = 0.0;
    int retries = 0;
    std::vector<EdgeSlot> gamma;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// (a, b) strictly better than (c, e): smaller ratio, then lexicographically smaller witness
bool better_solution(const CheegerSolution& a, const CheegerSolution& b);
bool audit_solution(const CheegerProblem& prob, const CheegerSolution& sol);

constexpr std::size_t kExactBudget = 22;

CheegerSolution cheeger_exact(const CheegerProblem& prob);

struct AnnealParams {
    int restarts = 8;
    std::int64_t proposals = 200000;
    double t0 = 1.0;
    double cooling = 0.995;
    int cooling_steps = 2000;
    double translate_rate = 0.01;
    int bfs_budget = 256;
    std::vector<Subgraph> seeds;  // used for the first restarts
};

CheegerSolution cheeger_anneal(const CheegerProblem& prob, const AnnealParams& params, std::uint64_t seed);

struct CarveParams {
    double eps = 0.05;         // calibration slack
    double delta = -1.0;       // < 0: calibrate from the cluster density
    int retries = 5;
    double margin = 2.0;       // tile clearance from face edges beyond the cylinder height, lattice units
    double tile_half_width = 0.0;  // d=3; 0 selects max(3, 2 * height)
};

double carve_delta(double theta, int d, double eps);
CheegerSolution carve_polytope(const CheegerProblem& prob, const Polytope& P, double h,
                               const CarveParams& params = {});

struct EmpiricalMeasure {
    int d = 2;
    int K = 8;
    double denom = 1.0;                             // n^d for lattice measures
    std::vector<std::vector<double>> mass;          // mass[k][cube], 2^{dk} cubes, axis 0 most significant
    std::vector<std::vector<std::int64_t>> count;   // lattice measures only: mass = count / denom
    double total = 0.0;
    std::int64_t total_count = 0;
};

// Index of the dyadic cube of [-1,1]^d at scale k containing t (lower cube on ties).
std::int64_t dyadic_index(const Vec& t, int k);
std::int64_t dyadic_index(const Coord& x, int d, int n, int k);

EmpiricalMeasure empirical_measure(const Subgraph& H, int K);
EmpiricalMeasure point_measure(int d, int K, const std::vector<Vec>& points, const std::vector<double>& weights);
EmpiricalMeasure measure_of_set(const Polytope& E, double theta, int n, int K);

struct MetricValue {
    double value = 0.0;
    double truncation = 0.0;
};

MetricValue d_metric(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

struct TranslationGrid {
    int coarse_step = 4;  // in units of 1/n
    int refine_radius = 1;
};

struct ShapeDistance {
    double value = 0.0;
    Vec translate;
};

ShapeDistance distance_to_wulff_set(const EmpiricalMeasure& mu, const Polytope& W, double theta, int n,
                                    const TranslationGrid& grid = {});
ShapeDistance l1_shape_distance(const Subgraph& H, const CheegerProblem& prob, const Polytope& W,
                                const TranslationGrid& grid = {});

std::string solution_json(const CheegerSolution& sol, bool with_witness = true);
std::string measure_csv(const EmpiricalMeasure& m);

}  // namespace perciso
