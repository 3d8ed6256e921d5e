#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "perciso/cylinder_cuts.hpp"

namespace perciso {

struct ScaleRecord {
    double r = 0.0;
    double mean = 0.0;
    double stderr_ = 0.0;
    int samples = 0;
    bool suitable = true;
    std::string reason;
    std::vector<double> values;  // normalized cut values per sample
};

struct BetaOptions {
    double half_width = 1.0;
    double height = 1.0;
    SuitabilityPolicy policy = SuitabilityPolicy::Desk;
};

struct BetaEstimate {
    Vec v;
    std::vector<ScaleRecord> scales;
    double beta = 0.0;
    double ci = 0.0;
    double r_max = 0.0;
    int samples = 0;
    bool suitable = false;
};

// Sample i at scale index j uses the configuration seed derive_seed(derive_seed(seed, j), i),
// shared by every direction.
BetaEstimate estimate_beta(const Vec& v, double p, int d, const std::vector<double>& scales, int samples,
                           std::uint64_t seed, const BetaOptions& opts = {});

struct NormEntry {
    Vec v;
    double beta = 0.0;
    double ci = 0.0;
    double r_max = 0.0;
    int samples = 0;
};

struct NormTable {
    int d = 2;
    std::vector<NormEntry> entries;
    double p = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> scales;
    int samples = 0;
    std::uint64_t seed = 0;
    std::string provenance;
    // Vertices of the polytope {y : y.v <= beta(v)}; filled by finalize().
    std::vector<Vec> support_vertices;
    bool bounded = false;

    void finalize();
    const NormEntry* find(const Vec& v, double tol = 1e-9) const;
};

std::vector<Vec> default_directions(int d);
std::vector<Vec> axis_diagonal_directions(int d);
NormTable exact_norm_table(int d, const std::vector<Vec>& dirs, const std::function<double(const Vec&)>& norm,
                           const std::string& name);
double l1_norm(const Vec& x);
double euclidean_norm(const Vec& x);

// Conic envelope of the table: the support function of its Wulff polytope.
double norm_value(const NormTable& table, const Vec& x);

NormTable build_norm_table(double p, int d, const std::vector<Vec>& dirs, const std::vector<double>& scales,
                           int samples, std::uint64_t seed, const BetaOptions& opts = {});

struct SymmetryRow {
    Vec v, image;
    double diff = 0.0;
    double combined_ci = 0.0;
    bool violation = false;
};

struct SymmetryReport {
    std::vector<SymmetryRow> rows;
    int violations = 0;
    int missing_images = 0;
    double max_diff = 0.0;
};

SymmetryReport symmetry_audit(const NormTable& table);

struct ConcentrationReport {
    double r = 0.0;
    double eps = 0.0;
    double center = 0.0;
    double tail = 0.0;
    int samples = 0;
};

// center defaults to the sample mean at this scale
ConcentrationReport concentration_audit(const Vec& v, double p, int d, double r, int samples, double eps,
                                        std::uint64_t seed,
                                        double center = std::numeric_limits<double>::quiet_NaN());

std::string norm_table_csv(const NormTable& table, const std::string& header_comment = "");
NormTable parse_norm_table_csv(const std::string& text);
std::string norm_table_json(const NormTable& table);

}  // namespace perciso
