#include "perciso/surface_tension.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "linalg.hpp"
#include "perciso/errors.hpp"
#include "perciso/parallel.hpp"
#include "perciso/rng.hpp"

namespace perciso {

namespace {

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void mean_stderr(const std::vector<double>& xs, double& mean, double& se) {
    mean = 0.0;
    se = 0.0;
    if (xs.empty()) return;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

BetaEstimate estimate_beta(const Vec& v, double p, int d, const std::vector<double>& scales, int samples,
                           std::uint64_t seed, const BetaOptions& opts) {
    if (static_cast<int>(v.size()) != d) throw Error(ErrorCode::InvalidArgument, "direction dimension mismatch");
    if (samples < 1) throw Error(ErrorCode::InvalidArgument, "samples must be >= 1");
    if (scales.empty()) throw Error(ErrorCode::InvalidArgument, "no scales given");
    for (std::size_t j = 1; j < scales.size(); ++j)
        if (!(scales[j] > scales[j - 1])) throw Error(ErrorCode::InvalidArgument, "scales must be increasing");
    BetaEstimate est;
    est.v = v;
    est.samples = samples;
    for (std::size_t j = 0; j < scales.size(); ++j) {
        const double r = scales[j];
        CylinderSpec spec = CylinderSpec::anchored(v, r, opts.half_width, opts.height);
        spec.policy = opts.policy;
        DiscreteCylinder cyl = discrete_cylinder(spec);
        ScaleRecord rec;
        rec.r = r;
        rec.samples = samples;
        rec.suitable = cyl.suitable;
        rec.reason = cyl.reason;
        if (cyl.suitable) {
            BoxSpec box = cylinder_box(spec);
            const double area = std::pow(2.0 * r * opts.half_width, d - 1);
            const std::uint64_t scale_seed = derive_seed(seed, j);
            rec.values = parallel_map<double>(static_cast<std::size_t>(samples), [&](std::size_t i) {
                Configuration cfg = sample_configuration(p, box, derive_seed(scale_seed, i));
                return static_cast<double>(xi_hemi(cfg, cyl).value) / area;
            });
            mean_stderr(rec.values, rec.mean, rec.stderr_);
        }
        est.scales.push_back(rec);
    }
    for (auto it = est.scales.rbegin(); it != est.scales.rend(); ++it) {
        if (!it->suitable) continue;
        est.beta = it->mean;
        est.ci = 1.96 * it->stderr_;
        est.r_max = it->r;
        est.suitable = true;
        break;
    }
    return est;
}

double l1_norm(const Vec& x) {
    double s = 0.0;
    for (double c : x) s += std::abs(c);
    return s;
}

double euclidean_norm(const Vec& x) { return std::sqrt(dot(x, x)); }

std::vector<Vec> axis_diagonal_directions(int d) {
    std::vector<Vec> out;
    for (int i = 0; i < d; ++i)
        for (int s = 1; s >= -1; s -= 2) {
            Vec v(d, 0.0);
            v[i] = s;
            out.push_back(v);
        }
    for (int mask = 0; mask < (1 << d); ++mask) {
        Vec v(d);
        for (int i = 0; i < d; ++i) v[i] = ((mask >> i) & 1 ? -1.0 : 1.0) / std::sqrt(static_cast<double>(d));
        out.push_back(v);
    }
    return out;
}

std::vector<Vec> default_directions(int d) {
    std::vector<Vec> out = axis_diagonal_directions(d);
    if (d == 3) {
        const double golden = M_PI * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < 50; ++i) {
            double z = 1.0 - (2.0 * i + 1.0) / 50.0;
            double rr = std::sqrt(1.0 - z * z);
            double phi = golden * i;
            Vec v{rr * std::cos(phi), rr * std::sin(phi), z};
            bool dup = false;
            for (const Vec& w : out)
                if (std::abs(dot(v, w) - 1.0) < 1e-12) dup = true;
            if (!dup) out.push_back(v);
        }
    }
    return out;
}

void NormTable::finalize() {
    support_vertices.clear();
    bounded = false;
    const int m = static_cast<int>(entries.size());
    if (m < d + 1) return;
    for (const auto& e : entries)
        if (static_cast<int>(e.v.size()) != d) throw Error(ErrorCode::InvalidArgument, "direction dimension mismatch");
    // recession cone {y : y.v <= 0 for all v} must be trivial
    bool unbounded = false;
    detail::for_each_subset(m, d - 1, [&](const std::vector<int>& pick) {
        if (unbounded) return;
        std::vector<Vec> rows;
        for (int i : pick) rows.push_back(entries[i].v);
        Vec y = detail::null_vector(rows, d);
        double len = std::sqrt(dot(y, y));
        if (len < 1e-12) return;
        for (double sgn : {1.0, -1.0}) {
            bool ok = true;
            for (const auto& e : entries)
                if (sgn * dot(y, e.v) / len > 1e-12) {
                    ok = false;
                    break;
                }
            if (ok) unbounded = true;
        }
    });
    if (unbounded) return;
    bounded = true;
    detail::for_each_subset(m, d, [&](const std::vector<int>& pick) {
        std::vector<double> A(d * d), b(d);
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) A[r * d + c] = entries[pick[r]].v[c];
            b[r] = entries[pick[r]].beta;
        }
        Vec y;
        if (!detail::solve_linear(A, b, d, y, 1e-10)) return;
        for (const auto& e : entries)
            if (dot(y, e.v) > e.beta + 1e-9) return;
        for (const Vec& w : support_vertices) {
            double dist = 0.0;
            for (int i = 0; i < d; ++i) dist = std::max(dist, std::abs(w[i] - y[i]));
            if (dist < 1e-9) return;
        }
        support_vertices.push_back(y);
    });
}

const NormEntry* NormTable::find(const Vec& v, double tol) const {
    for (const auto& e : entries) {
        double dist = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) dist = std::max(dist, std::abs(e.v[i] - v[i]));
        if (dist <= tol) return &e;
    }
    return nullptr;
}

NormTable exact_norm_table(int d, const std::vector<Vec>& dirs, const std::function<double(const Vec&)>& norm,
                           const std::string& name) {
    NormTable t;
    t.d = d;
    t.provenance = name;
    for (const Vec& v : dirs) t.entries.push_back({v, norm(v), 0.0, 0.0, 0});
    t.finalize();
    return t;
}

double norm_value(const NormTable& table, const Vec& x) {
    double len = std::sqrt(dot(x, x));
    if (len == 0.0) return 0.0;
    if (table.entries.empty()) throw Error(ErrorCode::InvalidArgument, "empty norm table");
    if (table.bounded && !table.support_vertices.empty()) {
        double h = -std::numeric_limits<double>::infinity();
        for (const Vec& w : table.support_vertices) h = std::max(h, dot(x, w));
        return h;
    }
    const NormEntry* best = &table.entries.front();
    double bc = -2.0;
    for (const auto& e : table.entries) {
        double c = dot(e.v, x) / len;
        if (c > bc) {
            bc = c;
            best = &e;
        }
    }
    return len * best->beta;
}

NormTable build_norm_table(double p, int d, const std::vector<Vec>& dirs, const std::vector<double>& scales,
                           int samples, std::uint64_t seed, const BetaOptions& opts) {
    NormTable t;
    t.d = d;
    t.p = p;
    t.scales = scales;
    t.samples = samples;
    t.seed = seed;
    t.provenance = "monte-carlo";
    for (const Vec& v : dirs) {
        BetaEstimate est = estimate_beta(v, p, d, scales, samples, seed, opts);
        if (!est.suitable) continue;
        t.entries.push_back({v, est.beta, est.ci, est.r_max, samples});
    }
    t.finalize();
    return t;
}

SymmetryReport symmetry_audit(const NormTable& table) {
    const int d = table.d;
    std::vector<int> perm(d);
    for (int i = 0; i < d; ++i) perm[i] = i;
    SymmetryReport rep;
    do {
        for (int signs = 0; signs < (1 << d); ++signs) {
            bool identity = signs == 0;
            for (int i = 0; i < d; ++i)
                if (perm[i] != i) identity = false;
            if (identity) continue;
            for (const auto& e : table.entries) {
                Vec img(d);
                for (int i = 0; i < d; ++i) img[i] = ((signs >> i) & 1 ? -1.0 : 1.0) * e.v[perm[i]];
                const NormEntry* other = table.find(img);
                if (!other) {
                    ++rep.missing_images;
                    continue;
                }
                SymmetryRow row;
                row.v = e.v;
                row.image = img;
                row.diff = std::abs(other->beta - e.beta);
                row.combined_ci = std::hypot(e.ci, other->ci);
                row.violation = row.combined_ci > 0.0 ? row.diff > 2.0 * row.combined_ci : row.diff > 1e-12;
                rep.max_diff = std::max(rep.max_diff, row.diff);
                rep.violations += row.violation;
                rep.rows.push_back(row);
            }
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return rep;
}

ConcentrationReport concentration_audit(const Vec& v, double p, int d, double r, int samples, double eps,
                                        std::uint64_t seed, double center) {
    if (samples < 100) throw Error(ErrorCode::InvalidArgument, "concentration audit needs >= 100 samples");
    BetaEstimate est = estimate_beta(v, p, d, {r}, samples, seed);
    ConcentrationReport rep;
    rep.r = r;
    rep.eps = eps;
    rep.samples = samples;
    const ScaleRecord& rec = est.scales.front();
    if (!rec.suitable) throw Error(ErrorCode::Unsuitable, rec.reason);
    rep.center = std::isnan(center) ? rec.mean : center;
    int hits = 0;
    for (double x : rec.values)
        if (std::abs(x - rep.center) >= eps) ++hits;
    rep.tail = static_cast<double>(hits) / samples;
    return rep;
}

std::string norm_table_csv(const NormTable& table, const std::string& header_comment) {
    std::ostringstream out;
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    for (int i = 0; i < table.d; ++i) out << "v" << i << ",";
    out << "beta,ci,r_max,samples\n";
    for (const auto& e : table.entries) {
        for (double c : e.v) out << fmt(c) << ",";
        out << fmt(e.beta) << "," << fmt(e.ci) << "," << fmt(e.r_max) << "," << e.samples << "\n";
    }
    return out.str();
}

NormTable parse_norm_table_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    NormTable t;
    t.d = 0;
    bool header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!header) {
            if (cells.size() < 6 || cells[cells.size() - 4] != "beta")
                throw Error(ErrorCode::IoError, "norm table header not recognised");
            t.d = static_cast<int>(cells.size()) - 4;
            header = true;
            continue;
        }
        if (static_cast<int>(cells.size()) != t.d + 4)
            throw Error(ErrorCode::IoError, "norm table row " + std::to_string(lineno) + " has wrong width");
        NormEntry e;
        try {
            for (int i = 0; i < t.d; ++i) e.v.push_back(std::stod(cells[i]));
            e.beta = std::stod(cells[t.d]);
            e.ci = std::stod(cells[t.d + 1]);
            e.r_max = std::stod(cells[t.d + 2]);
            e.samples = std::stoi(cells[t.d + 3]);
        } catch (const std::exception&) {
            throw Error(ErrorCode::IoError, "norm table row " + std::to_string(lineno) + " is not numeric");
        }
        t.entries.push_back(e);
    }
    if (!header || t.entries.empty()) throw Error(ErrorCode::IoError, "empty norm table");
    if (t.d < 2 || t.d > kMaxDim) throw Error(ErrorCode::IoError, "norm table dimension out of range");
    t.provenance = "csv";
    t.finalize();
    return t;
}

std::string norm_table_json(const NormTable& table) {
    nlohmann::json j;
    j["d"] = table.d;
    if (!std::isnan(table.p)) j["p"] = table.p;
    j["scales"] = table.scales;
    j["samples"] = table.samples;
    j["seed"] = table.seed;
    j["provenance"] = table.provenance;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : table.entries)
        rows.push_back({{"v", e.v}, {"beta", e.beta}, {"ci", e.ci}, {"r_max", e.r_max}, {"samples", e.samples}});
    j["entries"] = rows;
    return j.dump(2);
}

}  // namespace perciso
