#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <unistd.h>

#include "json.hpp"
#include "oracles.hpp"
#include "perciso/cheeger.hpp"
#include "perciso/cli_harness.hpp"
#include "perciso/coarse_grain.hpp"
#include "perciso/cylinder_cuts.hpp"
#include "perciso/errors.hpp"
#include "perciso/rng.hpp"
#include "perciso/surface_tension.hpp"
#include "perciso/wulff_geometry.hpp"

using namespace perciso;
namespace fs = std::filesystem;

namespace {

// pinned tolerances and budgets
constexpr double kCutBudgetSeconds = 60.0;
constexpr std::size_t kMaxArena = 25;
constexpr double kNormTol = 1e-12;
constexpr double kSubcriticalBeta = 0.05;
constexpr double kSymmetrySigmas = 2.0;
constexpr double kWulffTol = 1e-9;
constexpr double kContainTol = 1e-12;
constexpr double kDeficitTol = 1e-6;
constexpr int kAnnealAgreement = 19;
constexpr double kAtomTol = 0x1p-30;
constexpr double kTriangleSlack = 1e-15;
constexpr double kDecayFactor = 0.5;
constexpr double kRatioLo = 0.5, kRatioHi = 2.0;
constexpr double kConvergeBudgetSeconds = 1800.0;
constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double x, int digits = 6) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

Outcome mincut_oracle() {
    auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(kSeed);
    const double ps[] = {0.3, 0.5, 0.8};
    const double rs[] = {1.5, 2.0, 2.5};
    int instances = 0, mismatches = 0;
    std::size_t largest = 0;
    while (instances < 50) {
        Vec v;
        switch (rng.below(4)) {
        case 0: v = {1.0, 0.0}; break;
        case 1: v = {0.0, 1.0}; break;
        case 2: v = {M_SQRT1_2, M_SQRT1_2}; break;
        default: {
            double a = 2.0 * M_PI * rng.uniform();
            v = {std::cos(a), std::sin(a)};
        }
        }
        CylinderSpec spec = CylinderSpec::anchored(v, rs[rng.below(3)]);
        DiscreteCylinder cyl = discrete_cylinder(spec);
        if (!cyl.suitable || cyl.vertices.size() > kMaxArena) continue;
        BoxSpec box = cylinder_box(spec);
        auto cfg = sample_configuration(ps[instances % 3], box, derive_seed(kSeed, instances));
        std::vector<std::size_t> all(cyl.vertices.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        auto arena = to_box_indices(box, cyl, all);
        auto hemi = oracle::exhaustive_cut(cfg, to_box_indices(box, cyl, cyl.hemi_plus),
                                           to_box_indices(box, cyl, cyl.hemi_minus), arena);
        auto face = oracle::exhaustive_cut(cfg, to_box_indices(box, cyl, cyl.face_plus),
                                           to_box_indices(box, cyl, cyl.face_minus), arena);
        mismatches += xi_hemi(cfg, cyl).value != hemi;
        mismatches += xi_face(cfg, cyl).value != face;
        largest = std::max(largest, cyl.vertices.size());
        ++instances;
    }
    double t = seconds_since(t0);
    return {mismatches == 0 && t < kCutBudgetSeconds,
            std::to_string(instances) + " instances (arena <= " + std::to_string(largest) + "), " +
                std::to_string(mismatches) + " mismatches, " + num(t, 3) + " s"};
}

Outcome exact_p1() {
    auto est = estimate_beta({1.0, 0.0}, 1.0, 2, {16.0}, 4, kSeed);
    auto l1 = exact_norm_table(2, axis_diagonal_directions(2), l1_norm, "l1");
    double nv = norm_value(l1, {3.0, 4.0});
    bool ok = est.beta == 33.0 / 32.0 && std::abs(nv - 7.0) <= kNormTol;
    return {ok, "beta(e1) = " + num(est.beta, 17) + ", norm_value((3,4)) = " + num(nv, 17)};
}

Outcome subcritical() {
    auto est = estimate_beta({1.0, 0.0}, 0.3, 2, {32.0}, 20, kSeed);
    return {est.beta < kSubcriticalBeta, "beta = " + num(est.beta)};
}

Outcome symmetry() {
    auto a = estimate_beta({1.0, 0.0}, 0.7, 2, {16.0}, 100, kSeed);
    auto b = estimate_beta({0.0, 1.0}, 0.7, 2, {16.0}, 100, kSeed);
    double diff = std::abs(a.beta - b.beta);
    double se = std::hypot(a.scales[0].stderr_, b.scales[0].stderr_);
    return {diff <= kSymmetrySigmas * se, "|diff| = " + num(diff) + ", combined stderr = " + num(se)};
}

NormTable monte_carlo_table() { return build_norm_table(0.7, 2, default_directions(2), {8.0}, 20, kSeed); }

NormTable euclid_table(int m) {
    std::vector<Vec> dirs;
    for (int i = 0; i < m; ++i) dirs.push_back({std::cos(2 * M_PI * i / m), std::sin(2 * M_PI * i / m)});
    return exact_norm_table(2, dirs, euclidean_norm, "euclidean");
}

Outcome wulff_exact() {
    bool ok = true;
    std::string detail;
    for (int d : {2, 3}) {
        auto table = exact_norm_table(d, axis_diagonal_directions(d), l1_norm, "l1");
        Polytope W = wulff_crystal(table);
        double h = vertex_hausdorff(W, axis_box(Vec(d, -1.0), Vec(d, 1.0)));
        double target = wulff_volume_target(d);
        double rel = std::abs(volume(dilate_to_volume(W, target)) - target) / target;
        ok = ok && h <= kWulffTol && rel <= kWulffTol;
        detail += "d=" + std::to_string(d) + " hausdorff " + num(h) + " vol err " + num(rel) + "; ";
    }
    int outside = 0;
    for (const NormTable& t : {exact_norm_table(3, axis_diagonal_directions(3), l1_norm, "l1"), euclid_table(64),
                               monte_carlo_table()}) {
        Polytope W = dilate_to_volume(wulff_crystal(t), wulff_volume_target(t.d));
        for (const Vec& x : W.vertices)
            for (double c : x) outside += std::abs(c) > 1.0 + kContainTol;
    }
    ok = ok && outside == 0;
    return {ok, detail + "containment violations " + std::to_string(outside)};
}

Outcome isoperimetry() {
    int violations = 0;
    std::string detail;
    const std::pair<const char*, NormTable> tables[] = {
        {"l1", exact_norm_table(2, axis_diagonal_directions(2), l1_norm, "l1")},
        {"euclidean", euclid_table(64)},
        {"monte-carlo", monte_carlo_table()}};
    for (const auto& [name, t] : tables) {
        auto rep = isoperimetric_deficit_test(t, 100, kSeed);
        int bad = 0;
        for (double def : rep.deficits) bad += def * rep.energy_wulff < -kDeficitTol;
        violations += bad;
        detail += std::string(name) + " " + std::to_string(bad) + "/" + std::to_string(rep.trials) + " ";
    }
    return {violations == 0, "violations: " + detail};
}

Outcome cheeger_exactness() {
    BoxSpec tiny(2, 1, 1);
    auto full = CheegerProblem::from_configuration(sample_configuration(1.0, tiny, 1));
    auto one = cheeger_exact(full);
    bool ok = one.num == 2 * one.den;
    int checked = 0, exact_ok = 0, anneal_ok = 0, below = 0;
    for (std::uint64_t s = 0; checked < 20; ++s) {
        BoxSpec box(2, 2, 1);
        auto prob = CheegerProblem::from_configuration(sample_configuration(0.7, box, derive_seed(kSeed, s)));
        if (prob.cn.size() > 18 || prob.cap < 1) continue;
        ++checked;
        auto [b, size] = oracle::brute_force(prob);
        auto ex = cheeger_exact(prob);
        exact_ok += ex.num * size == b * ex.den;
        auto an = cheeger_anneal(prob, {}, derive_seed(kSeed + 1, s));
        anneal_ok += an.num * size == b * an.den;
        below += an.num * size < b * an.den;
    }
    ok = ok && exact_ok == checked && anneal_ok >= kAnnealAgreement && below == 0;
    return {ok, "n=1 phi = " + std::to_string(one.num) + "/" + std::to_string(one.den) + "; exact " +
                    std::to_string(exact_ok) + "/20, anneal " + std::to_string(anneal_ok) + "/20, below oracle " +
                    std::to_string(below)};
}

Outcome metric() {
    auto atom = point_measure(2, 10, {{0.123456, -0.654321}}, {1.0});
    double av = d_metric(atom, point_measure(2, 10, {}, {})).value;
    bool ok = std::abs(av - 8.0 / 7.0) <= kAtomTol;

    SplitMix64 rng(kSeed);
    auto random_measure = [&]() {
        std::vector<Vec> pts;
        std::vector<double> w;
        int m = 1 + static_cast<int>(rng.below(6));
        for (int i = 0; i < m; ++i) {
            pts.push_back({2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0});
            w.push_back(rng.uniform());
        }
        return point_measure(2, 6, pts, w);
    };
    int axiom_failures = 0;
    for (int t = 0; t < 1000; ++t) {
        auto a = random_measure(), b = random_measure(), c = random_measure();
        double ab = d_metric(a, b).value, ba = d_metric(b, a).value;
        double ac = d_metric(a, c).value, bc = d_metric(b, c).value;
        axiom_failures += ab != ba || ab < 0.0 || d_metric(a, a).value != 0.0 || ac > ab + bc + kTriangleSlack;
    }

    int mass_failures = 0;
    for (int trial = 0; trial < 20; ++trial) {
        int d = 2 + trial % 2, n = 4 + trial, K = 4;
        BoxSpec box(d, n, 1);
        auto cfg = sample_configuration(0.7, box, derive_seed(kSeed, 100 + trial));
        auto cn = CheegerProblem::from_configuration(cfg).cn;
        auto mu = empirical_measure(cn, K);
        for (int k = 0; k <= K; ++k) {
            std::int64_t sum = 0;
            for (auto c : mu.count[k]) sum += c;
            mass_failures += sum != static_cast<std::int64_t>(cn.size());
        }
        mass_failures += mu.total_count != static_cast<std::int64_t>(cn.size());
    }
    ok = ok && axiom_failures == 0 && mass_failures == 0;
    return {ok, "atom " + num(av, 17) + ", axiom failures " + std::to_string(axiom_failures) +
                    ", mass failures " + std::to_string(mass_failures)};
}

Outcome zhang_suite() {
    int passed = 0, total = 0;
    std::string failures;
    for (int d : {2, 3}) {
        for (std::uint64_t s = 0; s < 10; ++s) {
            ++total;
            try {
                BoxSpec box(d, 12, 12);
                auto cfg = sample_configuration(0.7, box, derive_seed(kSeed + d, s));
                Subgraph G = giant_blob(cfg, 10);
                auto z = zhang_decompose(cfg, G, CubeGrid(d, 3));
                bool ok = separates_from_hull(cfg, G, z.gamma) &&
                          std::includes(z.a_cubes.begin(), z.a_cubes.end(), z.gamma_cubes.begin(),
                                        z.gamma_cubes.end()) &&
                          star_connected(z.gamma_cubes, d) &&
                          std::all_of(z.gamma_types.begin(), z.gamma_types.end(), is_bad);
                passed += ok;
                if (!ok) failures += " d=" + std::to_string(d) + "/s=" + std::to_string(s);
            } catch (const Error& e) {
                failures += std::string(" ") + error_name(e.code());
            }
        }
    }
    return {passed == total, std::to_string(passed) + "/" + std::to_string(total) + " instances" + failures};
}

Outcome type_decay() {
    auto rows = type_rate(0.8, 2, {2, 4, 8}, 500, kSeed);
    bool monotone = rows[0].rate >= rows[1].rate && rows[1].rate >= rows[2].rate;
    bool decays = rows[2].rate <= kDecayFactor * rows[0].rate;
    return {monotone && decays, "rates k=2,4,8: " + num(rows[0].rate) + ", " + num(rows[1].rate) + ", " +
                                    num(rows[2].rate)};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("perciso_acceptance_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return (path / name).string();
    }
};

const char* kBetaConfig = "p = 0.7\nd = 2\n[beta]\nscales = 8, 16\nsamples = 40\ndirections = default\n";

Outcome convergence(const TempDir& tmp) {
    auto t0 = std::chrono::steady_clock::now();
    std::string root = (tmp.path / "trend").string();
    auto beta = execute({"beta", tmp.write("trend_beta.cfg", kBetaConfig), root, kSeed, std::nullopt});
    if (beta.exit_code != 0) return {false, "beta run failed: " + beta.message};
    auto conv = execute({"converge", tmp.write("trend.cfg", "p = 0.7\nd = 2\n[converge]\nns = 8, 16, 24, 32\nseeds = 5\n"),
                         root, kSeed, std::nullopt});
    if (conv.exit_code != 0) return {false, "converge run failed: " + conv.message};
    std::ifstream in(fs::path(root) / "converge" / "converge.json");
    auto j = nlohmann::json::parse(in);
    bool ratios_ok = true;
    double worst_lo = 1e300, worst_hi = -1e300;
    for (const auto& row : j["rows"]) {
        if (row["n"].get<int>() < 16) continue;
        if (row["status"] != "ok") {
            ratios_ok = false;
            continue;
        }
        double r = row["ratio"].get<double>();
        worst_lo = std::min(worst_lo, r);
        worst_hi = std::max(worst_hi, r);
        ratios_ok = ratios_ok && r >= kRatioLo && r <= kRatioHi;
    }
    double l1_8 = NAN, l1_32 = NAN;
    for (const auto& s : j["summary"]) {
        if (!s.contains("median_l1_distance")) continue;
        if (s["n"] == 8) l1_8 = s["median_l1_distance"].get<double>();
        if (s["n"] == 32) l1_32 = s["median_l1_distance"].get<double>();
    }
    double t = seconds_since(t0);
    bool ok = ratios_ok && l1_32 < l1_8 && t <= kConvergeBudgetSeconds;
    return {ok, "ratio range (n>=16) [" + num(worst_lo, 4) + ", " + num(worst_hi, 4) + "], median l1 n=8 " +
                    num(l1_8, 4) + " n=32 " + num(l1_32, 4) + ", " + num(t, 3) + " s"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism(const TempDir& tmp) {
    const std::pair<const char*, const char*> runs[] = {
        {"sample", "p = 0.6\nd = 3\n[sample]\nn = 10\npad = 2\n"},
        {"beta", "p = 0.7\nd = 2\n[beta]\nscales = 6, 8\nsamples = 12\n"},
        {"wulff", "d = 2\n[wulff]\nnorm = euclidean\ndeficit_trials = 30\n"},
        {"cheeger", "p = 0.7\nd = 2\n[cheeger]\nn = 10\nnorm = l1\nrestarts = 4\nproposals = 30000\n"},
        {"coarse", "p = 0.8\nd = 2\n[coarse]\nks = 2, 3\nsamples = 60\nzhang_instances = 2\n"},
        {"converge", "p = 0.7\nd = 2\n[converge]\nns = 8, 12\nseeds = 2\nproposals = 30000\n"},
    };
    int files = 0, differing = 0;
    std::string bad;
    for (int threads : {1, 4}) {
        std::string root = (tmp.path / ("threads" + std::to_string(threads))).string();
        for (const auto& [kind, text] : runs) {
            auto r = execute({kind, tmp.write(std::string("det_") + kind + ".cfg", text), root, kSeed, threads});
            if (r.exit_code != 0) return {false, std::string(kind) + " failed: " + r.message};
        }
    }
    for (const auto& [kind, text] : runs) {
        for (int rerun = 0; rerun < 2; ++rerun) {
            fs::path a = tmp.path / "threads1" / kind, b = tmp.path / "threads4" / kind;
            for (const auto& entry : fs::directory_iterator(a)) {
                ++files;
                if (slurp(entry.path()) != slurp(b / entry.path().filename())) {
                    ++differing;
                    bad += " " + entry.path().filename().string();
                }
            }
            if (rerun == 0) {
                // identical rerun into the single-thread tree
                auto r = execute({kind, (tmp.path / (std::string("det_") + kind + ".cfg")).string(),
                                  (tmp.path / "threads1").string(), kSeed, 1});
                if (r.exit_code != 0) return {false, std::string(kind) + " rerun failed"};
            }
        }
    }
    return {differing == 0, std::to_string(files) + " file comparisons, " + std::to_string(differing) + " differ" + bad};
}

}  // namespace

int main() {
    TempDir tmp;
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"min-cut oracle equivalence", mincut_oracle},
        {"exact p=1 surface tension", exact_p1},
        {"subcritical degeneracy", subcritical},
        {"symmetry audit", symmetry},
        {"Wulff exactness", wulff_exact},
        {"isoperimetric optimality", isoperimetry},
        {"Cheeger exactness", cheeger_exactness},
        {"metric d", metric},
        {"Zhang suite", zhang_suite},
        {"type-rate decay", type_decay},
        {"convergence trend", [&] { return convergence(tmp); }},
        {"determinism", [&] { return determinism(tmp); }},
    };
    int failed = 0, index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %2d %s  %s: %s (%.1f s)\n", index, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", index - failed, index);
    return failed == 0 ? 0 : 1;
}
