#include <cmath>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "json.hpp"
#include "perciso/cheeger.hpp"
#include "perciso/errors.hpp"
#include "perciso/rng.hpp"

using namespace perciso;
using oracle::brute_force;

namespace {

CheegerProblem full_problem(int d, int n, std::int64_t cap = -1) {
    BoxSpec box(d, n, n);
    return CheegerProblem::from_configuration(sample_configuration(1.0, box, 1), cap);
}

std::vector<CheegerProblem> small_instances(int count) {
    std::vector<CheegerProblem> out;
    for (std::uint64_t s = 0; static_cast<int>(out.size()) < count; ++s) {
        BoxSpec box(2, 2, 1);
        auto cfg = sample_configuration(0.7, box, derive_seed(4242, s));
        auto prob = CheegerProblem::from_configuration(cfg);
        if (prob.cn.size() <= 18 && prob.cap >= 1) out.push_back(prob);
    }
    return out;
}

bool same_value(const CheegerSolution& a, std::int64_t b, std::int64_t s) { return a.num * s == b * a.den; }

}  // namespace

TEST_CASE("exact solver on the full 3x3 grid") {
    auto prob = full_problem(2, 1);
    CHECK(prob.cn.size() == 9);
    CHECK(prob.cap == 4);
    auto sol = cheeger_exact(prob);
    CHECK(sol.num == 8);
    CHECK(sol.den == 4);
    CHECK(sol.certified);
    CHECK(audit_solution(prob, sol));
    auto one = cheeger_exact(full_problem(2, 1, 1));
    CHECK(one.num == 4);
    CHECK(one.den == 1);
    CHECK_THROWS_AS(cheeger_exact(full_problem(2, 1, 0)), Error);
    CHECK_THROWS_AS(cheeger_exact(full_problem(2, 2)), Error);
}

TEST_CASE("exact solver equals the all-subsets oracle") {
    for (const auto& prob : small_instances(20)) {
        auto sol = cheeger_exact(prob);
        auto [b, s] = brute_force(prob);
        CHECK(same_value(sol, b, s));
        CHECK(audit_solution(prob, sol));
        CHECK(open_connected(sol.witness, prob.cfg));
    }
}

TEST_CASE("annealer against the exact solver") {
    AnnealParams params;
    params.proposals = 20000;
    int agree = 0;
    auto probs = small_instances(20);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        auto ex = cheeger_exact(probs[i]);
        for (std::uint64_t seed : {11ULL + i, 1000ULL + i}) {
            auto an = cheeger_anneal(probs[i], params, seed);
            CHECK(audit_solution(probs[i], an));
            CHECK_FALSE(better_solution(an, ex));
            CHECK(an.num * ex.den >= ex.num * an.den);
            if (seed < 1000) agree += an.num * ex.den == ex.num * an.den;
        }
    }
    CHECK(agree >= 19);
}

TEST_CASE("annealer finds the p=1 quasi-square optimum") {
    auto prob = full_problem(2, 4);
    REQUIRE(prob.cap == 40);
    // polyomino of area A has perimeter at least 2*ceil(2*sqrt(A))
    std::int64_t bb = 0, bs = 0;
    for (std::int64_t A = 1; A <= prob.cap; ++A) {
        std::int64_t per = 2 * static_cast<std::int64_t>(std::ceil(2.0 * std::sqrt(static_cast<double>(A)) - 1e-12));
        if (bs == 0 || per * bs < bb * A) bb = per, bs = A;
    }
    CHECK(bb * 20 == 13 * bs);
    auto an = cheeger_anneal(prob, AnnealParams{}, 5);
    CHECK(an.num * bs == bb * an.den);
    CHECK(audit_solution(prob, an));
}

TEST_CASE("annealer is deterministic") {
    BoxSpec box(2, 6, 6);
    auto prob = CheegerProblem::from_configuration(sample_configuration(0.7, box, 3));
    AnnealParams params;
    params.proposals = 5000;
    auto a = cheeger_anneal(prob, params, 9);
    auto b = cheeger_anneal(prob, params, 9);
    CHECK(a.witness.vertices == b.witness.vertices);
    CHECK(a.num == b.num);
}

TEST_CASE("carving the p=1 square") {
    auto prob = full_problem(2, 16);
    Polytope W = dilate_to_volume(wulff_crystal(exact_norm_table(2, axis_diagonal_directions(2), l1_norm, "l1")), 2.0);
    auto sol = carve_polytope(prob, W, 0.1);
    CHECK(audit_solution(prob, sol));
    double cont = continuum_conductance(W, exact_norm_table(2, axis_diagonal_directions(2), l1_norm, "l1"), 1.0);
    CHECK(std::abs(16.0 * sol.value() / cont - 1.0) < 0.25);
    auto bd = open_edge_boundary(sol.witness, prob.cfg);
    CHECK(std::includes(sol.gamma.begin(), sol.gamma.end(), bd.begin(), bd.end()));

    auto roomy = full_problem(2, 16, 1 << 20);
    auto loose = carve_polytope(roomy, W, 0.1);
    CHECK(loose.retries == 0);
    const BoxSpec& box = roomy.cfg.box();
    for (auto v : loose.witness.vertices) {
        Coord x = box.coord(v);
        CHECK(W.contains({x[0] / 16.0, x[1] / 16.0}));
    }
}

TEST_CASE("carving random configurations") {
    Polytope W2 = dilate_to_volume(wulff_crystal(exact_norm_table(2, default_directions(2), euclidean_norm, "e")), 2.0);
    Polytope W3 =
        dilate_to_volume(wulff_crystal(exact_norm_table(3, axis_diagonal_directions(3), euclidean_norm, "e")), 8.0 / 6.0);
    for (std::uint64_t s = 0; s < 3; ++s) {
        for (int d : {2, 3}) {
            BoxSpec box(d, d == 2 ? 16 : 8, d == 2 ? 4 : 3);
            auto prob = CheegerProblem::from_configuration(sample_configuration(0.7, box, s + 10));
            auto sol = carve_polytope(prob, d == 2 ? W2 : W3, 0.1);
            CHECK(audit_solution(prob, sol));
            auto bd = open_edge_boundary(sol.witness, prob.cfg);
            CHECK(std::includes(sol.gamma.begin(), sol.gamma.end(), bd.begin(), bd.end()));
        }
    }
}

TEST_CASE("carve rejects oversized bodies") {
    auto prob = full_problem(2, 4);
    CHECK_THROWS_AS(carve_polytope(prob, axis_box({-1, -1}, {1, 1}), 0.1), Error);
    CHECK_THROWS_AS(carve_polytope(prob, axis_box({-2, -0.1}, {2, 0.1}), 0.1), Error);
}

TEST_CASE("empirical measure basics") {
    BoxSpec box(2, 4, 2);
    std::vector<std::int64_t> core;
    for (std::int64_t v = 0; v < box.vertex_count(); ++v)
        if (box.in_core(box.coord(v))) core.push_back(v);
    auto all = empirical_measure(Subgraph(box, core), 3);
    CHECK(all.mass[0][0] == 81.0 / 16.0);
    CHECK(all.total_count == 81);
    auto none = empirical_measure(Subgraph(box, {}), 3);
    for (const auto& level : none.mass)
        for (double x : level) CHECK(x == 0.0);
    CHECK(dyadic_index(Coord{0, 0}, 2, 4, 1) == 0);   // the centre ties to the lowest cube
    CHECK(dyadic_index(Coord{1, 0}, 2, 4, 1) == 2);
    CHECK(dyadic_index(Coord{-4, 4}, 2, 4, 1) == 1);
}

TEST_CASE("empirical measure recount oracle") {
    SplitMix64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        int d = 2 + trial % 2, n = 3 + trial % 5, K = 4;
        BoxSpec box(d, n, 1);
        std::vector<std::int64_t> H;
        for (std::int64_t v = 0; v < box.vertex_count(); ++v)
            if (box.in_core(box.coord(v)) && rng.uniform() < 0.4) H.push_back(v);
        auto mu = empirical_measure(Subgraph(box, H), K);
        for (int k = 0; k <= K; ++k) {
            std::int64_t side = std::int64_t{1} << k;
            std::vector<std::int64_t> recount(mu.count[k].size(), 0);
            for (auto v : H) {
                Coord x = box.coord(v);
                std::int64_t idx = 0;
                for (int i = 0; i < d; ++i) {
                    double t = static_cast<double>(x[i]) / n, len = 2.0 / side;
                    std::int64_t j = 0;
                    while (!(-1.0 + j * len <= t + 1e-12 && t <= -1.0 + (j + 1) * len + 1e-12)) ++j;
                    idx = idx * side + j;
                }
                ++recount[idx];
            }
            CHECK(recount == mu.count[k]);
            std::int64_t sum = 0;
            for (auto c : mu.count[k]) sum += c;
            CHECK(sum == static_cast<std::int64_t>(H.size()));
            if (k > 0) {
                std::vector<double> from_children(mu.mass[k - 1].size(), 0.0);
                for (std::size_t q = 0; q < mu.mass[k].size(); ++q) {
                    std::int64_t rest = static_cast<std::int64_t>(q), parent = 0, mult = 1;
                    for (int i = 0; i < d; ++i) {
                        parent += ((rest % side) / 2) * mult;
                        rest /= side;
                        mult *= side / 2;
                    }
                    from_children[parent] += mu.mass[k][q];
                }
                for (std::size_t q = 0; q < from_children.size(); ++q)
                    CHECK(std::abs(from_children[q] - mu.mass[k - 1][q]) < 1e-12);
            }
        }
        CHECK(mu.total_count == static_cast<std::int64_t>(H.size()));
    }
}

TEST_CASE("atom versus zero") {
    auto atom = point_measure(2, 10, {{0.123456, -0.654321}}, {1.0});
    auto zero = point_measure(2, 10, {}, {});
    auto r = d_metric(atom, zero);
    CHECK(std::abs(r.value - 8.0 / 7.0) <= std::ldexp(1.0, -30));
    CHECK(r.truncation == doctest::Approx(std::ldexp(1.0, -10)));
    CHECK(d_metric(atom, atom).value == 0.0);
    CHECK_THROWS_AS(d_metric(atom, point_measure(2, 9, {}, {})), Error);
}

TEST_CASE("metric axioms on random measures") {
    SplitMix64 rng(31);
    auto random_measure = [&]() {
        std::vector<Vec> pts;
        std::vector<double> w;
        int m = 1 + static_cast<int>(rng.below(6));
        for (int i = 0; i < m; ++i) {
            pts.push_back({2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0});
            w.push_back(rng.uniform());
        }
        return point_measure(2, 5, pts, w);
    };
    int failures = 0;
    for (int t = 0; t < 1000; ++t) {
        auto a = random_measure(), b = random_measure(), c = random_measure();
        double ab = d_metric(a, b).value, ba = d_metric(b, a).value;
        double bc = d_metric(b, c).value, ac = d_metric(a, c).value;
        failures += ab != ba;
        failures += ac > ab + bc + 1e-15;
        failures += d_metric(a, a).value != 0.0;
        failures += ab < 0.0;
    }
    CHECK(failures == 0);
}

TEST_CASE("measure of a set") {
    auto cube = measure_of_set(axis_box({-1, -1}, {1, 1}), 1.0, 8, 4);
    for (int k = 0; k <= 4; ++k)
        for (double x : cube.mass[k]) CHECK(x == doctest::Approx(std::pow(2.0 / (1 << k), 2)).epsilon(1e-12));
    Polytope W = dilate_to_volume(wulff_crystal(exact_norm_table(2, default_directions(2), euclidean_norm, "e")), 2.0);
    auto mu = measure_of_set(W, 0.8, 16, 6);
    CHECK(mu.total == doctest::Approx(1.6).epsilon(1e-12));
    auto dist = distance_to_wulff_set(mu, W, 0.8, 16);
    CHECK(dist.value < 1e-12);
    CHECK(dist.translate == Vec{0.0, 0.0});
    for (int k = 1; k <= 6; ++k) {
        double s = 0.0;
        for (double x : mu.mass[k]) s += x;
        CHECK(std::abs(s - mu.total) < 1e-12);
    }
}

TEST_CASE("clipped cube masses against Monte Carlo") {
    Polytope E = random_polytope(2, 77);
    double s = 0.0;
    for (const Vec& v : E.vertices) s = std::max({s, std::abs(v[0]), std::abs(v[1])});
    E = scaled(E, 0.95 / s);
    auto mu = measure_of_set(E, 1.0, 8, 2);
    const int N = 1000000;
    SplitMix64 rng(2024);
    std::vector<double> hits(16, 0.0);
    for (int i = 0; i < N; ++i) {
        Vec t{2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
        if (E.contains(t, 0.0)) hits[dyadic_index(t, 2)] += 1.0;
    }
    for (int q = 0; q < 16; ++q) {
        double f = hits[q] / N;
        double est = 4.0 * f, se = 4.0 * std::sqrt(f * (1 - f) / N);
        CHECK(std::abs(est - mu.mass[2][q]) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("l1 shape distance") {
    auto prob = full_problem(2, 12);
    Polytope W = dilate_to_volume(wulff_crystal(exact_norm_table(2, default_directions(2), euclidean_norm, "e")), 2.0);
    const BoxSpec& box = prob.cfg.box();
    std::vector<std::int64_t> inside;
    for (auto v : prob.cn.vertices) {
        Coord x = box.coord(v);
        if (W.contains({x[0] / 12.0, x[1] / 12.0})) inside.push_back(v);
    }
    auto zero = l1_shape_distance(Subgraph(box, inside), prob, W);
    CHECK(zero.value == 0.0);
    auto empty = l1_shape_distance(Subgraph(box, {}), prob, W);
    CHECK(empty.value == doctest::Approx(2.0).epsilon(0.1));

    // a shifted rectangle against a shifted body
    Polytope R = axis_box({-0.5, -0.25}, {0.5, 0.25});
    std::vector<std::int64_t> rect, rect_moved;
    for (auto v : prob.cn.vertices) {
        Coord x = box.coord(v);
        if (std::abs(x[0]) <= 4 && std::abs(x[1]) <= 2) rect.push_back(v);
        if (std::abs(x[0] - 2) <= 4 && std::abs(x[1] + 1) <= 2) rect_moved.push_back(v);
    }
    auto a = l1_shape_distance(Subgraph(box, rect), prob, R);
    auto b = l1_shape_distance(Subgraph(box, rect_moved), prob, translated(R, {2.0 / 12, -1.0 / 12}));
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
}

TEST_CASE("exports") {
    auto prob = full_problem(2, 1);
    auto sol = cheeger_exact(prob);
    auto j = nlohmann::json::parse(solution_json(sol));
    CHECK(j["phi_num"] == 8);
    CHECK(j["phi_den"] == 4);
    CHECK(j["method"] == "exact");
    CHECK(j["witness"].size() == 4);
    CHECK(nlohmann::json::parse(solution_json(sol, false)).count("witness") == 0);
    auto csv = measure_csv(empirical_measure(sol.witness, 1));
    CHECK(csv.rfind("k,cube,mass\n0,0,4\n", 0) == 0);
}
