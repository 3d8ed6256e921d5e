#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "perciso/cheeger.hpp"
#include "perciso/lattice.hpp"

namespace perciso::oracle {

// true if some open edge path joins a source to a sink after removing `cut`
inline bool joined(const Configuration& cfg, const std::vector<std::int64_t>& src, const std::vector<std::int64_t>& dst,
            const std::vector<std::int64_t>& arena, const std::vector<EdgeSlot>& cut) {
    const BoxSpec& b = cfg.box();
    std::vector<char> in(b.vertex_count(), 0), target(b.vertex_count(), 0), seen(b.vertex_count(), 0);
    for (auto v : arena) in[v] = 1;
    for (auto v : dst) target[v] = 1;
    std::vector<std::int64_t> st(src.begin(), src.end());
    for (auto v : src) seen[v] = 1;
    while (!st.empty()) {
        auto v = st.back();
        st.pop_back();
        if (target[v]) return true;
        bool hit = false;
        for_each_neighbor(b, v, [&](std::int64_t w, EdgeSlot s) {
            if (hit || !in[w] || seen[w] || !cfg.open(s)) return;
            if (std::binary_search(cut.begin(), cut.end(), s)) return;
            seen[w] = 1;
            st.push_back(w);
        });
    }
    return false;
}

// Smallest number of open edges whose removal separates, by increasing-cardinality search.
inline std::int64_t exhaustive_cut(const Configuration& cfg, const std::vector<std::int64_t>& src,
                            const std::vector<std::int64_t>& dst, const std::vector<std::int64_t>& arena) {
    const BoxSpec& b = cfg.box();
    std::vector<EdgeSlot> open;
    for (auto v : arena)
        for_each_neighbor(b, v, [&](std::int64_t w, EdgeSlot s) {
            if (w > v && cfg.open(s) && std::find(arena.begin(), arena.end(), w) != arena.end()) open.push_back(s);
        });
    std::sort(open.begin(), open.end());
    const int m = static_cast<int>(open.size());
    for (int k = 0; k <= m; ++k) {
        std::vector<int> pick(k);
        for (int i = 0; i < k; ++i) pick[i] = i;
        while (true) {
            std::vector<EdgeSlot> cut;
            for (int i : pick) cut.push_back(open[i]);
            std::sort(cut.begin(), cut.end());
            if (!joined(cfg, src, dst, arena, cut)) return k;
            int i = k - 1;
            while (i >= 0 && pick[i] == m - k + i) --i;
            if (i < 0) break;
            ++pick[i];
            for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
        }
    }
    return m;
}

// minimum over all subsets of Cn, connected or not
inline std::pair<std::int64_t, std::int64_t> brute_force(const CheegerProblem& prob) {
    const auto& cn = prob.cn.vertices;
    const int m = static_cast<int>(cn.size());
    const BoxSpec& box = prob.cfg.box();
    std::int64_t bb = -1, bs = 1;
    std::vector<char> in(box.vertex_count(), 0);
    for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
        int s = __builtin_popcount(mask);
        if (s > prob.cap) continue;
        for (int i = 0; i < m; ++i) in[cn[i]] = (mask >> i) & 1u;
        std::int64_t b = 0;
        for (int i = 0; i < m; ++i) {
            if (!in[cn[i]]) continue;
            for_each_neighbor(box, cn[i], [&](std::int64_t w, EdgeSlot e) {
                if (prob.cfg.open(e) && !in[w]) ++b;
            });
        }
        if (bb < 0 || b * bs < bb * s) bb = b, bs = s;
    }
    for (int i = 0; i < m; ++i) in[cn[i]] = 0;
    return {bb, bs};
}

}  // namespace perciso::oracle
