#pragma once

#include <cstdint>
#include <vector>

namespace perciso {

// Dinic max-flow on an undirected graph with integer capacities.
class MaxFlow {
public:
    explicit MaxFlow(int nodes);

    int add_node();
    // Undirected edge: both directions carry capacity cap. Returns the arc id.
    int add_edge(int u, int v, std::int64_t cap);
    // Directed arc u -> v.
    int add_arc(int u, int v, std::int64_t cap);

    std::int64_t solve(int source, int sink, std::int64_t limit = INT64_MAX);
    // Nodes reachable from the source in the final residual graph.
    std::vector<char> source_side() const;

    int node_count() const { return static_cast<int>(head_.size()); }

private:
    struct Arc {
        int to;
        int next;
        std::int64_t cap;
    };
    bool build_levels(int s, int t);
    std::int64_t push(int u, int t, std::int64_t f);

    std::vector<int> head_;
    std::vector<Arc> arcs_;
    std::vector<int> level_;
    std::vector<int> iter_;
    int source_ = -1;
};

}  // namespace perciso
