#include "perciso/flow.hpp"

#include <algorithm>
#include <climits>

namespace perciso {

MaxFlow::MaxFlow(int nodes) : head_(nodes, -1) {}

int MaxFlow::add_node() {
    head_.push_back(-1);
    return static_cast<int>(head_.size()) - 1;
}

int MaxFlow::add_edge(int u, int v, std::int64_t cap) {
    int id = static_cast<int>(arcs_.size());
    arcs_.push_back({v, head_[u], cap});
    head_[u] = id;
    arcs_.push_back({u, head_[v], cap});
    head_[v] = id + 1;
    return id;
}

int MaxFlow::add_arc(int u, int v, std::int64_t cap) {
    int id = static_cast<int>(arcs_.size());
    arcs_.push_back({v, head_[u], cap});
    head_[u] = id;
    arcs_.push_back({u, head_[v], 0});
    head_[v] = id + 1;
    return id;
}

bool MaxFlow::build_levels(int s, int t) {
    level_.assign(head_.size(), -1);
    std::vector<int> queue;
    queue.reserve(head_.size());
    queue.push_back(s);
    level_[s] = 0;
    for (std::size_t q = 0; q < queue.size(); ++q) {
        int u = queue[q];
        for (int a = head_[u]; a != -1; a = arcs_[a].next) {
            if (arcs_[a].cap > 0 && level_[arcs_[a].to] < 0) {
                level_[arcs_[a].to] = level_[u] + 1;
                queue.push_back(arcs_[a].to);
            }
        }
    }
    return level_[t] >= 0;
}

std::int64_t MaxFlow::push(int u, int t, std::int64_t f) {
    if (u == t) return f;
    for (int& a = iter_[u]; a != -1; a = arcs_[a].next) {
        Arc& arc = arcs_[a];
        if (arc.cap <= 0 || level_[arc.to] != level_[u] + 1) continue;
        std::int64_t got = push(arc.to, t, std::min(f, arc.cap));
        if (got > 0) {
            arc.cap -= got;
            arcs_[a ^ 1].cap += got;
            return got;
        }
    }
    return 0;
}

std::int64_t MaxFlow::solve(int source, int sink, std::int64_t limit) {
    source_ = source;
    std::int64_t flow = 0;
    while (flow < limit && build_levels(source, sink)) {
        iter_ = head_;
        while (flow < limit) {
            std::int64_t f = push(source, sink, limit - flow);
            if (f == 0) break;
            flow += f;
        }
    }
    return flow;
}

std::vector<char> MaxFlow::source_side() const {
    std::vector<char> seen(head_.size(), 0);
    if (source_ < 0) return seen;
    std::vector<int> stack{source_};
    seen[source_] = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int a = head_[u]; a != -1; a = arcs_[a].next) {
            if (arcs_[a].cap > 0 && !seen[arcs_[a].to]) {
                seen[arcs_[a].to] = 1;
                stack.push_back(arcs_[a].to);
            }
        }
    }
    return seen;
}

}  // namespace perciso
