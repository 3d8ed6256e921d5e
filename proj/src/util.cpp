#include "perciso/parallel.hpp"
#include "perciso/rng.hpp"

#include <cmath>

namespace perciso {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int threads) { g_threads.store(threads < 1 ? 1 : threads); }
int thread_count() { return g_threads.load(); }

double SplitMix64::normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace perciso
