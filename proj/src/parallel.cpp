#include "hitlab/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace hitlab {

namespace {
std::atomic<unsigned> g_override{0};
}

void set_default_workers(unsigned workers) { g_override.store(workers); }

unsigned default_workers() {
  if (const unsigned w = g_override.load()) return w;
  if (const char* env = std::getenv("HITLAB_WORKERS")) {
    try {
      const unsigned long v = std::stoul(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace hitlab
