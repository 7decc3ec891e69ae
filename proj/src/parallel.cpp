#include "conflens/parallel.hpp"

#include <cstdlib>
#include <string>

#include "conflens/error.hpp"

namespace conflens {

std::size_t resolve_thread_count(std::optional<std::size_t> requested) {
  if (requested) {
    if (*requested == 0) throw usage_error("--threads must be at least 1");
    return *requested;
  }
  if (const char* env = std::getenv("CONFLENS_THREADS"); env && *env) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw usage_error(std::string("CONFLENS_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

}  // namespace conflens
