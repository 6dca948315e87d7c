// SPDX-License-Identifier: Apache-2.0
#include "delaytk/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <string_view>
#include <thread>
#include <vector>

namespace delaytk {

unsigned worker_count() {
  if (const char* env = std::getenv("DELAYTK_THREADS")) {
    const std::string_view s(env);
    unsigned v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), count / 256 + 1);
  if (workers <= 1) {
    body(0, count);
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::jthread> threads;
  threads.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        body(std::min(count, w * chunk), std::min(count, (w + 1) * chunk));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  try {
    body(0, std::min(count, chunk));
  } catch (...) {
    errors[0] = std::current_exception();
  }
  threads.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace delaytk
