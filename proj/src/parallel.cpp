#include "botda/parallel.hpp"

#include <exception>
#include <iostream>
#include <mutex>

#include "botda/log.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace botda {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

LogSink& sink() {
  static LogSink s = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return s;
}

int g_threads = 0;

}  // namespace

LogSink set_warning_sink(LogSink next) {
  std::lock_guard lock(sink_mutex());
  LogSink previous = sink();
  sink() = std::move(next);
  return previous;
}

void log_warning(const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(message);
}

void set_thread_count(int threads) {
  g_threads = threads < 0 ? 0 : threads;
#ifdef _OPENMP
  if (g_threads > 0) omp_set_num_threads(g_threads);
#endif
}

int thread_count() {
#ifdef _OPENMP
  return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
  return 1;
#endif
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
#ifdef _OPENMP
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

}  // namespace botda
