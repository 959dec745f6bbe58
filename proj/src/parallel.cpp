#include "cpaem/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace cpaem {
namespace {

std::atomic<std::size_t> g_override{0};

std::size_t from_env() {
    if (const char* s = std::getenv("CPAEM_THREADS")) {
        try {
            const long v = std::stol(s);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return 0;
}

}  // namespace

std::size_t thread_count() {
    if (auto n = g_override.load(); n > 0) return n;
    if (auto n = from_env(); n > 0) return n;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void set_thread_count(std::size_t n) { g_override.store(n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    pool.clear();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace cpaem
