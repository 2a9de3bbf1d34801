#include "flowam/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace flowam {

namespace {

int default_workers() {
    if (const char* env = std::getenv("FLOWCTL_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (...) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int>& workers() {
    static std::atomic<int> n{default_workers()};
    return n;
}

}  // namespace

int worker_count() { return workers().load(); }

void set_worker_count(int n) { workers().store(std::max(1, n)); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
    std::vector<std::exception_ptr> errors(n);
    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (nw <= 1) {
        run_range(0, n);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nw);
        const std::size_t chunk = (n + nw - 1) / nw;
        for (std::size_t w = 0; w < nw; ++w) {
            const std::size_t b = w * chunk;
            const std::size_t e = std::min(n, b + chunk);
            if (b >= e) break;
            pool.emplace_back(run_range, b, e);
        }
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace flowam
