#include "oispec/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace oispec {

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int max_threads() {
    int cap = g_max_threads.load();
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    return cap > 0 ? std::min(cap, hw) : hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    std::size_t workers = static_cast<std::size_t>(max_threads());
    workers = std::min(workers, n);
    if (workers <= 1) {
        body(0, n);
        return;
    }

    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};

    auto run = [&](std::size_t begin, std::size_t end) {
        try {
            body(begin, end);
        } catch (...) {
            if (!failed.exchange(true)) first_error = std::current_exception();
        }
    };

    for (std::size_t w = 1; w < workers; ++w) {
        std::size_t begin = w * chunk;
        if (begin >= n) break;
        threads.emplace_back(run, begin, std::min(begin + chunk, n));
    }
    run(0, std::min(chunk, n));
    for (auto& t : threads) t.join();

    if (failed.load() && first_error) std::rethrow_exception(first_error);
}

} // namespace oispec
