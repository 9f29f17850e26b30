#ifndef ITERBOOT_PARALLEL_HPP
#define ITERBOOT_PARALLEL_HPP

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ib {

// Runs task(0..n_tasks-1) on up to `workers` threads. Tasks must write to
// disjoint slots; callers reduce the slots afterwards in a fixed order so
// results do not depend on the worker count.
inline void parallel_for(int n_tasks, int workers, const std::function<void(int)>& task) {
    if (n_tasks <= 0) return;
    if (workers <= 1 || n_tasks == 1) {
        for (int i = 0; i < n_tasks; ++i) task(i);
        return;
    }
    const int nthreads = std::min(workers, n_tasks);
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto body = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n_tasks || failed.load()) break;
            try {
                task(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) error = std::current_exception();
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline int hardware_workers() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace ib

#endif
