#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace halogen {

/// Applies fn to every item on up to `workers` threads and returns the
/// results in input order, independent of completion order. The first
/// exception thrown by any worker is rethrown after all threads join.
template <class In, class Fn>
auto parallel_map(const std::vector<In>& items, Fn fn, int workers)
    -> std::vector<decltype(fn(items.front()))> {
    using Out = decltype(fn(items.front()));
    std::vector<Out> results(items.size());
    if (items.empty()) return results;

    if (workers <= 1 || items.size() == 1) {
        for (std::size_t i = 0; i < items.size(); ++i) results[i] = fn(items[i]);
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            try {
                results[i] = fn(items[i]);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), items.size());
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

} // namespace halogen
