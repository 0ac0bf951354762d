#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace snpnet
{

/// Runs fn(i) for i in [0, n) over `threads` workers in contiguous chunks.
/// Each index is handled by exactly one call, so results written to slot i
/// do not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
    threads = std::max(1u, threads);
    if (threads == 1 || n < 2)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            fn(i);
        }
        return;
    }
    const std::size_t workers = std::min<std::size_t>(threads, n);
    const std::size_t chunk = (n + workers - 1) / workers;
    std::exception_ptr first_error;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
    {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        pool.emplace_back([&, lo, hi] {
            try
            {
                for (std::size_t i = lo; i < hi; ++i)
                {
                    fn(i);
                }
            }
            catch (...)
            {
                std::lock_guard lock(mu);
                if (!first_error)
                {
                    first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool)
    {
        t.join();
    }
    if (first_error)
    {
        std::rethrow_exception(first_error);
    }
}

}  // namespace snpnet
