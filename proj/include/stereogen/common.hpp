#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace stereogen {

/// Filesystem failures: missing files, short reads, failed writes.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input data (bad headers, truncated bodies, unknown enums).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs that are syntactically fine but violate a contract
/// (non-finite pixel coordinates, empty models, size mismatches).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline int default_jobs() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

/// Runs fn(begin, end) over disjoint chunks of [0, count) on `jobs` threads.
/// jobs <= 0 means hardware concurrency. Callers are responsible for making
/// chunk writes disjoint; results must not depend on the chunking.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    if (jobs <= 0) {
        jobs = default_jobs();
    }
    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
    if (n_threads <= 1) {
        if (count > 0) {
            fn(std::size_t{0}, count);
        }
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    const std::size_t chunk = (count + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(begin + chunk, count);
        if (begin >= end) {
            break;
        }
        workers.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& w : workers) {
        w.join();
    }
}

}  // namespace stereogen
