// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef COEXIST_PARALLEL_HPP
#define COEXIST_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace coexist
{

// Runs fn(i) for i in [0, n) on up to `workers` threads. Items are claimed
// dynamically; callers write results into slot i so that the reduction
// order never depends on scheduling. The first exception is rethrown.
template <class Fn> void parallel_for(std::size_t n, int workers, Fn &&fn)
{
    if (workers <= 1 || n <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;)
        {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try
            {
                fn(i);
            }
            catch (...)
            {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    const auto count = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(workers), n));
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t)
        pool.emplace_back(body);
    for (auto &t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace coexist

#endif
