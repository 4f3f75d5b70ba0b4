#include "dcnet/threadpool.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace dcnet {
namespace {

int g_threads = 1;
thread_local bool tl_in_pool = false;

// Persistent pool, grown lazily. Workers block on a condition variable and
// claim task indices with an atomic counter.
class Pool {
public:
    ~Pool() {
        {
            std::unique_lock<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

    void run(int64_t n, const std::function<void(int64_t)>& fn, int want_workers) {
        ensure_workers(want_workers);
        std::unique_lock<std::mutex> lk(mu_);
        fn_ = &fn;
        total_ = n;
        next_.store(0, std::memory_order_relaxed);
        pending_ = n;
        ++generation_;
        cv_.notify_all();
        // The caller participates too.
        work(lk);
        done_cv_.wait(lk, [&] { return pending_ == 0; });
        fn_ = nullptr;
    }

private:
    void ensure_workers(int want) {
        std::unique_lock<std::mutex> lk(mu_);
        while (static_cast<int>(workers_.size()) < want)
            workers_.emplace_back([this] { worker_loop(); });
    }

    void worker_loop() {
        std::unique_lock<std::mutex> lk(mu_);
        uint64_t seen = generation_;
        for (;;) {
            cv_.wait(lk, [&] { return stop_ || (fn_ && generation_ != seen); });
            if (stop_) return;
            seen = generation_;
            work(lk);
        }
    }

    // Claims and runs tasks until the queue drains. Called with the lock
    // held; releases it around user code.
    void work(std::unique_lock<std::mutex>& lk) {
        const std::function<void(int64_t)>* fn = fn_;
        const int64_t total = total_;
        lk.unlock();
        tl_in_pool = true;
        int64_t ran = 0;
        for (;;) {
            int64_t i = next_.fetch_add(1, std::memory_order_relaxed);
            if (i >= total) break;
            (*fn)(i);
            ++ran;
        }
        tl_in_pool = false;
        lk.lock();
        pending_ -= ran;
        if (pending_ == 0) done_cv_.notify_all();
    }

    std::mutex mu_;
    std::condition_variable cv_, done_cv_;
    std::vector<std::thread> workers_;
    const std::function<void(int64_t)>* fn_ = nullptr;
    std::atomic<int64_t> next_{0};
    int64_t total_ = 0;
    int64_t pending_ = 0;
    uint64_t generation_ = 0;
    bool stop_ = false;
};

Pool& pool() {
    static Pool p;
    return p;
}

}  // namespace

void set_threads(int n) { g_threads = n < 1 ? 1 : n; }
int threads() { return g_threads; }

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    if (n <= 0) return;
    // Nested calls run inline: one parallel level at a time.
    if (g_threads == 1 || n == 1 || tl_in_pool) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    pool().run(n, fn, g_threads - 1);
}

}  // namespace dcnet
