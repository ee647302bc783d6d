#include "roiattn/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace roiattn {

namespace {

int resolve_env_threads() {
    const char* env = std::getenv("ROIATTN_THREADS");
    int n = 0;
    if (env && *env) n = std::atoi(env);
    if (n <= 0) n = int(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    return n;
}

// Persistent pool; workers pick chunk indices off an atomic counter for one
// task at a time. Chunk boundaries depend only on (begin, end, n_chunks).
class Pool {
  public:
    explicit Pool(int workers) : stop_(false), task_gen_(0), active_(0) {
        for (int i = 0; i < workers; ++i) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void run(int64_t begin, int64_t end, int n_chunks,
             const std::function<void(int64_t, int64_t)>& fn) {
        // One dispatch at a time; concurrent callers (e.g. per-image
        // forwards on different threads) queue here.
        std::lock_guard<std::mutex> run_lock(run_mu_);
        {
            std::lock_guard<std::mutex> lk(mu_);
            begin_ = begin;
            end_ = end;
            n_chunks_ = n_chunks;
            fn_ = &fn;
            next_chunk_.store(0, std::memory_order_relaxed);
            active_ = int(threads_.size());
            ++task_gen_;
        }
        cv_.notify_all();
        // The calling thread participates too.
        drain_chunks();
        std::unique_lock<std::mutex> lk(mu_);
        done_cv_.wait(lk, [this] { return active_ == 0; });
        fn_ = nullptr;
    }

  private:
    void drain_chunks() {
        const int64_t span = end_ - begin_;
        for (;;) {
            int c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
            if (c >= n_chunks_) break;
            int64_t lo = begin_ + span * c / n_chunks_;
            int64_t hi = begin_ + span * (c + 1) / n_chunks_;
            if (lo < hi) (*fn_)(lo, hi);
        }
    }

    void worker_loop() {
        uint64_t seen_gen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return stop_ || task_gen_ != seen_gen; });
                if (stop_) return;
                seen_gen = task_gen_;
            }
            drain_chunks();
            {
                std::lock_guard<std::mutex> lk(mu_);
                if (--active_ == 0) done_cv_.notify_all();
            }
        }
    }

    std::vector<std::thread> threads_;
    std::mutex run_mu_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    bool stop_;
    uint64_t task_gen_;
    int active_;
    int64_t begin_ = 0, end_ = 0;
    int n_chunks_ = 0;
    std::atomic<int> next_chunk_{0};
    const std::function<void(int64_t, int64_t)>* fn_ = nullptr;
};

int g_threads = 0;
Pool* g_pool = nullptr;
std::mutex g_setup_mu;

void ensure_initialized() {
    std::lock_guard<std::mutex> lk(g_setup_mu);
    if (g_threads == 0) g_threads = resolve_env_threads();
}

}  // namespace

int thread_count() {
    ensure_initialized();
    return g_threads;
}

void set_thread_count(int n) {
    std::lock_guard<std::mutex> lk(g_setup_mu);
    delete g_pool;
    g_pool = nullptr;
    g_threads = n > 0 ? n : resolve_env_threads();
}

void parallel_for_chunks(int64_t begin, int64_t end,
                         const std::function<void(int64_t, int64_t)>& fn) {
    if (begin >= end) return;
    const int threads = thread_count();
    if (threads == 1 || end - begin == 1) {
        fn(begin, end);
        return;
    }
    {
        std::lock_guard<std::mutex> lk(g_setup_mu);
        if (!g_pool) g_pool = new Pool(threads - 1);
    }
    int chunks = int(std::min<int64_t>(end - begin, int64_t(threads) * 4));
    g_pool->run(begin, end, chunks, fn);
}

void parallel_for(int64_t begin, int64_t end, const std::function<void(int64_t)>& fn) {
    parallel_for_chunks(begin, end, [&fn](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) fn(i);
    });
}

}  // namespace roiattn
