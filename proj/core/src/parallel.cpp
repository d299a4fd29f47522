#include "msa/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

#include "msa/error.hpp"

namespace msa {

namespace {

std::atomic<int> g_num_threads{1};
thread_local int t_par_depth = 0;  // nested parallel_for runs inline

// Lazy persistent pool. Workers sleep until a job is posted; the pool grows
// up to the requested thread count and is torn down at process exit.
class Pool {
public:
    static Pool& instance() {
        static Pool p;
        return p;
    }

    void run(int workers, const std::function<void(int)>& job) {
        ensure(workers - 1);
        {
            std::unique_lock<std::mutex> lk(m_);
            job_ = &job;
            job_workers_ = workers;
            pending_ = workers - 1;
            ++generation_;
        }
        cv_.notify_all();
        job(0);
        std::unique_lock<std::mutex> lk(m_);
        done_cv_.wait(lk, [&] { return pending_ == 0; });
        job_ = nullptr;
    }

    ~Pool() {
        {
            std::unique_lock<std::mutex> lk(m_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

private:
    void ensure(int n) {
        std::unique_lock<std::mutex> lk(m_);
        while (static_cast<int>(threads_.size()) < n) {
            const int id = static_cast<int>(threads_.size()) + 1;
            threads_.emplace_back([this, id] { worker(id); });
        }
    }

    void worker(int id) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(int)>* job = nullptr;
            {
                std::unique_lock<std::mutex> lk(m_);
                cv_.wait(lk, [&] { return stop_ || (generation_ != seen && job_ != nullptr); });
                if (stop_) return;
                seen = generation_;
                if (id >= job_workers_) continue;
                job = job_;
            }
            (*job)(id);
            {
                std::unique_lock<std::mutex> lk(m_);
                if (--pending_ == 0) done_cv_.notify_all();
            }
        }
    }

    std::mutex m_;
    std::condition_variable cv_, done_cv_;
    std::vector<std::thread> threads_;
    const std::function<void(int)>* job_ = nullptr;
    int job_workers_ = 0;
    int pending_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

}  // namespace

void set_num_threads(int n) {
    if (n < 1) throw ContractError("set_num_threads: thread count must be >= 1");
    g_num_threads.store(n);
}

int num_threads() { return g_num_threads.load(); }

int chunk_count(std::int64_t n) {
    const int t = num_threads();
    return static_cast<int>(std::min<std::int64_t>(t, std::max<std::int64_t>(n, 1)));
}

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t, int)>& fn) {
    if (n <= 0) return;
    const int chunks = t_par_depth > 0 ? 1 : chunk_count(n);
    if (chunks == 1) {
        fn(0, n, 0);
        return;
    }
    std::function<void(int)> job = [&](int c) {
        const std::int64_t begin = n * c / chunks;
        const std::int64_t end = n * (c + 1) / chunks;
        ++t_par_depth;
        if (begin < end) fn(begin, end, c);
        --t_par_depth;
    };
    Pool::instance().run(chunks, job);
}

}  // namespace msa
