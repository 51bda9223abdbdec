#include "pyra/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace pyra {

namespace {

thread_local bool t_inside_worker = false;

class Pool {
 public:
  explicit Pool(int nthreads) : nthreads_(nthreads < 1 ? 1 : nthreads) {
    for (int i = 0; i < nthreads_ - 1; ++i)
      workers_.emplace_back([this] { worker_loop(); });
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lk(m_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  int size() const { return nthreads_; }

  void run(std::size_t njobs, const std::function<void(std::size_t)>& job) {
    if (njobs == 0) return;
    if (workers_.empty() || njobs == 1) {
      for (std::size_t i = 0; i < njobs; ++i) job(i);
      return;
    }
    {
      std::unique_lock<std::mutex> lk(m_);
      job_ = &job;
      njobs_ = njobs;
      next_.store(0, std::memory_order_relaxed);
      pending_ = static_cast<int>(workers_.size());
      ++generation_;
    }
    cv_.notify_all();
    drain();  // the calling thread works too
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

 private:
  void drain() {
    const auto* job = job_;
    const std::size_t n = njobs_;
    for (;;) {
      std::size_t i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) break;
      (*job)(i);
    }
  }

  void worker_loop() {
    t_inside_worker = true;
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        seen = generation_;
        if (stop_) return;
      }
      drain();
      {
        std::unique_lock<std::mutex> lk(m_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  const int nthreads_;
  std::vector<std::thread> workers_;
  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::atomic<std::size_t> next_{0};
  std::size_t njobs_ = 0;
  std::uint64_t generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;
};

std::mutex g_pool_mutex;
std::unique_ptr<Pool> g_pool;

Pool& pool() {
  std::scoped_lock lk(g_pool_mutex);
  if (!g_pool) g_pool = std::make_unique<Pool>(1);
  return *g_pool;
}

}  // namespace

void set_threads(int n) {
  std::scoped_lock lk(g_pool_mutex);
  if (g_pool && g_pool->size() == (n < 1 ? 1 : n)) return;
  g_pool.reset();
  g_pool = std::make_unique<Pool>(n);
}

int thread_count() { return pool().size(); }

void parallel_for(std::size_t n, std::size_t min_grain, const RangeBody& body) {
  if (n == 0) return;
  if (min_grain == 0) min_grain = 1;
  Pool& p = pool();
  if (p.size() == 1 || n < 2 * min_grain || t_inside_worker) {
    body(0, n);
    return;
  }
  std::size_t chunks = static_cast<std::size_t>(p.size()) * 4;
  std::size_t grain = (n + chunks - 1) / chunks;
  if (grain < min_grain) grain = min_grain;
  const std::size_t njobs = (n + grain - 1) / grain;
  p.run(njobs, [&](std::size_t j) {
    const std::size_t b = j * grain;
    const std::size_t e = b + grain < n ? b + grain : n;
    body(b, e);
  });
}

}  // namespace pyra
