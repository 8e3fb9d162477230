#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace evpower {

/// Minimal persistent worker pool. parallel_for partitions [0, n) into
/// contiguous chunks, one per worker; callers that need determinism must
/// write results into per-index slots (the pool imposes no ordering).
class ThreadPool {
 public:
  explicit ThreadPool(int threads)
      : n_threads_(threads < 1 ? 1 : threads) {
    for (int t = 1; t < n_threads_; ++t) {
      workers_.emplace_back([this, t] { worker_loop(t); });
    }
  }

  ~ThreadPool() {
    {
      std::unique_lock lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const { return n_threads_; }

  /// fn(i, worker) for i in [0, n); worker in [0, size()).
  void parallel_for(std::size_t n, const std::function<void(std::size_t, int)>& fn) {
    if (n == 0) return;
    if (n_threads_ == 1 || n == 1) {
      for (std::size_t i = 0; i < n; ++i) fn(i, 0);
      return;
    }
    {
      std::unique_lock lock(mu_);
      job_ = &fn;
      job_n_ = n;
      pending_ = n_threads_ - 1;
      ++generation_;
    }
    cv_.notify_all();
    run_chunk(fn, n, 0);
    std::unique_lock lock(mu_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

 private:
  void run_chunk(const std::function<void(std::size_t, int)>& fn, std::size_t n, int worker) {
    std::size_t chunk = (n + n_threads_ - 1) / n_threads_;
    std::size_t lo = chunk * static_cast<std::size_t>(worker);
    std::size_t hi = lo + chunk < n ? lo + chunk : n;
    for (std::size_t i = lo; i < hi; ++i) fn(i, worker);
  }

  void worker_loop(int worker) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t, int)>* job = nullptr;
      std::size_t n = 0;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
        n = job_n_;
      }
      if (job) run_chunk(*job, n, worker);
      {
        std::unique_lock lock(mu_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  int n_threads_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t, int)>* job_ = nullptr;
  std::size_t job_n_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace evpower
