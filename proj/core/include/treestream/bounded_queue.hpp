#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>

namespace treestream {

/// Bounded blocking queue used for the sender -> worker -> receiver
/// hand-offs. push blocks when full (backpressure), pop blocks when
/// empty and returns false once the queue is closed and drained.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(T value) {
    std::unique_lock lock(mu_);
    if (items_.size() >= capacity_) {
      ++push_waiters_;
      not_full_.wait(lock, [&] { return items_.size() < capacity_; });
      --push_waiters_;
    }
    items_.push_back(std::move(value));
    if (pop_waiters_ > 0) not_empty_.notify_one();
  }

  bool pop(T& out) {
    std::unique_lock lock(mu_);
    if (items_.empty() && !closed_) {
      ++pop_waiters_;
      not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
      --pop_waiters_;
    }
    if (items_.empty()) return false;
    out = std::move(items_.front());
    items_.pop_front();
    if (push_waiters_ > 0) not_full_.notify_one();
    return true;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  int push_waiters_ = 0;
  int pop_waiters_ = 0;
  std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
};

}  // namespace treestream
