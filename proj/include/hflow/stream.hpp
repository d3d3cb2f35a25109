// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <string>

#include "hflow/error.hpp"

namespace hflow {

/// Thrown inside a stage when a peer stage failed and the pipeline is
/// shutting down. Never escapes run_pipeline.
struct StreamAborted {};

/// Bounded FIFO between two pipeline stages. push blocks while full, pop
/// blocks while empty; a wait longer than the watchdog raises
/// PipelineDeadlock naming the waiting stage. A zero watchdog waits forever.
template <class T>
class BoundedStream {
public:
    BoundedStream(std::size_t capacity, std::chrono::milliseconds watchdog)
        : capacity_(capacity == 0 ? 1 : capacity), watchdog_(watchdog) {}

    BoundedStream(const BoundedStream&) = delete;
    BoundedStream& operator=(const BoundedStream&) = delete;

    void push(T item, const std::string& stage) {
        std::unique_lock lock(mu_);
        wait(lock, not_full_, stage, [&] { return aborted_ || items_.size() < capacity_; });
        if (aborted_) throw StreamAborted{};
        items_.push_back(std::move(item));
        not_empty_.notify_one();
    }

    /// Returns nullopt once the stream is closed and drained.
    std::optional<T> pop(const std::string& stage) {
        std::unique_lock lock(mu_);
        wait(lock, not_empty_, stage, [&] { return aborted_ || closed_ || !items_.empty(); });
        if (aborted_) throw StreamAborted{};
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
    }

    void abort() {
        std::lock_guard lock(mu_);
        aborted_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    std::size_t capacity() const noexcept { return capacity_; }

private:
    template <class Pred>
    void wait(std::unique_lock<std::mutex>& lock, std::condition_variable& cv, const std::string& stage, Pred ready) {
        if (watchdog_.count() <= 0) {
            cv.wait(lock, ready);
            return;
        }
        if (!cv.wait_for(lock, watchdog_, ready)) throw PipelineDeadlock(stage);
    }

    std::mutex mu_;
    std::condition_variable not_empty_, not_full_;
    std::deque<T> items_;
    std::size_t capacity_;
    std::chrono::milliseconds watchdog_;
    bool closed_ = false;
    bool aborted_ = false;
};

}  // namespace hflow
