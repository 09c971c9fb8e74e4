// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "pier/error.hpp"

namespace pier {

enum class WorkersMode { Sequential, Concurrent };

inline WorkersMode parse_workers_mode(std::string_view s) {
  if (s == "seq" || s == "sequential") return WorkersMode::Sequential;
  if (s == "par" || s == "concurrent") return WorkersMode::Concurrent;
  throw ConfigError("workers mode: expected 'seq' or 'par', got '" + std::string(s) + "'");
}

// Runs one task per simulated worker between two collectives. Sequential mode
// visits workers round-robin on the calling thread; concurrent mode gives each
// worker its own thread and joins them all before returning, which is the
// rendezvous of the following collective.
class Executor {
 public:
  explicit Executor(WorkersMode mode = WorkersMode::Sequential) : mode_(mode) {}

  WorkersMode mode() const { return mode_; }

  void for_each(std::size_t n, const std::function<void(std::size_t)>& task) const {
    if (mode_ == WorkersMode::Sequential || n <= 1) {
      for (std::size_t i = 0; i < n; ++i) task(i);
      return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    {
      std::vector<std::jthread> threads;
      threads.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        threads.emplace_back([&, i] {
          try {
            task(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        });
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  }

 private:
  WorkersMode mode_;
};

}  // namespace pier
