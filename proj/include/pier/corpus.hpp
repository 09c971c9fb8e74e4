// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <numeric>
#include <cmath>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pier/error.hpp"
#include "pier/model.hpp"

namespace pier {

// Byte-level tokenizer: token id == unsigned byte value.
inline std::vector<std::int32_t> tokenize_bytes(std::span<const std::uint8_t> bytes) {
  return {bytes.begin(), bytes.end()};
}

inline std::vector<std::int32_t> tokenize_bytes(const std::string& text) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(text.data());
  return tokenize_bytes(std::span<const std::uint8_t>(p, text.size()));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open corpus file '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// SplitMix64 finalizer, used to derive independent sub-seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(a ^ mix_seed(b));
}

// Order-2 Markov chain over lowercase letters and space. The previous symbol
// picks a ranked list of kSuccessors candidates with Zipf weights; the symbol
// before it reorders the top kReordered ranks. A model can therefore make
// progress from the previous symbol alone and improve further by attending
// one position back.
class MarkovByteChain {
 public:
  static constexpr std::size_t kAlphabet = 27;
  static constexpr std::size_t kSuccessors = 8;
  static constexpr std::size_t kReordered = 4;

  explicit MarkovByteChain(std::uint64_t table_seed) {
    std::mt19937_64 rng(mix_seed(table_seed, 0x7461626c65ULL));
    std::array<double, kSuccessors> weight{};
    double total = 0;
    for (std::size_t j = 0; j < kSuccessors; ++j) total += weight[j] = std::pow(1.0 + double(j), -1.2);
    for (std::size_t b = 0; b < kAlphabet; ++b) {
      std::array<std::uint8_t, kAlphabet> symbols{};
      std::iota(symbols.begin(), symbols.end(), std::uint8_t{0});
      std::shuffle(symbols.begin(), symbols.end(), rng);
      for (std::size_t a = 0; a < kAlphabet; ++a) {
        std::array<std::uint8_t, kSuccessors> ranked{};
        std::copy_n(symbols.begin(), kSuccessors, ranked.begin());
        std::shuffle(ranked.begin(), ranked.begin() + kReordered, rng);
        auto& ctx = table_[a * kAlphabet + b];
        double acc = 0;
        for (std::size_t j = 0; j < kSuccessors; ++j) {
          acc += weight[j] / total;
          ctx[j] = {ranked[j], acc};
        }
        ctx.back().cumulative = 1.0;
      }
    }
  }

  std::vector<std::uint8_t> generate(std::size_t length, std::uint64_t sample_seed) const {
    std::mt19937_64 rng(mix_seed(sample_seed, 0x73616d70ULL));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::uint8_t> out;
    out.reserve(length);
    std::size_t prev2 = 0, prev1 = 0;
    for (std::size_t i = 0; i < length; ++i) {
      const auto& ctx = table_[prev2 * kAlphabet + prev1];
      const double r = u(rng);
      std::size_t k = 0;
      while (k + 1 < kSuccessors && r > ctx[k].cumulative) ++k;
      const std::size_t sym = ctx[k].symbol;
      out.push_back(to_byte(sym));
      prev2 = prev1;
      prev1 = sym;
    }
    return out;
  }

  static std::uint8_t to_byte(std::size_t symbol) {
    return symbol == 26 ? std::uint8_t{' '} : static_cast<std::uint8_t>('a' + symbol);
  }

 private:
  struct Successor {
    std::uint8_t symbol = 0;
    double cumulative = 0;
  };
  std::array<std::array<Successor, kSuccessors>, kAlphabet * kAlphabet> table_{};
};

struct CorpusSplit {
  std::vector<std::int32_t> train;
  std::vector<std::int32_t> val;
};

// Synthetic corpus: train and validation streams come from the same chain
// with disjoint sampling seeds.
inline CorpusSplit synthetic_corpus(std::uint64_t data_seed, std::size_t train_bytes,
                                    std::size_t val_bytes) {
  const MarkovByteChain chain(data_seed);
  return {tokenize_bytes(chain.generate(train_bytes, mix_seed(data_seed, 1))),
          tokenize_bytes(chain.generate(val_bytes, mix_seed(data_seed, 2)))};
}

// File corpus: the last val_fraction of the bytes is held out.
inline CorpusSplit file_corpus(const std::filesystem::path& path, double val_fraction) {
  auto bytes = read_file_bytes(path);
  const auto n_val = static_cast<std::size_t>(static_cast<double>(bytes.size()) * val_fraction);
  const std::size_t n_train = bytes.size() - n_val;
  CorpusSplit out;
  out.train = tokenize_bytes(std::span<const std::uint8_t>(bytes.data(), n_train));
  out.val = tokenize_bytes(std::span<const std::uint8_t>(bytes.data() + n_train, n_val));
  return out;
}

// Draws fixed-length windows from a token stream. Batch contents are a pure
// function of (stream, seed, step), independent of how many batches were drawn before.
class BatchSampler {
 public:
  BatchSampler(std::span<const std::int32_t> stream, std::size_t seq_len, std::size_t vocab_size,
               std::uint64_t seed)
      : stream_(stream), seq_len_(seq_len), vocab_size_(vocab_size), seed_(seed) {
    if (stream_.size() < seq_len_ + 2) {
      throw ConfigError("corpus stream has " + std::to_string(stream_.size()) +
                        " tokens; need at least seq_len + 2");
    }
  }

  Batch sample(std::uint64_t step, std::size_t batch_size) const {
    std::mt19937_64 rng(mix_seed(seed_, step));
    std::uniform_int_distribution<std::size_t> start(0, stream_.size() - seq_len_ - 1);
    Batch b{batch_size, seq_len_, {}};
    b.tokens.reserve(batch_size * b.row_stride());
    for (std::size_t i = 0; i < batch_size; ++i) {
      const std::size_t s = start(rng);
      for (std::size_t j = 0; j <= seq_len_; ++j) b.tokens.push_back(fold(stream_[s + j]));
    }
    return b;
  }

 private:
  // Ids beyond a reduced vocabulary wrap around.
  std::int32_t fold(std::int32_t tok) const {
    return static_cast<std::int32_t>(static_cast<std::size_t>(tok) % vocab_size_);
  }

  std::span<const std::int32_t> stream_;
  std::size_t seq_len_;
  std::size_t vocab_size_;
  std::uint64_t seed_;
};

}  // namespace pier
