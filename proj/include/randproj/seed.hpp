// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace randproj {

using Seed = std::uint64_t;

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; labels are hashed to a word before entering the chain.
inline constexpr std::uint64_t hash_label(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// One element of a seed derivation path: either a string label or an index.
class PathItem {
 public:
  PathItem(std::string_view label) : word_(detail::hash_label(label)), tag_(0x6c) {}
  PathItem(const char* label) : PathItem(std::string_view(label)) {}
  PathItem(const std::string& label) : PathItem(std::string_view(label)) {}
  template <class I, class = std::enable_if_t<std::is_integral_v<I>>>
  PathItem(I index) : word_(static_cast<std::uint64_t>(index)), tag_(0x69) {}

  std::uint64_t word() const noexcept { return word_; }
  std::uint64_t tag() const noexcept { return tag_; }

 private:
  std::uint64_t word_;
  std::uint64_t tag_;
};

/// Hierarchical seed derivation. Each path element is mixed into the running
/// state with splitmix64; the empty path returns the master seed unchanged.
inline Seed derive_seed(Seed master, std::initializer_list<PathItem> path) {
  Seed s = master;
  for (const auto& item : path) {
    s = detail::splitmix64(s ^ detail::splitmix64(item.word() + (item.tag() << 56)));
  }
  return s;
}

inline Seed derive_seed(Seed master, const std::vector<PathItem>& path) {
  Seed s = master;
  for (const auto& item : path) {
    s = detail::splitmix64(s ^ detail::splitmix64(item.word() + (item.tag() << 56)));
  }
  return s;
}

using Rng = std::mt19937_64;

inline Rng make_rng(Seed s) { return Rng(s); }

}  // namespace randproj
