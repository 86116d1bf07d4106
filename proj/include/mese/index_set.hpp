// Copyright 2026 The MESE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MESE_INDEX_SET_HPP_
#define MESE_INDEX_SET_HPP_

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "mese/error.hpp"

namespace mese {

// Sorted, duplicate-free set of state-dimension indices (0-based).
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::initializer_list<std::size_t> indices)
      : IndexSet(std::vector<std::size_t>(indices)) {}
  explicit IndexSet(std::vector<std::size_t> indices)
      : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()),
                   indices_.end());
  }

  static IndexSet full(std::size_t dim) {
    std::vector<std::size_t> all(dim);
    for (std::size_t i = 0; i < dim; ++i) all[i] = i;
    return IndexSet(std::move(all));
  }

  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }
  std::size_t operator[](std::size_t i) const { return indices_[i]; }

  bool contains(std::size_t index) const {
    return std::binary_search(indices_.begin(), indices_.end(), index);
  }

  bool is_subset_of(const IndexSet& other) const {
    return std::includes(other.indices_.begin(), other.indices_.end(),
                         indices_.begin(), indices_.end());
  }

  IndexSet with(std::size_t index) const {
    std::vector<std::size_t> out = indices_;
    out.push_back(index);
    return IndexSet(std::move(out));
  }

  // Throws ArgumentError unless non-empty and every index < dim.
  void validate(std::size_t dim) const {
    if (indices_.empty()) throw ArgumentError("index set is empty");
    if (indices_.back() >= dim) {
      throw ArgumentError("index " + std::to_string(indices_.back()) +
                          " out of range for dimension " +
                          std::to_string(dim));
    }
  }

  // "4;5" style, used in CSV columns and logs.
  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (i) out += ';';
      out += std::to_string(indices_[i]);
    }
    return out;
  }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;
  friend auto operator<=>(const IndexSet& a, const IndexSet& b) {
    return a.indices_ <=> b.indices_;
  }

 private:
  std::vector<std::size_t> indices_;
};

}  // namespace mese

#endif  // MESE_INDEX_SET_HPP_
