// Copyright 2026 The Ascend Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ascend {

/// Raised when a user-supplied definition (space, genome, config) is invalid.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One mutable region of the interface. Value 0 is the control value.
struct ElementSpec {
  std::string name;
  std::vector<std::string> values;
};

/// A concrete design: one value index per element.
struct Genome {
  std::vector<std::uint32_t> choices;

  friend bool operator==(const Genome&, const Genome&) = default;
  friend auto operator<=>(const Genome&, const Genome&) = default;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 22;

/// The combinatorial design universe. Immutable after construction.
class SearchSpace {
 public:
  /// Throws ValidationError if the elements violate any invariant
  /// (empty space, duplicate names, fewer than two values, duplicate values,
  /// or a product that does not fit in 64 bits).
  explicit SearchSpace(std::vector<ElementSpec> elements);

  /// Convenience for tests and synthetic spaces: element i is named "e<i>"
  /// with values "v0".."v<k-1>".
  static SearchSpace FromCounts(std::span<const std::uint32_t> counts);

  const std::vector<ElementSpec>& elements() const { return elements_; }
  std::size_t element_count() const { return elements_.size(); }
  std::uint32_t value_count(std::size_t element) const {
    return static_cast<std::uint32_t>(elements_[element].values.size());
  }
  std::vector<std::uint32_t> value_counts() const;

  /// Product of per-element value counts.
  std::uint64_t size() const { return size_; }

  /// Sum of per-element value counts; the one-hot width.
  std::size_t one_hot_width() const { return one_hot_width_; }

  Genome control() const;

  std::optional<std::size_t> find_element(std::string_view name) const;
  std::optional<std::uint32_t> find_value(std::size_t element,
                                          std::string_view value) const;

 private:
  std::vector<ElementSpec> elements_;
  std::uint64_t size_ = 0;
  std::size_t one_hot_width_ = 0;
};

inline std::uint64_t space_size(const SearchSpace& space) { return space.size(); }

/// First violation of the genome invariants against `space`, if any.
std::optional<std::string> validate_genome(const SearchSpace& space,
                                           const Genome& genome);

/// Throws ValidationError carrying validate_genome's message.
void require_valid(const SearchSpace& space, const Genome& genome);

using OneHot = std::vector<std::uint8_t>;

OneHot encode_one_hot(const SearchSpace& space, const Genome& genome);
Genome decode_one_hot(const SearchSpace& space, std::span<const std::uint8_t> bits);

/// Renders bits as segments separated by spaces, e.g. "10 100".
std::string format_one_hot(const SearchSpace& space, std::span<const std::uint8_t> bits);

/// Visits every genome in lexicographic order of choices. Throws
/// ValidationError when the space exceeds `cap`.
void for_each_genome(const SearchSpace& space,
                     const std::function<void(const Genome&)>& visit,
                     std::uint64_t cap = kDefaultEnumerationCap);

std::vector<Genome> enumerate_genomes(const SearchSpace& space,
                                      std::uint64_t cap = kDefaultEnumerationCap);

/// Number of positions at which two equal-length genomes differ.
std::size_t hamming_distance(const Genome& a, const Genome& b);

/// Value identifiers of a genome, element by element.
std::vector<std::string> value_names(const SearchSpace& space, const Genome& genome);

}  // namespace ascend
