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

#include "ascend/search_space.hpp"

#include <fmt/format.h>

#include <limits>
#include <unordered_set>

namespace ascend {

SearchSpace::SearchSpace(std::vector<ElementSpec> elements)
    : elements_(std::move(elements)) {
  if (elements_.empty()) {
    throw ValidationError("space must have at least 1 element");
  }
  std::unordered_set<std::string> names;
  std::uint64_t product = 1;
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    const auto& element = elements_[i];
    if (element.name.empty()) {
      throw ValidationError(fmt::format("elements[{}].name must be non-empty", i));
    }
    if (!names.insert(element.name).second) {
      throw ValidationError(fmt::format("elements[{}].name '{}' is duplicated", i, element.name));
    }
    if (element.values.size() < 2) {
      throw ValidationError(fmt::format("elements[{}] ('{}'): values must have length ≥ 2", i,
                                        element.name));
    }
    std::unordered_set<std::string> values;
    for (const auto& value : element.values) {
      if (!values.insert(value).second) {
        throw ValidationError(fmt::format("elements[{}] ('{}'): value '{}' is duplicated", i,
                                          element.name, value));
      }
    }
    const std::uint64_t count = element.values.size();
    if (product > std::numeric_limits<std::uint64_t>::max() / count) {
      throw ValidationError("space size overflows 64 bits");
    }
    product *= count;
    one_hot_width_ += element.values.size();
  }
  size_ = product;
}

SearchSpace SearchSpace::FromCounts(std::span<const std::uint32_t> counts) {
  std::vector<ElementSpec> elements;
  elements.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    ElementSpec element{fmt::format("e{}", i), {}};
    for (std::uint32_t v = 0; v < counts[i]; ++v) element.values.push_back(fmt::format("v{}", v));
    elements.push_back(std::move(element));
  }
  return SearchSpace(std::move(elements));
}

std::vector<std::uint32_t> SearchSpace::value_counts() const {
  std::vector<std::uint32_t> counts;
  counts.reserve(elements_.size());
  for (std::size_t i = 0; i < elements_.size(); ++i) counts.push_back(value_count(i));
  return counts;
}

Genome SearchSpace::control() const {
  return Genome{std::vector<std::uint32_t>(elements_.size(), 0)};
}

std::optional<std::size_t> SearchSpace::find_element(std::string_view name) const {
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    if (elements_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::uint32_t> SearchSpace::find_value(std::size_t element,
                                                     std::string_view value) const {
  const auto& values = elements_.at(element).values;
  for (std::size_t v = 0; v < values.size(); ++v) {
    if (values[v] == value) return static_cast<std::uint32_t>(v);
  }
  return std::nullopt;
}

std::optional<std::string> validate_genome(const SearchSpace& space, const Genome& genome) {
  if (genome.choices.size() != space.element_count()) {
    return fmt::format("length mismatch: genome has {} choices, space has {} elements",
                       genome.choices.size(), space.element_count());
  }
  for (std::size_t i = 0; i < genome.choices.size(); ++i) {
    if (genome.choices[i] >= space.value_count(i)) {
      return fmt::format("element {}: index {} out of range (value count {})", i,
                         genome.choices[i], space.value_count(i));
    }
  }
  return std::nullopt;
}

void require_valid(const SearchSpace& space, const Genome& genome) {
  if (auto violation = validate_genome(space, genome)) throw ValidationError(*violation);
}

OneHot encode_one_hot(const SearchSpace& space, const Genome& genome) {
  require_valid(space, genome);
  OneHot bits(space.one_hot_width(), 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < genome.choices.size(); ++i) {
    bits[offset + genome.choices[i]] = 1;
    offset += space.value_count(i);
  }
  return bits;
}

Genome decode_one_hot(const SearchSpace& space, std::span<const std::uint8_t> bits) {
  if (bits.size() != space.one_hot_width()) {
    throw ValidationError(fmt::format("one-hot length {} does not match expected width {}",
                                      bits.size(), space.one_hot_width()));
  }
  Genome genome;
  genome.choices.reserve(space.element_count());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < space.element_count(); ++i) {
    const auto count = space.value_count(i);
    std::size_t set = 0;
    std::uint32_t chosen = 0;
    for (std::uint32_t v = 0; v < count; ++v) {
      const auto bit = bits[offset + v];
      if (bit > 1) {
        throw ValidationError(fmt::format("segment {} has non-binary entry", i));
      }
      if (bit == 1) {
        ++set;
        chosen = v;
      }
    }
    if (set != 1) {
      throw ValidationError(fmt::format("segment {} has {} set bits", i, set));
    }
    genome.choices.push_back(chosen);
    offset += count;
  }
  return genome;
}

std::string format_one_hot(const SearchSpace& space, std::span<const std::uint8_t> bits) {
  std::string out;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < space.element_count() && offset < bits.size(); ++i) {
    if (i > 0) out.push_back(' ');
    for (std::uint32_t v = 0; v < space.value_count(i) && offset + v < bits.size(); ++v) {
      out.push_back(bits[offset + v] ? '1' : '0');
    }
    offset += space.value_count(i);
  }
  return out;
}

void for_each_genome(const SearchSpace& space, const std::function<void(const Genome&)>& visit,
                     std::uint64_t cap) {
  if (space.size() > cap) {
    throw ValidationError(fmt::format("space size {} exceeds enumeration cap {}", space.size(),
                                      cap));
  }
  Genome genome = space.control();
  const std::size_t n = space.element_count();
  while (true) {
    visit(genome);
    // Odometer increment, last element fastest.
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++genome.choices[pos] < space.value_count(pos)) break;
      genome.choices[pos] = 0;
      if (pos == 0) return;
    }
  }
}

std::vector<Genome> enumerate_genomes(const SearchSpace& space, std::uint64_t cap) {
  std::vector<Genome> out;
  for_each_genome(space, [&](const Genome& g) { out.push_back(g); }, cap);
  return out;
}

std::size_t hamming_distance(const Genome& a, const Genome& b) {
  std::size_t distance = 0;
  const std::size_t n = std::min(a.choices.size(), b.choices.size());
  for (std::size_t i = 0; i < n; ++i) distance += a.choices[i] != b.choices[i];
  return distance + std::max(a.choices.size(), b.choices.size()) - n;
}

std::vector<std::string> value_names(const SearchSpace& space, const Genome& genome) {
  require_valid(space, genome);
  std::vector<std::string> names;
  names.reserve(genome.choices.size());
  for (std::size_t i = 0; i < genome.choices.size(); ++i) {
    names.push_back(space.elements()[i].values[genome.choices[i]]);
  }
  return names;
}

}  // namespace ascend
