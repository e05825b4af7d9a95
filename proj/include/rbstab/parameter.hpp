#pragma once

#include <cstdint>
#include <vector>

#include "rbstab/types.hpp"

namespace rbstab {

struct ParameterVector {
  Vec values;

  Index size() const { return values.size(); }
  double operator[](Index i) const { return values[i]; }
  bool operator==(const ParameterVector& other) const {
    return values.size() == other.values.size() && values == other.values;
  }
};

/// Axis-aligned parameter box.
struct ParameterBox {
  Vec lower;
  Vec upper;

  Index dim() const { return lower.size(); }
  bool contains(const ParameterVector& mu) const;
  /// Throws DomainError if mu lies outside the box or has the wrong dimension.
  void check(const ParameterVector& mu) const;
  Vec midpoint() const { return 0.5 * (lower + upper); }
};

struct MeshSpec;
ParameterBox parameter_box(const MeshSpec& spec);

/// i.i.d. uniform samples per coordinate; deterministic for a fixed seed.
std::vector<ParameterVector> sample_parameters(const ParameterBox& box, Index count,
                                               std::uint64_t seed);

}  // namespace rbstab
