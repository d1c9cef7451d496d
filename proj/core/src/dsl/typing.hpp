#pragma once

#include <span>
#include <stdexcept>
#include <string>

#include "rewardevo/dsl/expr.hpp"
#include "rewardevo/dsl/registry.hpp"

namespace rewardevo::dsl::detail {

class TypeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Result shape of a node given the shapes of its arguments: 0 for a scalar,
// n >= 1 for a vector of dimension n. Throws TypeError.
int infer_shape(const Expr& node, std::span<const int> arg_shapes, const VarRegistry& registry);

std::string describe_shape(int shape);

}  // namespace rewardevo::dsl::detail
