#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rewardevo::dsl {

enum class VarKind { scalar, vector };

struct VarSpec {
  std::string name;
  VarKind kind = VarKind::scalar;
  int dimension = 1;  // 1 for scalars
  std::string description;
  std::string units;
};

// A registered variable together with its offset into the flat binding.
struct VarInfo : VarSpec {
  int offset = 0;
};

// The variables an environment exposes to reward programs. Bindings are
// passed around as flat arrays laid out in registration order.
class VarRegistry {
 public:
  VarRegistry() = default;
  // Throws std::invalid_argument on duplicate names, invalid identifiers,
  // empty descriptions or non-positive vector dimensions.
  explicit VarRegistry(std::vector<VarSpec> specs);

  const VarInfo* find(std::string_view name) const noexcept;
  std::span<const VarInfo> entries() const noexcept { return entries_; }
  int flat_size() const noexcept { return flat_size_; }
  bool empty() const noexcept { return entries_.empty(); }

  friend bool operator==(const VarRegistry& a, const VarRegistry& b);

 private:
  std::vector<VarInfo> entries_;
  int flat_size_ = 0;
};

bool is_identifier(std::string_view s) noexcept;

}  // namespace rewardevo::dsl
