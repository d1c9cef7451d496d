#include "rewardevo/dsl/registry.hpp"

#include <cctype>
#include <stdexcept>
#include <unordered_set>

namespace rewardevo::dsl {

bool is_identifier(std::string_view s) noexcept {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s.front()))) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  return true;
}

VarRegistry::VarRegistry(std::vector<VarSpec> specs) {
  std::unordered_set<std::string> seen;
  entries_.reserve(specs.size());
  for (auto& spec : specs) {
    if (!is_identifier(spec.name)) {
      throw std::invalid_argument("invalid variable name '" + spec.name + "'");
    }
    if (!seen.insert(spec.name).second) {
      throw std::invalid_argument("duplicate variable name '" + spec.name + "'");
    }
    if (spec.description.empty()) {
      throw std::invalid_argument("variable '" + spec.name + "' has no description");
    }
    if (spec.kind == VarKind::scalar) {
      spec.dimension = 1;
    } else if (spec.dimension < 1) {
      throw std::invalid_argument("vector variable '" + spec.name + "' needs dimension >= 1");
    }
    VarInfo info;
    static_cast<VarSpec&>(info) = std::move(spec);
    info.offset = flat_size_;
    flat_size_ += info.dimension;
    entries_.push_back(std::move(info));
  }
}

const VarInfo* VarRegistry::find(std::string_view name) const noexcept {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

bool operator==(const VarRegistry& a, const VarRegistry& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.kind != y.kind || x.dimension != y.dimension ||
        x.description != y.description || x.units != y.units) {
      return false;
    }
  }
  return true;
}

}  // namespace rewardevo::dsl
