#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sasow/composition.hpp"

namespace sasow {

using CompositionSet = std::set<Composition>;

// State and object names; indices are positions in these lists.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> states, std::vector<std::string> objects);

  const std::vector<std::string>& states() const { return states_; }
  const std::vector<std::string>& objects() const { return objects_; }
  Eigen::Index state_count() const { return static_cast<Eigen::Index>(states_.size()); }
  Eigen::Index object_count() const { return static_cast<Eigen::Index>(objects_.size()); }

  std::optional<Eigen::Index> find_state(const std::string& name) const;
  std::optional<Eigen::Index> find_object(const std::string& name) const;
  Eigen::Index state_index(const std::string& name) const;
  Eigen::Index object_index(const std::string& name) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.states_ == b.states_ && a.objects_ == b.objects_;
  }

 private:
  std::vector<std::string> states_;
  std::vector<std::string> objects_;
  std::map<std::string, Eigen::Index> state_index_;
  std::map<std::string, Eigen::Index> object_index_;
};

inline Vocabulary::Vocabulary(std::vector<std::string> states, std::vector<std::string> objects)
    : states_(std::move(states)), objects_(std::move(objects)) {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (!state_index_.emplace(states_[i], static_cast<Eigen::Index>(i)).second) {
      throw InputError("duplicate state name '" + states_[i] + "'");
    }
  }
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    if (!object_index_.emplace(objects_[i], static_cast<Eigen::Index>(i)).second) {
      throw InputError("duplicate object name '" + objects_[i] + "'");
    }
  }
}

inline std::optional<Eigen::Index> Vocabulary::find_state(const std::string& name) const {
  auto it = state_index_.find(name);
  if (it == state_index_.end()) return std::nullopt;
  return it->second;
}

inline std::optional<Eigen::Index> Vocabulary::find_object(const std::string& name) const {
  auto it = object_index_.find(name);
  if (it == object_index_.end()) return std::nullopt;
  return it->second;
}

inline Eigen::Index Vocabulary::state_index(const std::string& name) const {
  if (auto i = find_state(name)) return *i;
  throw InputError("unknown state '" + name + "'");
}

inline Eigen::Index Vocabulary::object_index(const std::string& name) const {
  if (auto i = find_object(name)) return *i;
  throw InputError("unknown object '" + name + "'");
}

}  // namespace sasow
