#pragma once

#include <Eigen/Dense>

#include "sasow/errors.hpp"

namespace sasow {

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class MaskProvenance { file, estimated, all_feasible };

// |states| x |objects| grid of admissible compositions; never empty.
class FeasibilityMask {
 public:
  FeasibilityMask(BoolGrid feasible, MaskProvenance provenance)
      : feasible_(std::move(feasible)), provenance_(provenance) {
    if (feasible_.size() == 0) throw InputError("feasibility mask has no cells");
    if (feasible_.count() == 0) throw InputError("feasibility mask has no feasible cell");
  }

  static FeasibilityMask all_feasible(Eigen::Index states, Eigen::Index objects) {
    return FeasibilityMask(BoolGrid::Constant(states, objects, true), MaskProvenance::all_feasible);
  }

  bool operator()(Eigen::Index state, Eigen::Index object) const { return feasible_(state, object); }
  Eigen::Index states() const { return feasible_.rows(); }
  Eigen::Index objects() const { return feasible_.cols(); }
  Eigen::Index feasible_count() const { return feasible_.count(); }
  const BoolGrid& grid() const { return feasible_; }
  MaskProvenance provenance() const { return provenance_; }

  // Grid equality; provenance is metadata.
  friend bool operator==(const FeasibilityMask& a, const FeasibilityMask& b) {
    return a.states() == b.states() && a.objects() == b.objects() && (a.feasible_ == b.feasible_).all();
  }

 private:
  BoolGrid feasible_;
  MaskProvenance provenance_;
};

}  // namespace sasow
