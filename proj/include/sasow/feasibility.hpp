#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sasow/feasibility_mask.hpp"
#include "sasow/vocabulary.hpp"

namespace sasow {

using WarningSink = std::function<void(const std::string&)>;
void warn_to_stderr(const std::string& message);

// Primitive name -> embedding vector, all of one dimension, none zero.
class EmbeddingTable {
 public:
  void add(const std::string& name, Vector embedding);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Vector& at(const std::string& name) const;
  Eigen::Index dim() const { return dim_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b);

 private:
  std::vector<std::string> names_;
  std::vector<Vector> vectors_;
  std::map<std::string, std::size_t> index_;
  Eigen::Index dim_ = 0;
};

// CSV rows `name,v1,...,ve`, no header.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

/// Compatibility of (state, object): the highest cosine similarity between
/// the object's embedding and any object seen with that state in training.
/// A state with no seen partner is scored against every seen object.
double feasibility_score(Eigen::Index state, Eigen::Index object, const Vocabulary& vocab,
                         const EmbeddingTable& emb, const CompositionSet& seen);
double feasibility_score(const std::string& state, const std::string& object, const Vocabulary& vocab,
                         const EmbeddingTable& emb, const CompositionSet& seen);

// Feasible iff seen, or score >= tau. Any finite tau is accepted: tau <= -1
// admits everything, tau > 1 admits only the seen set.
FeasibilityMask build_mask(const EmbeddingTable& emb, const Vocabulary& vocab, const CompositionSet& seen,
                           double tau);

// CSV header `state,object,feasible`, one row per cell with 0/1. Cells not
// listed are infeasible; a repeated pair keeps its last value.
FeasibilityMask load_mask(const std::filesystem::path& path, const Vocabulary& vocab,
                          const WarningSink& warn = warn_to_stderr);
void save_mask(const FeasibilityMask& mask, const Vocabulary& vocab, const std::filesystem::path& path);

// Throws unless every seen composition is feasible.
void require_seen_feasible(const FeasibilityMask& mask, const CompositionSet& seen);

}  // namespace sasow
