#include "sasow/feasibility.hpp"

#include <algorithm>
#include <iostream>
#include <sstream>

#include "sasow/detail/csv.hpp"
#include "sasow/detail/files.hpp"

namespace sasow {

void warn_to_stderr(const std::string& message) { std::cerr << "warning: " << message << "\n"; }

void EmbeddingTable::add(const std::string& name, Vector embedding) {
  if (name.empty()) throw InputError("embedding with an empty name");
  if (contains(name)) throw InputError("duplicate embedding for '" + name + "'");
  if (embedding.size() == 0) throw InputError("empty embedding for '" + name + "'");
  if (dim_ != 0 && embedding.size() != dim_) {
    throw InputError("embedding for '" + name + "' has length " + std::to_string(embedding.size()) +
                     ", expected " + std::to_string(dim_));
  }
  if (!all_finite(embedding)) throw InputError("non-finite embedding for '" + name + "'");
  if (embedding.isZero(0.0)) throw InputError("zero embedding for '" + name + "' (cosine undefined)");
  dim_ = embedding.size();
  index_.emplace(name, names_.size());
  names_.push_back(name);
  vectors_.push_back(std::move(embedding));
}

const Vector& EmbeddingTable::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InputError("missing embedding for '" + name + "'");
  return vectors_[it->second];
}

bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
  if (a.names_ != b.names_) return false;
  for (std::size_t i = 0; i < a.vectors_.size(); ++i) {
    if (a.vectors_[i] != b.vectors_[i]) return false;
  }
  return true;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  const auto lines = detail::split_lines(detail::read_file(path));
  EmbeddingTable table;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    const auto fields = detail::split_csv(lines[n]);
    if (fields.size() < 2) throw InputError(where + ": expected name and at least one value");
    Vector v(static_cast<Eigen::Index>(fields.size() - 1));
    for (std::size_t i = 1; i < fields.size(); ++i) {
      v[static_cast<Eigen::Index>(i - 1)] = detail::parse_double(fields[i], where);
    }
    try {
      table.add(fields[0], std::move(v));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  if (table.size() == 0) throw InputError(path.string() + ": no embeddings");
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& name : table.names()) {
    out << name;
    const Vector& v = table.at(name);
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << detail::format_double(v[i]);
    out << '\n';
  }
  detail::write_file(path, out.str());
}

double feasibility_score(Eigen::Index state, Eigen::Index object, const Vocabulary& vocab,
                         const EmbeddingTable& emb, const CompositionSet& seen) {
  if (state < 0 || state >= vocab.state_count() || object < 0 || object >= vocab.object_count()) {
    throw InputError("feasibility_score: composition outside the vocabulary");
  }
  const Vector& target = emb.at(vocab.objects()[static_cast<std::size_t>(object)]);

  std::vector<Eigen::Index> partners;
  for (const auto& c : seen) {
    if (c.state == state) partners.push_back(c.object);
  }
  if (partners.empty()) {
    for (const auto& c : seen) partners.push_back(c.object);
  }
  if (partners.empty()) throw InputError("feasibility_score: no seen compositions");

  double best = -1.0;
  for (Eigen::Index o : partners) {
    const Vector& other = emb.at(vocab.objects()[static_cast<std::size_t>(o)]);
    best = std::max(best, cosine_similarity(target, other));
  }
  return std::clamp(best, -1.0, 1.0);
}

double feasibility_score(const std::string& state, const std::string& object, const Vocabulary& vocab,
                         const EmbeddingTable& emb, const CompositionSet& seen) {
  return feasibility_score(vocab.state_index(state), vocab.object_index(object), vocab, emb, seen);
}

FeasibilityMask build_mask(const EmbeddingTable& emb, const Vocabulary& vocab, const CompositionSet& seen,
                           double tau) {
  if (vocab.state_count() == 0 || vocab.object_count() == 0) throw InputError("build_mask: empty vocabulary");
  if (!std::isfinite(tau)) throw InputError("build_mask: tau must be finite");
  for (const auto& s : vocab.states()) emb.at(s);
  for (const auto& o : vocab.objects()) emb.at(o);

  BoolGrid grid = BoolGrid::Constant(vocab.state_count(), vocab.object_count(), false);
  for (Eigen::Index s = 0; s < grid.rows(); ++s) {
    for (Eigen::Index o = 0; o < grid.cols(); ++o) {
      grid(s, o) = seen.count({s, o}) != 0 || feasibility_score(s, o, vocab, emb, seen) >= tau;
    }
  }
  return FeasibilityMask(std::move(grid), MaskProvenance::estimated);
}

FeasibilityMask load_mask(const std::filesystem::path& path, const Vocabulary& vocab, const WarningSink& warn) {
  const auto lines = detail::split_lines(detail::read_file(path));
  if (lines.empty() || lines[0] != "state,object,feasible") {
    throw InputError(path.string() + ": expected header 'state,object,feasible'");
  }
  BoolGrid grid = BoolGrid::Constant(vocab.state_count(), vocab.object_count(), false);
  BoolGrid listed = grid;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    const auto fields = detail::split_csv(lines[n]);
    if (fields.size() != 3) throw InputError(where + ": expected 3 fields");
    const auto s = vocab.find_state(fields[0]);
    const auto o = vocab.find_object(fields[1]);
    if (!s) throw InputError(where + ": unknown state '" + fields[0] + "'");
    if (!o) throw InputError(where + ": unknown object '" + fields[1] + "'");
    if (fields[2] != "0" && fields[2] != "1") throw InputError(where + ": feasible must be 0 or 1");
    if (listed(*s, *o)) warn(where + ": duplicate pair " + fields[0] + "," + fields[1] + "; last occurrence wins");
    listed(*s, *o) = true;
    grid(*s, *o) = fields[2] == "1";
  }
  if (grid.count() == 0) throw InputError(path.string() + ": mask lists no feasible composition");
  return FeasibilityMask(std::move(grid), MaskProvenance::file);
}

void save_mask(const FeasibilityMask& mask, const Vocabulary& vocab, const std::filesystem::path& path) {
  if (mask.states() != vocab.state_count() || mask.objects() != vocab.object_count()) {
    throw InputError("save_mask: mask dimensions do not match the vocabulary");
  }
  std::ostringstream out;
  out << "state,object,feasible\n";
  for (Eigen::Index s = 0; s < mask.states(); ++s) {
    for (Eigen::Index o = 0; o < mask.objects(); ++o) {
      out << vocab.states()[static_cast<std::size_t>(s)] << ',' << vocab.objects()[static_cast<std::size_t>(o)]
          << ',' << (mask(s, o) ? '1' : '0') << '\n';
    }
  }
  detail::write_file(path, out.str());
}

void require_seen_feasible(const FeasibilityMask& mask, const CompositionSet& seen) {
  for (const auto& c : seen) {
    if (c.state >= mask.states() || c.object >= mask.objects() || !mask(c.state, c.object)) {
      throw InputError("feasibility mask excludes a seen training composition");
    }
  }
}

}  // namespace sasow
