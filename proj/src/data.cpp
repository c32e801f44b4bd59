#include "sasow/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sasow/detail/binary_io.hpp"
#include "sasow/detail/csv.hpp"
#include "sasow/detail/files.hpp"

namespace sasow {

using nlohmann::ordered_json;

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split parse_split(const std::string& tag) {
  if (tag == "train") return Split::train;
  if (tag == "test") return Split::test;
  throw InputError("unknown split tag '" + tag + "'");
}

std::vector<std::size_t> Dataset::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split == which) out.push_back(i);
  }
  return out;
}

Matrix Dataset::gather(std::span<const std::size_t> rows) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

CompositionSet Dataset::test_seen() const {
  CompositionSet out;
  for (const auto& s : samples) {
    if (s.split == Split::test && split.seen.count(s.composition())) out.insert(s.composition());
  }
  return out;
}

void validate(const Dataset& ds) {
  if (ds.vocab.state_count() == 0 || ds.vocab.object_count() == 0) throw InputError("dataset: empty vocabulary");
  if (static_cast<std::size_t>(ds.features.rows()) != ds.samples.size()) {
    throw InputError("dataset: feature rows do not match sample count");
  }
  if (ds.dim() == 0) throw InputError("dataset: zero feature dimension");
  if (!all_finite(ds.features)) throw InputError("dataset: non-finite feature values");
  for (const auto& c : ds.split.seen) {
    if (ds.split.unseen.count(c)) throw InputError("dataset: a composition is both seen and unseen");
  }
  std::vector<bool> state_covered(static_cast<std::size_t>(ds.vocab.state_count()), false);
  std::vector<bool> object_covered(static_cast<std::size_t>(ds.vocab.object_count()), false);
  for (const auto& s : ds.samples) {
    if (s.state < 0 || s.state >= ds.vocab.state_count() || s.object < 0 || s.object >= ds.vocab.object_count()) {
      throw InputError("dataset: sample " + s.id + " has labels outside the vocabulary");
    }
    const auto c = s.composition();
    if (s.split == Split::train) {
      if (!ds.split.seen.count(c)) {
        throw InputError("dataset: train sample " + s.id + " is labeled with an unseen composition");
      }
      state_covered[static_cast<std::size_t>(s.state)] = true;
      object_covered[static_cast<std::size_t>(s.object)] = true;
    } else if (!ds.split.seen.count(c) && !ds.split.unseen.count(c)) {
      throw InputError("dataset: test sample " + s.id + " has a composition in neither split");
    }
  }
  for (std::size_t i = 0; i < state_covered.size(); ++i) {
    if (!state_covered[i]) throw InputError("dataset: state '" + ds.vocab.states()[i] + "' has no train sample");
  }
  for (std::size_t i = 0; i < object_covered.size(); ++i) {
    if (!object_covered[i]) throw InputError("dataset: object '" + ds.vocab.objects()[i] + "' has no train sample");
  }
}

std::string fingerprint(const Dataset& ds) {
  std::uint64_t h = detail::fnv1a("sasow-dataset");
  for (const auto& s : ds.vocab.states()) h = detail::fnv1a(s + "\n", h);
  h = detail::fnv1a("|", h);
  for (const auto& o : ds.vocab.objects()) h = detail::fnv1a(o + "\n", h);
  h = detail::fnv1a(std::to_string(ds.dim()), h);
  for (const auto& s : ds.samples) {
    h = detail::fnv1a(s.id + "," + std::to_string(s.state) + "," + std::to_string(s.object) + "," +
                          to_string(s.split) + "\n",
                      h);
  }
  return detail::hex64(h);
}

std::uint64_t open_world_space(std::int64_t n_states, std::int64_t n_objects) {
  if (n_states <= 0 || n_objects <= 0) throw InputError("open_world_space: counts must be positive");
  return static_cast<std::uint64_t>(n_states) * static_cast<std::uint64_t>(n_objects);
}

namespace {

std::size_t fraction_count(std::size_t n, double fraction) {
  if (fraction <= 0.0 || n == 0) return 0;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9)));
}

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

struct Prototypes {
  Matrix states;   // S x d/2
  Matrix objects;  // O x d/2
};

void check_options(const SyntheticOptions& o) {
  if (o.states <= 0 || o.objects <= 0) throw InputError("generate: state and object counts must be positive");
  if (o.dim <= 0 || o.dim % 2 != 0) throw InputError("generate: dim must be a positive even number");
  if (o.patch_count < 1 || o.dim % o.patch_count != 0) {
    throw InputError("generate: dim " + std::to_string(o.dim) + " is not divisible by patch count " +
                     std::to_string(o.patch_count));
  }
  if (!(o.seen_fraction > 0.0 && o.seen_fraction <= 1.0)) throw InputError("generate: seen fraction must lie in (0,1]");
  if (!(o.noise_sigma >= 0.0) || (o.state_noise_sigma && !(*o.state_noise_sigma >= 0.0))) {
    throw InputError("generate: noise must be non-negative");
  }
  if (o.images_per_comp < 2) throw InputError("generate: need at least 2 images per composition");
  if (!(o.test_share > 0.0 && o.test_share < 1.0)) throw InputError("generate: test share must lie in (0,1)");
  if (!(o.test_seen_fraction >= 0.0 && o.test_seen_fraction <= 1.0) ||
      !(o.unseen_test_fraction >= 0.0 && o.unseen_test_fraction <= 1.0)) {
    throw InputError("generate: test composition fractions must lie in [0,1]");
  }
}

Prototypes draw_prototypes(const SyntheticOptions& o) {
  auto rng = stream(o.seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index half = o.dim / 2;
  Prototypes p{Matrix(o.states, half), Matrix(o.objects, half)};
  for (Eigen::Index i = 0; i < p.states.size(); ++i) p.states.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < p.objects.size(); ++i) p.objects.data()[i] = normal(rng);
  return p;
}

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::string sample_id(std::size_t i) {
  std::string digits = std::to_string(i);
  return "s" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

double to_storage_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

Dataset generate_synthetic(const SyntheticOptions& o) {
  check_options(o);
  const auto n_states = static_cast<std::size_t>(o.states);
  const auto n_objects = static_cast<std::size_t>(o.objects);
  const std::size_t total = n_states * n_objects;
  const auto n_seen = static_cast<std::size_t>(std::floor(static_cast<double>(total) * o.seen_fraction + 1e-9));
  const std::size_t cover = std::max(n_states, n_objects);
  if (n_seen < cover) {
    throw InputError("generate: " + std::to_string(n_seen) + " seen compositions cannot cover " +
                     std::to_string(n_states) + " states and " + std::to_string(n_objects) + " objects");
  }

  auto split_rng = stream(o.seed, 2);
  std::vector<Eigen::Index> state_order(n_states), object_order(n_objects);
  for (std::size_t i = 0; i < n_states; ++i) state_order[i] = static_cast<Eigen::Index>(i);
  for (std::size_t i = 0; i < n_objects; ++i) object_order[i] = static_cast<Eigen::Index>(i);
  std::shuffle(state_order.begin(), state_order.end(), split_rng);
  std::shuffle(object_order.begin(), object_order.end(), split_rng);

  // Pair the larger side one-to-one so every primitive is covered.
  CompositionSet seen;
  for (std::size_t i = 0; i < cover; ++i) seen.insert({state_order[i % n_states], object_order[i % n_objects]});
  std::vector<Composition> rest;
  for (Eigen::Index s = 0; s < o.states; ++s) {
    for (Eigen::Index j = 0; j < o.objects; ++j) {
      if (!seen.count({s, j})) rest.push_back({s, j});
    }
  }
  std::shuffle(rest.begin(), rest.end(), split_rng);
  for (std::size_t i = 0; seen.size() < n_seen; ++i) seen.insert(rest[i]);

  std::vector<Composition> seen_list(seen.begin(), seen.end());
  std::shuffle(seen_list.begin(), seen_list.end(), split_rng);
  const CompositionSet test_seen(seen_list.begin(),
                                 seen_list.begin() + static_cast<std::ptrdiff_t>(
                                                         fraction_count(seen_list.size(), o.test_seen_fraction)));

  std::vector<Composition> unseen_list;
  for (Eigen::Index s = 0; s < o.states; ++s) {
    for (Eigen::Index j = 0; j < o.objects; ++j) {
      if (!seen.count({s, j})) unseen_list.push_back({s, j});
    }
  }
  std::shuffle(unseen_list.begin(), unseen_list.end(), split_rng);
  unseen_list.resize(fraction_count(unseen_list.size(), o.unseen_test_fraction));

  Dataset ds;
  ds.vocab = Vocabulary(numbered("state", o.states), numbered("object", o.objects));
  ds.split.seen = seen;
  ds.split.unseen = CompositionSet(unseen_list.begin(), unseen_list.end());
  ds.seed = o.seed;

  const auto n_test = static_cast<Eigen::Index>(std::lround(static_cast<double>(o.images_per_comp) * o.test_share));
  if (n_test < 1 || n_test >= o.images_per_comp) {
    throw InputError("generate: test share leaves no train or no test images per composition");
  }

  // Composition-major sample order; within a test-seen composition, train
  // images come first.
  struct Plan {
    Composition c;
    Eigen::Index train;
    Eigen::Index test;
  };
  std::vector<Plan> plan;
  for (Eigen::Index s = 0; s < o.states; ++s) {
    for (Eigen::Index j = 0; j < o.objects; ++j) {
      const Composition c{s, j};
      if (seen.count(c)) {
        const bool in_test = test_seen.count(c) != 0;
        plan.push_back({c, in_test ? o.images_per_comp - n_test : o.images_per_comp, in_test ? n_test : 0});
      } else if (ds.split.unseen.count(c)) {
        plan.push_back({c, 0, n_test});
      }
    }
  }
  Eigen::Index n_samples = 0;
  for (const auto& p : plan) n_samples += p.train + p.test;

  const Prototypes protos = draw_prototypes(o);
  const Eigen::Index half = o.dim / 2;
  const double state_sigma = o.state_noise_sigma.value_or(o.noise_sigma);
  auto noise_rng = stream(o.seed, 3);
  std::normal_distribution<double> normal(0.0, 1.0);

  ds.features.resize(n_samples, o.dim);
  Eigen::Index row = 0;
  for (const auto& p : plan) {
    for (Eigen::Index k = 0; k < p.train + p.test; ++k, ++row) {
      ds.samples.push_back({sample_id(static_cast<std::size_t>(row)), p.c.state, p.c.object,
                            k < p.train ? Split::train : Split::test});
      for (Eigen::Index i = 0; i < half; ++i) {
        ds.features(row, i) = to_storage_precision(protos.states(p.c.state, i) + state_sigma * normal(noise_rng));
      }
      for (Eigen::Index i = 0; i < half; ++i) {
        ds.features(row, half + i) =
            to_storage_precision(protos.objects(p.c.object, i) + o.noise_sigma * normal(noise_rng));
      }
    }
  }
  validate(ds);
  return ds;
}

EmbeddingTable synthetic_embeddings(const SyntheticOptions& o) {
  check_options(o);
  const Prototypes protos = draw_prototypes(o);
  EmbeddingTable table;
  for (Eigen::Index s = 0; s < o.states; ++s) table.add("state" + std::to_string(s), protos.states.row(s).transpose());
  for (Eigen::Index j = 0; j < o.objects; ++j) {
    table.add("object" + std::to_string(j), protos.objects.row(j).transpose());
  }
  return table;
}

MovingMode parse_moving_mode(const std::string& name) {
  if (name == "permute") return MovingMode::permute;
  if (name == "permute+offset") return MovingMode::permute_offset;
  throw InputError("unknown moving mode '" + name + "' (expected permute or permute+offset)");
}

std::string to_string(MovingMode mode) { return mode == MovingMode::permute ? "permute" : "permute+offset"; }

Vector move_chunks(const Vector& f, std::span<const Eigen::Index> perm, const Vector& offset) {
  const auto p = static_cast<Eigen::Index>(perm.size());
  if (p < 1 || f.size() % p != 0) throw InputError("move_chunks: feature length is not divisible by patch count");
  const Eigen::Index t = f.size() / p;
  if (offset.size() != t) throw InputError("move_chunks: offset length must equal the token dimension");
  Vector out(f.size());
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::Index src = perm[static_cast<std::size_t>(i)];
    if (src < 0 || src >= p) throw InputError("move_chunks: invalid permutation");
    out.segment(i * t, t) = f.segment(src * t, t) + offset;
  }
  return out;
}

Dataset perturb_moving(const Dataset& ds, MovingMode mode, Eigen::Index patch_count, std::uint64_t seed,
                       double offset_sigma) {
  if (patch_count < 1 || ds.dim() % patch_count != 0) {
    throw InputError("perturb_moving: feature dimension " + std::to_string(ds.dim()) +
                     " is not divisible by patch count " + std::to_string(patch_count));
  }
  if (!(offset_sigma >= 0.0)) throw InputError("perturb_moving: offset sigma must be non-negative");
  const Eigen::Index t = ds.dim() / patch_count;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, offset_sigma);

  Dataset out = ds;
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(patch_count));
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].split != Split::train) continue;
    for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = static_cast<Eigen::Index>(k);
    std::shuffle(perm.begin(), perm.end(), rng);
    Vector offset = Vector::Zero(t);
    if (mode == MovingMode::permute_offset) {
      for (Eigen::Index k = 0; k < t; ++k) offset[k] = normal(rng);
    }
    const auto r = static_cast<Eigen::Index>(i);
    Vector moved = move_chunks(ds.features.row(r).transpose(), perm, offset);
    out.features.row(r) = moved.unaryExpr([](double v) { return to_storage_precision(v); }).transpose();
  }
  return out;
}

Dataset reduce_train_compositions(const Dataset& ds, std::size_t keep, std::uint64_t seed) {
  const CompositionSet fixed = ds.test_seen();
  const std::size_t current = ds.split.seen.size();
  if (keep < fixed.size()) {
    throw InputError("reduce: keep " + std::to_string(keep) + " is below the " + std::to_string(fixed.size()) +
                     " compositions shared with the test split");
  }
  if (keep > current) {
    throw InputError("reduce: keep " + std::to_string(keep) + " exceeds the " + std::to_string(current) +
                     " train compositions");
  }
  if (keep == current) return ds;

  std::vector<Composition> candidates;
  for (const auto& c : ds.split.seen) {
    if (!fixed.count(c)) candidates.push_back(c);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);

  std::vector<int> state_uses(static_cast<std::size_t>(ds.vocab.state_count()), 0);
  std::vector<int> object_uses(static_cast<std::size_t>(ds.vocab.object_count()), 0);
  for (const auto& c : ds.split.seen) {
    ++state_uses[static_cast<std::size_t>(c.state)];
    ++object_uses[static_cast<std::size_t>(c.object)];
  }
  CompositionSet kept = ds.split.seen;
  for (const auto& c : candidates) {
    if (kept.size() == keep) break;
    auto& su = state_uses[static_cast<std::size_t>(c.state)];
    auto& ou = object_uses[static_cast<std::size_t>(c.object)];
    if (su < 2 || ou < 2) continue;
    --su;
    --ou;
    kept.erase(c);
  }
  if (kept.size() != keep) {
    throw InputError("reduce: cannot drop to " + std::to_string(keep) +
                     " compositions while covering every state and object");
  }

  Dataset out;
  out.vocab = ds.vocab;
  out.seed = ds.seed;
  out.split.seen = kept;
  out.split.unseen = ds.split.unseen;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    if (s.split == Split::train && !kept.count(s.composition())) continue;
    rows.push_back(i);
    out.samples.push_back(s);
  }
  out.features = ds.gather(rows);
  validate(out);
  return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  validate(ds);
  const auto n_train = ds.indices(Split::train).size();

  ordered_json manifest;
  manifest["format"] = "sasow-dataset";
  manifest["version"] = 1;
  manifest["states"] = ds.vocab.states();
  manifest["objects"] = ds.vocab.objects();
  manifest["dim"] = ds.dim();
  manifest["n_samples"] = ds.samples.size();
  manifest["n_train"] = n_train;
  manifest["n_test"] = ds.samples.size() - n_train;
  manifest["n_seen_comps"] = ds.split.seen.size();
  manifest["n_unseen_comps"] = ds.split.unseen.size();
  manifest["seed"] = ds.seed;

  std::ostringstream features;
  features.write("SASF", 4);
  detail::write_u32(features, kFeatureFileVersion);
  detail::write_u32(features, static_cast<std::uint32_t>(ds.samples.size()));
  detail::write_u32(features, static_cast<std::uint32_t>(ds.dim()));
  for (Eigen::Index i = 0; i < ds.features.size(); ++i) {
    detail::write_f32(features, static_cast<float>(ds.features.data()[i]));
  }

  std::ostringstream labels;
  labels << "id,state,object,split\n";
  for (const auto& s : ds.samples) {
    labels << s.id << ',' << ds.vocab.states()[static_cast<std::size_t>(s.state)] << ','
           << ds.vocab.objects()[static_cast<std::size_t>(s.object)] << ',' << to_string(s.split) << '\n';
  }

  std::ostringstream seen;
  seen << "state,object\n";
  for (const auto& c : ds.split.seen) {
    seen << ds.vocab.states()[static_cast<std::size_t>(c.state)] << ','
         << ds.vocab.objects()[static_cast<std::size_t>(c.object)] << '\n';
  }

  detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  detail::write_file(dir / "features.bin", features.str());
  detail::write_file(dir / "labels.csv", labels.str());
  detail::write_file(dir / "seen_comps.csv", seen.str());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError("dataset directory " + dir.string() + " not found");
  Dataset ds;
  std::size_t n_samples = 0;
  Eigen::Index dim = 0;
  try {
    const auto manifest = ordered_json::parse(detail::read_file(dir / "manifest.json"));
    if (manifest.at("format") != "sasow-dataset") throw InputError("manifest.json: not a dataset manifest");
    ds.vocab = Vocabulary(manifest.at("states").get<std::vector<std::string>>(),
                          manifest.at("objects").get<std::vector<std::string>>());
    dim = manifest.at("dim").get<Eigen::Index>();
    n_samples = manifest.at("n_samples").get<std::size_t>();
    ds.seed = manifest.value("seed", std::uint64_t{0});
  } catch (const ordered_json::exception& e) {
    throw InputError("manifest.json: " + std::string(e.what()));
  }

  const std::string blob = detail::read_file(dir / "features.bin");
  detail::ByteReader reader(blob, "features.bin");
  reader.expect_magic("SASF");
  if (reader.u32() != kFeatureFileVersion) throw InputError("features.bin: unsupported version");
  const std::uint32_t rows = reader.u32();
  const std::uint32_t cols = reader.u32();
  if (rows != n_samples || static_cast<Eigen::Index>(cols) != dim) {
    throw InputError("features.bin: header " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " disagrees with manifest " + std::to_string(n_samples) + "x" + std::to_string(dim));
  }
  if (reader.remaining() != static_cast<std::size_t>(rows) * cols * 4) {
    throw InputError("features.bin: size mismatch, expected " + std::to_string(std::size_t{rows} * cols * 4) +
                     " payload bytes, found " + std::to_string(reader.remaining()));
  }
  ds.features.resize(rows, cols);
  for (Eigen::Index i = 0; i < ds.features.size(); ++i) ds.features.data()[i] = reader.f32();

  const auto lines = detail::split_lines(detail::read_file(dir / "labels.csv"));
  if (lines.empty() || lines[0] != "id,state,object,split") throw InputError("labels.csv: bad header");
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const auto f = detail::split_csv(lines[n]);
    const std::string where = "labels.csv:" + std::to_string(n + 1);
    if (f.size() != 4) throw InputError(where + ": expected 4 fields");
    try {
      ds.samples.push_back({f[0], ds.vocab.state_index(f[1]), ds.vocab.object_index(f[2]), parse_split(f[3])});
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  if (ds.samples.size() != n_samples) throw InputError("labels.csv: row count disagrees with manifest");

  const auto seen_path = dir / "seen_comps.csv";
  if (std::filesystem::exists(seen_path)) {
    const auto seen_lines = detail::split_lines(detail::read_file(seen_path));
    if (seen_lines.empty() || seen_lines[0] != "state,object") throw InputError("seen_comps.csv: bad header");
    for (std::size_t n = 1; n < seen_lines.size(); ++n) {
      if (seen_lines[n].empty()) continue;
      const auto f = detail::split_csv(seen_lines[n]);
      if (f.size() != 2) throw InputError("seen_comps.csv:" + std::to_string(n + 1) + ": expected 2 fields");
      ds.split.seen.insert({ds.vocab.state_index(f[0]), ds.vocab.object_index(f[1])});
    }
  } else {
    for (const auto& s : ds.samples) {
      if (s.split == Split::train) ds.split.seen.insert(s.composition());
    }
  }
  for (const auto& s : ds.samples) {
    if (s.split == Split::test && !ds.split.seen.count(s.composition())) ds.split.unseen.insert(s.composition());
  }
  validate(ds);
  return ds;
}

}  // namespace sasow
