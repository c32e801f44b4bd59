#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sasow/feasibility.hpp"
#include "sasow/vocabulary.hpp"

namespace sasow {

enum class Split { train, test };

std::string to_string(Split split);
Split parse_split(const std::string& tag);

struct SampleRecord {
  std::string id;
  Eigen::Index state = 0;
  Eigen::Index object = 0;
  Split split = Split::train;

  Composition composition() const { return {state, object}; }
};

// seen: compositions trained on. unseen: compositions that appear only in
// the test split. Open-world cells in neither set are simply never labeled.
struct SplitSpec {
  CompositionSet seen;
  CompositionSet unseen;
};

struct Dataset {
  Vocabulary vocab;
  std::vector<SampleRecord> samples;
  Matrix features;  // one row per sample
  SplitSpec split;
  std::uint64_t seed = 0;

  Eigen::Index dim() const { return features.cols(); }
  std::vector<std::size_t> indices(Split which) const;
  // Rows of `features` for the given sample indices.
  Matrix gather(std::span<const std::size_t> rows) const;
  // Seen compositions that also have test samples.
  CompositionSet test_seen() const;
};

// Throws InputError unless split and coverage invariants hold.
void validate(const Dataset& ds);

// Order-sensitive hash of the vocabulary, dimension and labels.
std::string fingerprint(const Dataset& ds);

std::uint64_t open_world_space(std::int64_t n_states, std::int64_t n_objects);

struct SyntheticOptions {
  Eigen::Index states = 8;
  Eigen::Index objects = 10;
  Eigen::Index dim = 64;
  Eigen::Index images_per_comp = 20;
  double seen_fraction = 0.5;
  double noise_sigma = 0.1;
  // Noise on the state half of the features; defaults to noise_sigma.
  std::optional<double> state_noise_sigma;
  // Share of each test-seen composition's images held out for test.
  double test_share = 0.2;
  // Fraction of seen compositions that also receive test images.
  double test_seen_fraction = 1.0;
  // Fraction of the non-seen compositions that receive test images.
  double unseen_test_fraction = 1.0;
  Eigen::Index patch_count = 8;
  std::uint64_t seed = 0;
};

/// Synthetic compositional data: each sample is concat(state prototype,
/// object prototype) plus Gaussian noise. Seen compositions cover every
/// primitive. Features are rounded to 32-bit precision, matching storage.
Dataset generate_synthetic(const SyntheticOptions& opts);

// The prototypes used by generate_synthetic, as an embedding table: states
// map to their state prototype, objects to their object prototype.
EmbeddingTable synthetic_embeddings(const SyntheticOptions& opts);

enum class MovingMode { permute, permute_offset };
MovingMode parse_moving_mode(const std::string& name);
std::string to_string(MovingMode mode);

// Reorders the P chunks of f (output chunk i = input chunk perm[i]) and adds
// offset (length d/P) to every chunk.
Vector move_chunks(const Vector& f, std::span<const Eigen::Index> perm, const Vector& offset);

// Per training sample, in sample order: shuffle the chunk order; in
// permute_offset mode also draw an N(0, offset_sigma) offset per token
// entry. Test samples and labels are untouched.
Dataset perturb_moving(const Dataset& ds, MovingMode mode, Eigen::Index patch_count, std::uint64_t seed,
                       double offset_sigma = 1.0);

// Keeps every test-seen composition and drops train-only compositions in
// seeded random order (skipping any whose removal would lose a primitive)
// until `keep` seen compositions remain.
Dataset reduce_train_compositions(const Dataset& ds, std::size_t keep, std::uint64_t seed);

// Directory with manifest.json, features.bin, labels.csv, seen_comps.csv.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

inline constexpr std::uint32_t kFeatureFileVersion = 1;

}  // namespace sasow
