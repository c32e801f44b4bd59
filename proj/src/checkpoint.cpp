#include "sasow/checkpoint.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "sasow/detail/binary_io.hpp"
#include "sasow/detail/files.hpp"

namespace sasow {

using nlohmann::ordered_json;

std::string encode_parameters(const ClassifierModel& model) {
  std::ostringstream out;
  out.write("SASP", 4);
  detail::write_u32(out, kCheckpointVersion);
  for (const Matrix* p : parameters(model)) {
    for (Eigen::Index i = 0; i < p->size(); ++i) detail::write_f64(out, p->data()[i]);
  }
  return out.str();
}

void save_checkpoint(const ClassifierModel& model, const std::filesystem::path& dir, const std::string& stem) {
  ordered_json j;
  j["format"] = "sasow-checkpoint";
  j["version"] = kCheckpointVersion;
  j["kind"] = to_string(model.kind());
  j["input_dim"] = model.input_dim();
  j["class_count"] = model.class_count();
  if (const auto* mlp = std::get_if<MlpClassifier>(&model.network)) {
    j["hidden_dim"] = mlp->hidden_dim();
    j["dropout"] = mlp->dropout_rate;
  } else {
    const auto& att = std::get<AttentionClassifier>(model.network);
    j["patch_count"] = att.patch_count;
    j["attention_scale"] = att.scale_scores;
  }
  j["seed"] = model.seed;
  j["dataset_fingerprint"] = model.dataset_fingerprint;
  j["class_names"] = model.class_names;
  std::size_t count = 0;
  for (const Matrix* p : parameters(model)) count += static_cast<std::size_t>(p->size());
  j["parameter_count"] = count;
  j["parameters"] = stem + ".bin";

  detail::write_file(dir / (stem + ".json"), j.dump(2) + "\n");
  detail::write_file(dir / (stem + ".bin"), encode_parameters(model));
}

ClassifierModel load_checkpoint(const std::filesystem::path& dir, const std::string& stem) {
  const auto manifest_path = dir / (stem + ".json");
  ordered_json j;
  try {
    j = ordered_json::parse(detail::read_file(manifest_path));
  } catch (const ordered_json::exception& e) {
    throw InputError(manifest_path.string() + ": " + e.what());
  }

  ClassifierModel model;
  try {
    if (j.at("format") != "sasow-checkpoint") throw InputError("not a checkpoint manifest");
    if (j.at("version").get<std::uint32_t>() != kCheckpointVersion) throw InputError("unsupported version");
    const auto kind = parse_classifier_kind(j.at("kind").get<std::string>());
    const auto d = j.at("input_dim").get<Eigen::Index>();
    const auto c = j.at("class_count").get<Eigen::Index>();
    if (kind == ClassifierKind::mlp) {
      model.network = make_mlp(d, j.at("hidden_dim").get<Eigen::Index>(), c, j.at("dropout").get<double>(), 0);
    } else {
      model.network = make_attention(d, j.at("patch_count").get<Eigen::Index>(), c,
                                     j.at("attention_scale").get<bool>(), 0);
    }
    model.seed = j.at("seed").get<std::uint64_t>();
    model.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    model.class_names = j.at("class_names").get<std::vector<std::string>>();
  } catch (const ordered_json::exception& e) {
    throw InputError(manifest_path.string() + ": " + e.what());
  }
  if (static_cast<Eigen::Index>(model.class_names.size()) != model.class_count()) {
    throw InputError(manifest_path.string() + ": class_names length does not match class_count");
  }

  const std::string blob = detail::read_file(dir / (stem + ".bin"));
  detail::ByteReader reader(blob, (dir / (stem + ".bin")).string());
  reader.expect_magic("SASP");
  if (reader.u32() != kCheckpointVersion) throw InputError("unsupported parameter blob version");
  for (Matrix* p : parameters(model)) {
    for (Eigen::Index i = 0; i < p->size(); ++i) p->data()[i] = reader.f64();
    if (!all_finite(*p)) throw InputError("checkpoint contains non-finite parameters");
  }
  if (reader.remaining() != 0) throw InputError("parameter blob has trailing bytes (size mismatch)");
  return model;
}

}  // namespace sasow
