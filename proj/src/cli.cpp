#include "sasow/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sasow/checkpoint.hpp"
#include "sasow/detail/binary_io.hpp"
#include "sasow/detail/csv.hpp"
#include "sasow/detail/files.hpp"
#include "sasow/evaluation.hpp"
#include "sasow/report.hpp"

namespace sasow {

using nlohmann::ordered_json;

namespace {

struct GenDataArgs {
  SyntheticOptions opts;
  std::string out;
  std::optional<double> state_noise;
  std::string moving;
  double offset_sigma = 1.0;
  std::size_t reduce_comps = 0;
};

struct TrainArgs {
  std::string data, config, out, classifier;
};

struct EvalArgs {
  std::string data, report, mask, embeddings, variant, curve_csv;
  std::vector<std::string> models;
  std::optional<double> tau;
  bool no_mask = false;
  bool weighted = false;
  std::size_t bias_points = kDefaultBiasPoints;
};

struct FeasibilityArgs {
  std::string embeddings, data, out;
  double tau = 0.0;
};

void cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  SyntheticOptions opts = a.opts;
  opts.state_noise_sigma = a.state_noise;
  Dataset ds = generate_synthetic(opts);
  if (a.reduce_comps > 0) ds = reduce_train_compositions(ds, a.reduce_comps, opts.seed + 7);
  if (!a.moving.empty()) {
    ds = perturb_moving(ds, parse_moving_mode(a.moving), opts.patch_count, opts.seed + 1000003, a.offset_sigma);
  }
  save_dataset(ds, a.out);
  save_embeddings(synthetic_embeddings(opts), std::filesystem::path(a.out) / "embeddings.csv");
  out << "wrote " << ds.samples.size() << " samples (" << ds.indices(Split::train).size() << " train, "
      << ds.indices(Split::test).size() << " test), " << ds.split.seen.size() << " seen and "
      << ds.split.unseen.size() << " unseen compositions to " << a.out << "\n";
}

void cmd_train(const TrainArgs& a, std::ostream& out) {
  const Dataset ds = load_dataset(a.data);
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : parse_train_config(detail::read_file(a.config));
  if (!a.classifier.empty()) cfg.classifier = parse_classifier_kind(a.classifier);
  if (const char* env = std::getenv("SASOW_SEED"); env != nullptr && *env != '\0') {
    cfg.seed = static_cast<std::uint64_t>(detail::parse_int(env, "SASOW_SEED"));
  }
  cfg.validate();

  const TrainResult r = train(ds, cfg);
  save_checkpoint(r.state_model, a.out, "state");
  save_checkpoint(r.object_model, a.out, "object");

  ordered_json summary;
  summary["kind"] = to_string(cfg.classifier);
  summary["a_sta"] = r.accuracy.a_sta;
  summary["a_obj"] = r.accuracy.a_obj;
  summary["measured_on"] = "validation";
  summary["validation_samples"] = r.validation_rows.size();
  summary["fit_samples"] = r.fit_rows.size();
  summary["state_train_accuracy"] = r.state_history.train_accuracy;
  summary["object_train_accuracy"] = r.object_history.train_accuracy;
  summary["state_final_loss"] = r.state_history.epoch_loss.back();
  summary["object_final_loss"] = r.object_history.epoch_loss.back();
  summary["dataset_fingerprint"] = fingerprint(ds);
  summary["state_checksum"] = detail::hex64(detail::fnv1a(encode_parameters(r.state_model)));
  summary["object_checksum"] = detail::hex64(detail::fnv1a(encode_parameters(r.object_model)));
  summary["config"] = ordered_json::parse(to_json(cfg));
  detail::write_file(std::filesystem::path(a.out) / "summary.json", summary.dump(2) + "\n");
  out << "trained " << to_string(cfg.classifier) << " towers: A_sta=" << r.accuracy.a_sta
      << " A_obj=" << r.accuracy.a_obj << " (validation)\n";
}

struct LoadedModel {
  ClassifierModel state;
  ClassifierModel object;
  PrimitiveAccuracy accuracy;
};

LoadedModel load_model_dir(const std::string& dir, const Dataset& ds) {
  LoadedModel m{load_checkpoint(dir, "state"), load_checkpoint(dir, "object"), {}};
  if (m.state.kind() != m.object.kind()) throw InputError(dir + ": state and object towers differ in kind");
  if (m.state.class_names != ds.vocab.states() || m.object.class_names != ds.vocab.objects() ||
      m.state.input_dim() != ds.dim() || m.object.input_dim() != ds.dim()) {
    throw InputError(dir + ": model does not match the dataset vocabulary or feature dimension");
  }
  try {
    const auto summary = ordered_json::parse(detail::read_file(std::filesystem::path(dir) / "summary.json"));
    m.accuracy.a_sta = summary.at("a_sta").get<double>();
    m.accuracy.a_obj = summary.at("a_obj").get<double>();
  } catch (const ordered_json::exception& e) {
    throw InputError(dir + "/summary.json: " + e.what());
  }
  return m;
}

FeasibilityMask resolve_mask(const EvalArgs& a, const Dataset& ds) {
  const int sources = (a.mask.empty() ? 0 : 1) + (a.embeddings.empty() ? 0 : 1) + (a.no_mask ? 1 : 0);
  if (sources > 1) throw InputError("choose one of --mask, --embeddings/--tau, --no-mask");
  if (!a.mask.empty()) return load_mask(a.mask, ds.vocab);
  if (!a.embeddings.empty()) {
    if (!a.tau) throw InputError("--embeddings requires --tau");
    return build_mask(load_embeddings(a.embeddings), ds.vocab, ds.split.seen, *a.tau);
  }
  if (a.tau) throw InputError("--tau requires --embeddings");
  return FeasibilityMask::all_feasible(ds.vocab.state_count(), ds.vocab.object_count());
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Dataset ds = load_dataset(a.data);
  std::map<ClassifierKind, LoadedModel> models;
  for (const auto& dir : a.models) {
    LoadedModel m = load_model_dir(dir, ds);
    const auto kind = m.state.kind();
    if (!models.emplace(kind, std::move(m)).second) throw InputError("two --model directories of kind " + to_string(kind));
  }

  std::vector<Variant> variants;
  if (a.variant == "all") {
    variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
  } else if (!a.variant.empty()) {
    variants.push_back(parse_variant(a.variant));
    if (a.weighted && !variant_weighted(variants.back())) {
      throw InputError("--weighted conflicts with unweighted variant " + a.variant);
    }
  } else {
    if (models.size() != 1) throw InputError("pass --variant when giving more than one --model");
    variants.push_back(variant_for(models.begin()->first, a.weighted));
  }

  const FeasibilityMask mask = resolve_mask(a, ds);
  std::vector<EvalReport> reports;
  for (Variant v : variants) {
    auto it = models.find(variant_classifier(v));
    if (it == models.end()) {
      throw InputError("variant " + to_string(v) + " needs a " + to_string(variant_classifier(v)) + " --model");
    }
    const LoadedModel& m = it->second;
    if (variant_weighted(v) && !(m.accuracy.a_sta > 0.0 && m.accuracy.a_obj > 0.0)) {
      throw InputError("variant " + to_string(v) + " needs positive a_sta and a_obj in the model summary");
    }
    reports.push_back(evaluate_open_world(m.state, m.object, m.accuracy, ds, mask, v, a.bias_points));
  }

  detail::write_file(a.report, reports.size() == 1 && a.variant != "all" ? report_to_json(reports.front())
                                                                         : reports_to_json(reports));
  if (!a.curve_csv.empty()) {
    std::string csv;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      std::string part = curve_to_csv(reports[i]);
      if (reports.size() > 1) {
        // Prefix a variant column so the curves stay distinguishable.
        std::string tagged;
        std::istringstream lines(part);
        std::string line;
        bool header = true;
        while (std::getline(lines, line)) {
          if (header) {
            if (i == 0) tagged += "variant," + line + "\n";
            header = false;
          } else {
            tagged += to_string(reports[i].variant) + "," + line + "\n";
          }
        }
        part = tagged;
      }
      csv += part;
    }
    detail::write_file(a.curve_csv, csv);
  }
  out << format_table(reports);
}

void cmd_feasibility(const FeasibilityArgs& a, std::ostream& out) {
  if (!(a.tau >= -1.0 && a.tau <= 1.0)) throw InputError("--tau must lie in [-1, 1]");
  const Dataset ds = load_dataset(a.data);
  const FeasibilityMask mask = build_mask(load_embeddings(a.embeddings), ds.vocab, ds.split.seen, a.tau);
  require_seen_feasible(mask, ds.split.seen);
  save_mask(mask, ds.vocab, a.out);
  out << "feasible compositions: " << mask.feasible_count() << " of " << mask.states() * mask.objects() << "\n"
      << "seen compositions feasible: " << ds.split.seen.size() << " of " << ds.split.seen.size() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-world compositional zero-shot recognition over precomputed features"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic compositional dataset");
  gen_cmd->add_option("--states", gen.opts.states)->required();
  gen_cmd->add_option("--objects", gen.opts.objects)->required();
  gen_cmd->add_option("--dim", gen.opts.dim)->required();
  gen_cmd->add_option("--images-per-comp", gen.opts.images_per_comp)->required();
  gen_cmd->add_option("--seen-frac", gen.opts.seen_fraction)->required();
  gen_cmd->add_option("--noise", gen.opts.noise_sigma)->required();
  gen_cmd->add_option("--seed", gen.opts.seed)->required();
  gen_cmd->add_option("--out", gen.out)->required();
  gen_cmd->add_option("--state-noise", gen.state_noise, "Noise on the state half (default: --noise)");
  gen_cmd->add_option("--test-share", gen.opts.test_share)->capture_default_str();
  gen_cmd->add_option("--test-seen-frac", gen.opts.test_seen_fraction)->capture_default_str();
  gen_cmd->add_option("--unseen-frac", gen.opts.unseen_test_fraction)->capture_default_str();
  gen_cmd->add_option("--patches", gen.opts.patch_count)->capture_default_str();
  auto* moving_opt = gen_cmd->add_option("--moving", gen.moving, "permute or permute+offset")->expected(0, 1);
  gen_cmd->add_option("--offset-sigma", gen.offset_sigma)->capture_default_str();
  gen_cmd->add_option("--reduce-comps", gen.reduce_comps, "Keep this many train compositions");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train state and object classifiers");
  train_cmd->add_option("--data", tr.data)->required();
  train_cmd->add_option("--config", tr.config, "JSON training config");
  train_cmd->add_option("--out", tr.out)->required();
  train_cmd->add_option("--classifier", tr.classifier, "mlp or attention (overrides config)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Open-world evaluation of one or all variants");
  eval_cmd->add_option("--data", ev.data)->required();
  eval_cmd->add_option("--model", ev.models, "Checkpoint directory (repeat for mlp and attention)")->required();
  eval_cmd->add_option("--report", ev.report)->required();
  eval_cmd->add_option("--mask", ev.mask);
  eval_cmd->add_option("--embeddings", ev.embeddings);
  eval_cmd->add_option("--tau", ev.tau);
  eval_cmd->add_flag("--no-mask", ev.no_mask);
  eval_cmd->add_flag("--weighted", ev.weighted);
  eval_cmd->add_option("--bias-points", ev.bias_points)->capture_default_str();
  eval_cmd->add_option("--variant", ev.variant, "kg-sp, kg-sa, kg-sow, sasow or all");
  eval_cmd->add_option("--curve-csv", ev.curve_csv);

  FeasibilityArgs fe;
  auto* feas_cmd = app.add_subcommand("feasibility", "Build a feasibility mask from embeddings");
  feas_cmd->add_option("--embeddings", fe.embeddings)->required();
  feas_cmd->add_option("--data", fe.data)->required();
  feas_cmd->add_option("--tau", fe.tau)->required();
  feas_cmd->add_option("--out", fe.out)->required();

  std::vector<std::string> argv_store{"sasow"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (gen_cmd->parsed()) {
      if (moving_opt->count() > 0 && gen.moving.empty()) gen.moving = "permute+offset";
      cmd_gen_data(gen, out);
    } else if (train_cmd->parsed()) {
      cmd_train(tr, out);
    } else if (eval_cmd->parsed()) {
      cmd_eval(ev, out);
    } else if (feas_cmd->parsed()) {
      cmd_feasibility(fe, out);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const PredictionError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace sasow
