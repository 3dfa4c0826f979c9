#include "wpkit/cli.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "wpkit/binary_io.hpp"
#include "wpkit/datasets_io.hpp"
#include "wpkit/error.hpp"
#include "wpkit/freq_analysis.hpp"
#include "wpkit/metrics.hpp"
#include "wpkit/poisoner.hpp"
#include "wpkit/trigger.hpp"

namespace wpkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw Error("invalid-config", message);
}

template <class T>
T get_as(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw Error("invalid-config", "config key '" + key + "' has the wrong type");
  }
}

using Setter = std::function<void(RunConfig&, const json&, const std::string&)>;

template <class T>
Setter field(T RunConfig::*member) {
  return [member](RunConfig& c, const json& v, const std::string& key) {
    c.*member = get_as<T>(v, key);
  };
}

template <class T>
Setter optional_field(std::optional<T> RunConfig::*member) {
  return [member](RunConfig& c, const json& v, const std::string& key) {
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "auto")) {
      c.*member = std::nullopt;
    } else {
      c.*member = get_as<T>(v, key);
    }
  };
}

const std::map<std::string, Setter>& config_setters() {
  static const std::map<std::string, Setter> setters = {
      {"subcommand", field(&RunConfig::subcommand)},
      {"dataset", field(&RunConfig::dataset)},
      {"format", field(&RunConfig::format)},
      {"split", field(&RunConfig::split)},
      {"test_dataset", field(&RunConfig::test_dataset)},
      {"wavelet", field(&RunConfig::wavelet)},
      {"level", field(&RunConfig::level)},
      {"pad", field(&RunConfig::pad)},
      {"mode", field(&RunConfig::mode)},
      {"compare", field(&RunConfig::compare)},
      {"trigger", field(&RunConfig::trigger)},
      {"pooling", field(&RunConfig::pooling)},
      {"regions", field(&RunConfig::regions)},
      {"k", field(&RunConfig::k)},
      {"k_prime", optional_field(&RunConfig::k_prime)},
      {"alpha", field(&RunConfig::alpha)},
      {"ratio", field(&RunConfig::ratio)},
      {"target", field(&RunConfig::target)},
      {"seed", field(&RunConfig::seed)},
      {"mask_original", field(&RunConfig::mask_original)},
      {"storage", field(&RunConfig::storage)},
      {"predictions", field(&RunConfig::predictions)},
      {"labels", field(&RunConfig::labels)},
      {"poisoned_predictions", field(&RunConfig::poisoned_predictions)},
      {"tp", optional_field(&RunConfig::tp)},
      {"fp", optional_field(&RunConfig::fp)},
      {"fn", optional_field(&RunConfig::fn)},
      {"tn", optional_field(&RunConfig::tn)},
      {"omega", field(&RunConfig::omega)},
      {"bandwidth", optional_field(&RunConfig::bandwidth)},
      {"train_features", field(&RunConfig::train_features)},
      {"test_features", field(&RunConfig::test_features)},
      {"out", field(&RunConfig::out)},
      {"jobs", field(&RunConfig::jobs)},
  };
  return setters;
}

std::optional<std::string> find_config_path(int argc, const char* const* argv) {
  std::optional<std::string> path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      path = argv[++i];
    } else if (arg.rfind("--config=", 0) == 0) {
      path = arg.substr(9);
    }
  }
  return path;
}

LabeledDataset load_dataset(const RunConfig& cfg, const std::string& path, CifarSplit split) {
  require(!path.empty(), "--dataset is required");
  if (cfg.format == "cifar10") return load_cifar_binary(path, CifarVariant::cifar10, split);
  if (cfg.format == "cifar100") return load_cifar_binary(path, CifarVariant::cifar100, split);
  return load_image_dir(path);
}

CifarSplit parse_split(const std::string& text) {
  return text == "test" ? CifarSplit::test : CifarSplit::train;
}

std::size_t image_side(const LabeledDataset& ds) {
  if (ds.empty()) throw Error("empty-dataset", "dataset '" + ds.name + "' has no samples");
  return ds.images.front().height();
}

void report_geometry(const RunConfig& cfg, std::size_t side, std::ostream& err) {
  const auto warning = geometry_warning(side, cfg.level, cfg.pad);
  if (!warning.empty()) err << "warning: " << warning << "\n";
}

void write_json(const std::string& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

void emit(const RunConfig& cfg, const json& doc, std::ostream& out) {
  if (cfg.out.empty()) {
    out << doc.dump(2) << "\n";
  } else {
    write_json(cfg.out, doc);
  }
}

int cmd_analyze(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto ds = load_dataset(cfg, cfg.dataset, parse_split(cfg.split));
  err << "loaded " << ds.size() << " samples from " << cfg.dataset << "\n";
  report_geometry(cfg, image_side(ds), err);
  const auto wavelet = make_wavelet(parse_wavelet_name(cfg.wavelet), cfg.pad);
  const auto mode = parse_aggregation(cfg.mode);

  std::optional<AggregationComparison> cmp;
  EffectivenessMap e;
  if (cfg.compare) {
    cmp = compare_aggregations(ds.images, cfg.level, wavelet, cfg.jobs);
    e = mode == Aggregation::absolute_average ? cmp->absolute_average : cmp->average_absolute;
  } else {
    e = effectiveness(ds.images, cfg.level, wavelet, mode, cfg.jobs);
  }
  const auto sel = select_key_regions(e);
  err << "selected regions: " << sel.to_csv() << "\n";

  const auto analysis = analysis_to_json(e, sel);
  if (cfg.out.empty()) {
    out << analysis.dump(2) << "\n";
    if (cmp) out << comparison_to_json(*cmp).dump(2) << "\n";
    return 0;
  }
  fs::create_directories(cfg.out);
  write_json((fs::path(cfg.out) / "analysis.json").string(), analysis);
  write_text_file((fs::path(cfg.out) / "regions.txt").string(), sel.to_csv() + "\n");
  if (cmp) write_json((fs::path(cfg.out) / "comparison.json").string(), comparison_to_json(*cmp));
  return 0;
}

RegionSelection resolve_regions(const RunConfig& cfg, const LabeledDataset& ds,
                                const WaveletSpec& wavelet, std::ostream& err) {
  if (!cfg.regions.empty() && fs::is_regular_file(cfg.regions)) {
    json doc;
    try {
      doc = json::parse(read_text_file(cfg.regions));
    } catch (const json::exception& e) {
      throw Error("bad-format", cfg.regions + ": " + e.what());
    }
    auto sel = selection_from_json(doc);
    if (sel.level() != cfg.level) {
      throw Error("bad-region-path", cfg.regions + " holds level-" + std::to_string(sel.level()) +
                                         " regions but --level is " +
                                         std::to_string(cfg.level));
    }
    return sel;
  }
  if (!cfg.regions.empty()) return RegionSelection::parse(cfg.level, cfg.regions);
  err << "no --regions given; selecting key regions from the dataset (" << cfg.mode << ")\n";
  const auto e =
      effectiveness(ds.images, cfg.level, wavelet, parse_aggregation(cfg.mode), cfg.jobs);
  return select_key_regions(e);
}

FrequencyTrigger resolve_trigger(const RunConfig& cfg, std::size_t side,
                                 const WaveletSpec& wavelet) {
  require(!cfg.trigger.empty(), "--trigger is required");
  if (fs::path(cfg.trigger).extension() == ".json") {
    auto trig = load_trigger(cfg.trigger);
    const Spectrogram expected(cfg.level, wavelet, side);
    if (!trig.spec.compatible(expected)) {
      throw Error("shape-mismatch", cfg.trigger + " was built for a different size, level, "
                                                  "pad or wavelet than this run");
    }
    return trig;
  }
  return make_frequency_trigger(read_image(cfg.trigger), side, cfg.level, wavelet,
                                parse_pooling(cfg.pooling));
}

int cmd_poison(const RunConfig& cfg, std::ostream& err) {
  require(!cfg.out.empty(), "--out is required for poison");
  const auto storage = parse_storage_format(cfg.storage);
  const auto ds = load_dataset(cfg, cfg.dataset, parse_split(cfg.split));
  err << "loaded " << ds.size() << " samples from " << cfg.dataset << "\n";
  const std::size_t side = image_side(ds);
  report_geometry(cfg, side, err);

  PoisonConfig pc;
  pc.level = cfg.level;
  pc.wavelet = make_wavelet(parse_wavelet_name(cfg.wavelet), cfg.pad);
  pc.k = cfg.k;
  pc.k_prime = cfg.k_prime.value_or(cfg.k);
  pc.alpha = cfg.alpha;
  pc.ratio = cfg.ratio;
  pc.target_label = cfg.target;
  pc.seed = cfg.seed;
  pc.mask_original = cfg.mask_original;
  pc.regions = resolve_regions(cfg, ds, pc.wavelet, err);
  pc.validate();
  const auto trigger = resolve_trigger(cfg, side, pc.wavelet);

  auto train = poison_dataset(ds, pc, trigger, cfg.jobs);
  for (const auto& w : train.warnings) err << "warning: " << w << "\n";
  const fs::path root(cfg.out);
  fs::create_directories(root);
  save_dataset(train.dataset, train.manifest, (root / "train").string(), storage);
  save_trigger(trigger, (root / "trigger.json").string());
  write_text_file((root / "regions.txt").string(), pc.regions.to_csv() + "\n");
  err << "poisoned " << train.manifest.poisoned_indices.size() << " of " << ds.size()
      << " samples into " << (root / "train").string() << "\n";

  if (!cfg.test_dataset.empty()) {
    const auto test_ds = load_dataset(cfg, cfg.test_dataset, CifarSplit::test);
    if (image_side(test_ds) != side) {
      throw Error("size-mismatch", "test images are " + std::to_string(image_side(test_ds)) +
                                       " pixels wide, training images " + std::to_string(side));
    }
    auto test = poison_test_set(test_ds, pc, trigger, cfg.jobs);
    for (const auto& w : test.warnings) err << "warning: " << w << "\n";
    save_dataset(test.dataset, test.manifest, (root / "test").string(), storage);
    err << "poisoned test split: " << test.dataset.size() << " samples\n";
  }
  return 0;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

int cmd_metrics(const RunConfig& cfg, std::ostream& out) {
  json doc = json::object();
  bool any = false;
  if (!cfg.predictions.empty() || !cfg.labels.empty()) {
    require(!cfg.predictions.empty() && !cfg.labels.empty(),
            "clean accuracy needs both --predictions and --labels");
    const auto pred = read_index_csv(cfg.predictions);
    const auto truth = read_index_csv(cfg.labels);
    doc["clean_accuracy"] = clean_accuracy(pred, truth);
    any = true;
  }
  if (!cfg.poisoned_predictions.empty()) {
    const auto pred = read_index_csv(cfg.poisoned_predictions);
    doc["asr"] = attack_success_rate(pred, cfg.target);
    doc["target"] = cfg.target;
    any = true;
  }
  const bool counts = cfg.tp || cfg.fp || cfg.fn || cfg.tn;
  if (counts) {
    require(cfg.tp && cfg.fp && cfg.fn && cfg.tn, "detection scores need --tp, --fp, --fn and --tn");
    const auto s = detection_scores({*cfg.tp, *cfg.fp, *cfg.fn, *cfg.tn, cfg.omega});
    doc["tpr"] = optional_json(s.tpr);
    doc["fpr"] = optional_json(s.fpr);
    doc["f1_omega"] = optional_json(s.f1_omega);
    doc["omega"] = cfg.omega;
    any = true;
  }
  require(any, "metrics needs --predictions/--labels, --poisoned-predictions or confusion counts");
  emit(cfg, doc, out);
  return 0;
}

int cmd_kde(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require(!cfg.train_features.empty() && !cfg.test_features.empty(),
          "kde needs --train-features and --test-features");
  const auto train = read_feature_matrix(cfg.train_features);
  const auto test = read_feature_matrix(cfg.test_features);
  const auto curve = l2_kde(train, test, cfg.bandwidth, cfg.jobs);
  err << "bandwidth " << curve.bandwidth << (curve.bandwidth_fallback ? " (fallback)" : "") << "\n";
  if (curve.bandwidth_fallback) {
    err << "warning: distances have no spread; used a fixed bandwidth\n";
  }
  if (cfg.out.empty()) {
    out.precision(17);
    out << "x,y\n";
    for (std::size_t i = 0; i < curve.xs.size(); ++i) out << curve.xs[i] << "," << curve.ys[i] << "\n";
  } else {
    write_density_csv(cfg.out, curve);
  }
  return 0;
}

void write_error(std::ostream& err, const std::string& code, const std::string& message) {
  err << json{{"error", code}, {"message", message}}.dump() << "\n";
}

void add_dataset_options(CLI::App* app, RunConfig& cfg) {
  app->add_option("--dataset", cfg.dataset, "Dataset file or directory");
  app->add_option("--format", cfg.format, "cifar10, cifar100 or dir")
      ->check(CLI::IsMember({"cifar10", "cifar100", "dir"}));
  app->add_option("--split", cfg.split, "CIFAR split to read")
      ->check(CLI::IsMember({"train", "test"}));
}

void add_transform_options(CLI::App* app, RunConfig& cfg) {
  app->add_option("--wavelet", cfg.wavelet, "db2, db3 or db4");
  app->add_option("--level", cfg.level, "Decomposition level N");
  app->add_option("--pad", cfg.pad, "Reflect padding L");
  app->add_option("--mode", cfg.mode, "absavg or avgabs");
}

}  // namespace

void RunConfig::validate() const {
  require(level >= 1 && level <= 16, "level must be in [1, 16]");
  require(pad >= 1, "pad must be >= 1");
  require(format == "cifar10" || format == "cifar100" || format == "dir",
          "format must be cifar10, cifar100 or dir");
  require(split == "train" || split == "test", "split must be train or test");
  parse_wavelet_name(wavelet);
  parse_aggregation(mode);
  parse_pooling(pooling);
  parse_storage_format(storage);
  require(std::isfinite(omega) && omega > 0.0, "omega must be > 0");
  require(!bandwidth || (std::isfinite(*bandwidth) && *bandwidth > 0.0), "bandwidth must be > 0");
}

void apply_config_json(RunConfig& cfg, const json& doc) {
  if (!doc.is_object()) throw Error("invalid-config", "config file must hold a JSON object");
  const auto& setters = config_setters();
  for (const auto& [key, value] : doc.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '-', '_');
    const auto it = setters.find(name);
    if (it == setters.end()) throw Error("invalid-config", "unknown config key '" + key + "'");
    it->second(cfg, value, key);
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Wavelet-packet frequency trigger toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON config; flags override its values");

  double k_prime = 0.0;
  std::string bandwidth = "auto";
  std::uint64_t counts[4] = {0, 0, 0, 0};

  auto* analyze = app.add_subcommand("analyze", "Per-region effectiveness and key regions");
  add_dataset_options(analyze, cfg);
  add_transform_options(analyze, cfg);
  analyze->add_flag("--compare", cfg.compare, "Also compare both aggregation modes");
  analyze->add_option("--out", cfg.out, "Output directory (stdout if omitted)");
  analyze->add_option("--jobs", cfg.jobs, "Worker threads, 0 = all cores");

  auto* poison = app.add_subcommand("poison", "Write a poisoned dataset and manifest");
  add_dataset_options(poison, cfg);
  add_transform_options(poison, cfg);
  poison->add_option("--test-dataset", cfg.test_dataset, "Test split to poison as well");
  poison->add_option("--trigger", cfg.trigger, "Trigger image, or a saved trigger .json");
  poison->add_option("--pooling", cfg.pooling, "pooled or per_channel");
  poison->add_option("--regions", cfg.regions, "Region list like ah,ha,va,dh or an analysis JSON");
  poison->add_option("--k", cfg.k, "Training trigger intensity");
  auto* k_prime_opt = poison->add_option("--k-prime", k_prime, "Test trigger intensity (default k)");
  poison->add_option("--alpha", cfg.alpha, "Original-information factor at test time");
  poison->add_option("--ratio", cfg.ratio, "Poisoning ratio");
  poison->add_option("--target", cfg.target, "Target label");
  poison->add_option("--seed", cfg.seed, "Sample selection seed");
  poison->add_option("--mask-original", cfg.mask_original, "Drop original info in the regions");
  poison->add_option("--storage", cfg.storage, "raw or png16");
  poison->add_option("--out", cfg.out, "Output directory")->required();
  poison->add_option("--jobs", cfg.jobs, "Worker threads, 0 = all cores");

  auto* metrics = app.add_subcommand("metrics", "Accuracy, ASR and detection scores");
  metrics->add_option("--predictions", cfg.predictions, "Clean predictions CSV (index,pred)");
  metrics->add_option("--labels", cfg.labels, "Ground truth CSV (index,label)");
  metrics->add_option("--poisoned-predictions", cfg.poisoned_predictions,
                      "Predictions on the poisoned test split");
  metrics->add_option("--target", cfg.target, "Target label");
  CLI::Option* count_opts[4] = {
      metrics->add_option("--tp", counts[0], "True positives"),
      metrics->add_option("--fp", counts[1], "False positives"),
      metrics->add_option("--fn", counts[2], "False negatives"),
      metrics->add_option("--tn", counts[3], "True negatives")};
  metrics->add_option("--omega", cfg.omega, "FN weight in F1");
  metrics->add_option("--out", cfg.out, "Output JSON (stdout if omitted)");

  auto* kde = app.add_subcommand("kde", "Density of averaged L2 distances");
  kde->add_option("--train-features", cfg.train_features, "Poisoned training features");
  kde->add_option("--test-features", cfg.test_features, "Poisoned test features");
  auto* bandwidth_opt = kde->add_option("--bandwidth", bandwidth, "Number or 'auto'");
  kde->add_option("--out", cfg.out, "Output CSV (stdout if omitted)");
  kde->add_option("--jobs", cfg.jobs, "Worker threads, 0 = all cores");

  try {
    if (const auto path = find_config_path(argc, argv)) {
      json doc;
      try {
        doc = json::parse(read_text_file(*path));
      } catch (const json::exception& e) {
        throw Error("invalid-config", *path + ": " + e.what());
      }
      apply_config_json(cfg, doc);
    }
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      write_error(err, "usage", e.what());
      return 2;
    }
    if (k_prime_opt->count() > 0) cfg.k_prime = k_prime;
    if (bandwidth_opt->count() > 0) {
      if (bandwidth == "auto") {
        cfg.bandwidth.reset();
      } else {
        try {
          cfg.bandwidth = std::stod(bandwidth);
        } catch (const std::exception&) {
          throw Error("invalid-config", "bandwidth must be a number or 'auto'");
        }
      }
    }
    std::optional<std::uint64_t>* count_fields[4] = {&cfg.tp, &cfg.fp, &cfg.fn, &cfg.tn};
    for (int i = 0; i < 4; ++i) {
      if (count_opts[i]->count() > 0) *count_fields[i] = counts[i];
    }
    cfg.validate();

    if (analyze->parsed()) return cmd_analyze(cfg, out, err);
    if (poison->parsed()) return cmd_poison(cfg, err);
    if (metrics->parsed()) return cmd_metrics(cfg, out);
    return cmd_kde(cfg, out, err);
  } catch (const Error& e) {
    write_error(err, e.code(), e.what());
  } catch (const json::exception& e) {
    write_error(err, "bad-format", e.what());
  } catch (const fs::filesystem_error& e) {
    write_error(err, "io-error", e.what());
  } catch (const std::exception& e) {
    write_error(err, "internal", e.what());
  }
  return 1;
}

}  // namespace wpkit
