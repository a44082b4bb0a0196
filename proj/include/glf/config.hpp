#pragma once

// Experiment configuration in a flat, typed key-value text format:
//
//   # comment
//   section.key = value
//
// Lists are comma-separated. Every key has a default; unknown keys are an
// error. `to_text` writes every key in a fixed order and is the canonical echo
// used for config hashes and reproduction.

#include "glf/data.hpp"
#include "glf/eval.hpp"
#include "glf/losses.hpp"
#include "glf/models.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace glf {

// Invalid configuration; `field` is the dotted key path when known.
struct ConfigError : std::runtime_error {
  ConfigError(std::string field, const std::string& msg)
      : std::runtime_error(field.empty() ? msg : field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class DatasetSource { Synthetic, File };
enum class EvalFeatures { Encoder, Head };

struct ExperimentConfig {
  DatasetSource dataset_source = DatasetSource::Synthetic;
  SyntheticSpec dataset;
  std::string dataset_path;
  NumericFormat dataset_format = NumericFormat::DelimitedText;
  bool dataset_has_labels = true;
  double test_fraction = 0.2;

  AugmentationSpec augmentation;

  MLPSpec encoder{{32, 64, 32}, Activation::Relu, FinalActivation::None};
  MLPSpec head{{32, 64, 16}, Activation::Relu, FinalActivation::None};
  MLPSpec predictor{{16, 16, 16}, Activation::Relu, FinalActivation::None};
  PriorEncoderSpec prior;

  AligningPartSpec aligning;
  ConstrainingPartSpec constraining;

  double lr_initial = 0.05;
  double lr_final = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-6;

  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  bool knn_every_epoch = false;

  std::uint64_t seed_data = 0;
  std::uint64_t seed_model = 0;
  std::uint64_t seed_train = 0;

  ProbeConfig probe;
  std::size_t knn_k = 5;
  KnnMetric knn_metric = KnnMetric::Euclidean;
  EvalFeatures eval_features = EvalFeatures::Encoder;

  std::string output_dir = "out";

  std::vector<double> sweep_nu = {1e-3, 1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3};
  std::vector<double> sweep_upsilon = {1e-3, 1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3};
  std::vector<std::string> toy_constraints = {"a", "b", "c", "d", "e", "adc"};

  void validate() const;
};

namespace config_detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    std::size_t used = 0;
    const auto d = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true/false, got '" + v + "'");
}

template <typename E>
struct EnumTable {
  std::vector<std::pair<std::string, E>> entries;

  E parse(const std::string& key, const std::string& v) const {
    for (const auto& [name, e] : entries)
      if (name == v) return e;
    std::string allowed;
    for (const auto& [name, e] : entries) allowed += (allowed.empty() ? "" : ", ") + name;
    throw ConfigError(key, "unknown value '" + v + "' (allowed: " + allowed + ")");
  }
  std::string name(E e) const {
    for (const auto& [name, x] : entries)
      if (x == e) return name;
    return "?";
  }
};

inline const EnumTable<SyntheticKind> kSyntheticKinds{{{"blobs", SyntheticKind::Blobs}, {"moons", SyntheticKind::Moons}, {"rings", SyntheticKind::Rings}}};
inline const EnumTable<DatasetSource> kSources{{{"synthetic", DatasetSource::Synthetic}, {"file", DatasetSource::File}}};
inline const EnumTable<NumericFormat> kFormats{{{"delimited_text", NumericFormat::DelimitedText}, {"raw_f64", NumericFormat::RawF64}}};
inline const EnumTable<Activation> kActivations{{{"relu", Activation::Relu}, {"tanh", Activation::Tanh}}};
inline const EnumTable<FinalActivation> kFinals{{{"none", FinalActivation::None}, {"l2_normalize", FinalActivation::L2Normalize}}};
inline const EnumTable<PriorKind> kPriorKinds{{{"identity", PriorKind::Identity}, {"random_projection", PriorKind::RandomProjection}, {"file", PriorKind::File}}};
inline const EnumTable<AligningKind> kAligningKinds{{{"info_nce", AligningKind::InfoNce}, {"align_only", AligningKind::AlignOnly}, {"simsiam", AligningKind::SimSiam}, {"barlow_twins", AligningKind::BarlowTwins}}};
inline const EnumTable<ConstrainingKind> kConstrainingKinds{{
    {"none", ConstrainingKind::None},
    {"dcm", ConstrainingKind::Dcm},
    {"lpm", ConstrainingKind::Lpm},
    {"adc", ConstrainingKind::Adc},
    {"uniform_sphere", ConstrainingKind::UniformSphere},
    {"uniform_cube", ConstrainingKind::UniformCube},
    {"gauss_full", ConstrainingKind::GaussFull},
    {"gauss_identity", ConstrainingKind::GaussIdentity},
    {"gauss_mixture", ConstrainingKind::GaussMixture},
}};
inline const EnumTable<LpmVariant> kLpmVariants{{{"shifted", LpmVariant::Shifted}, {"literal", LpmVariant::Literal}, {"concentrated", LpmVariant::Concentrated}}};
inline const EnumTable<TForm> kTForms{{{"standard", TForm::Standard}, {"paper-literal", TForm::PaperLiteral}}};
inline const EnumTable<KnnMetric> kKnnMetrics{{{"euclidean", KnnMetric::Euclidean}, {"cosine", KnnMetric::Cosine}}};
inline const EnumTable<EvalFeatures> kEvalFeatures{{{"encoder", EvalFeatures::Encoder}, {"head", EvalFeatures::Head}}};

struct Field {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

template <typename T>
Field num(const std::string& key, T& ref) {
  if constexpr (std::is_floating_point_v<T>) {
    return {key, [&ref, key](const std::string& v) { ref = parse_double(key, v); }, [&ref] { return fmt_double(ref); }};
  } else {
    return {key, [&ref, key](const std::string& v) { ref = static_cast<T>(parse_uint(key, v)); },
            [&ref] { return std::to_string(ref); }};
  }
}

template <typename E>
Field enumeration(const std::string& key, E& ref, const EnumTable<E>& table) {
  return {key, [&ref, &table, key](const std::string& v) { ref = table.parse(key, v); }, [&ref, &table] { return table.name(ref); }};
}

inline Field text(const std::string& key, std::string& ref) {
  return {key, [&ref](const std::string& v) { ref = v; }, [&ref] { return ref; }};
}

inline Field boolean(const std::string& key, bool& ref) {
  return {key, [&ref, key](const std::string& v) { ref = parse_bool(key, v); }, [&ref] { return std::string(ref ? "true" : "false"); }};
}

inline Field widths(const std::string& key, std::vector<std::size_t>& ref) {
  return {key,
          [&ref, key](const std::string& v) {
            ref.clear();
            for (const auto& p : split_list(v)) ref.push_back(static_cast<std::size_t>(parse_uint(key, p)));
          },
          [&ref] {
            std::string s;
            for (auto w : ref) s += (s.empty() ? "" : ",") + std::to_string(w);
            return s;
          }};
}

inline Field doubles(const std::string& key, std::vector<double>& ref) {
  return {key,
          [&ref, key](const std::string& v) {
            ref.clear();
            for (const auto& p : split_list(v)) ref.push_back(parse_double(key, p));
          },
          [&ref] {
            std::string s;
            for (auto w : ref) s += (s.empty() ? "" : ",") + fmt_double(w);
            return s;
          }};
}

inline Field strings(const std::string& key, std::vector<std::string>& ref) {
  return {key, [&ref](const std::string& v) { ref = split_list(v); },
          [&ref] {
            std::string s;
            for (const auto& w : ref) s += (s.empty() ? "" : ",") + w;
            return s;
          }};
}

inline std::vector<Field> fields(ExperimentConfig& c) {
  return {
      enumeration("dataset.source", c.dataset_source, kSources),
      enumeration("dataset.kind", c.dataset.kind, kSyntheticKinds),
      num("dataset.n_classes", c.dataset.n_classes),
      num("dataset.dim", c.dataset.dim),
      num("dataset.samples_per_class", c.dataset.samples_per_class),
      num("dataset.class_separation", c.dataset.class_separation),
      num("dataset.spread", c.dataset.spread),
      text("dataset.path", c.dataset_path),
      enumeration("dataset.format", c.dataset_format, kFormats),
      boolean("dataset.has_labels", c.dataset_has_labels),
      num("dataset.test_fraction", c.test_fraction),

      num("augment.noise_sigma", c.augmentation.noise_sigma),
      num("augment.dropout_p", c.augmentation.dropout_p),
      num("augment.scale_min", c.augmentation.scale_min),
      num("augment.scale_max", c.augmentation.scale_max),

      widths("encoder.widths", c.encoder.layer_widths),
      enumeration("encoder.activation", c.encoder.activation, kActivations),
      enumeration("encoder.final_activation", c.encoder.final_activation, kFinals),
      widths("head.widths", c.head.layer_widths),
      enumeration("head.activation", c.head.activation, kActivations),
      enumeration("head.final_activation", c.head.final_activation, kFinals),
      widths("predictor.widths", c.predictor.layer_widths),
      enumeration("predictor.activation", c.predictor.activation, kActivations),

      enumeration("prior.kind", c.prior.kind, kPriorKinds),
      num("prior.seed", c.prior.seed),
      text("prior.path", c.prior.path),
      num("prior.output_dim", c.prior.output_dim),

      enumeration("aligning.kind", c.aligning.kind, kAligningKinds),
      num("aligning.tau", c.aligning.tau),
      num("aligning.lambda_bt", c.aligning.lambda_bt),

      enumeration("constraining.kind", c.constraining.kind, kConstrainingKinds),
      num("constraining.rho", c.constraining.rho),
      num("constraining.lambda_shrink", c.constraining.lambda_shrink),
      num("constraining.nu", c.constraining.nu),
      num("constraining.upsilon", c.constraining.upsilon),
      num("constraining.eps_entropy", c.constraining.eps_entropy),
      enumeration("constraining.lpm_variant", c.constraining.lpm_variant, kLpmVariants),
      num("constraining.lpm_concentration", c.constraining.lpm_concentration),
      enumeration("constraining.t_form", c.constraining.t_form, kTForms),
      num("constraining.weight", c.constraining.weight),
      num("constraining.uniformity_t", c.constraining.uniformity_t),
      num("constraining.dbscan_eps", c.constraining.dbscan_eps),
      num("constraining.dbscan_min_pts", c.constraining.dbscan_min_pts),

      num("optimizer.lr_initial", c.lr_initial),
      num("optimizer.lr_final", c.lr_final),
      num("optimizer.momentum", c.momentum),
      num("optimizer.weight_decay", c.weight_decay),

      num("train.epochs", c.epochs),
      num("train.batch_size", c.batch_size),
      boolean("train.knn_every_epoch", c.knn_every_epoch),

      num("seeds.data", c.seed_data),
      num("seeds.model", c.seed_model),
      num("seeds.train", c.seed_train),

      num("eval.probe_epochs", c.probe.epochs),
      num("eval.probe_momentum", c.probe.momentum),
      num("eval.probe_weight_decay", c.probe.weight_decay),
      num("eval.probe_lr_initial", c.probe.lr_initial),
      num("eval.probe_lr_final", c.probe.lr_final),
      num("eval.probe_batch_size", c.probe.batch_size),
      num("eval.probe_seed", c.probe.seed),
      num("eval.knn_k", c.knn_k),
      enumeration("eval.knn_metric", c.knn_metric, kKnnMetrics),
      enumeration("eval.features", c.eval_features, kEvalFeatures),

      text("output.dir", c.output_dir),

      doubles("sweep.nu", c.sweep_nu),
      doubles("sweep.upsilon", c.sweep_upsilon),
      strings("toy.constraints", c.toy_constraints),
  };
}

}  // namespace config_detail

inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  for (auto& f : config_detail::fields(c)) {
    if (f.key == key) {
      f.set(value);
      return;
    }
  }
  throw ConfigError(key, "unknown configuration key");
}

inline std::string get_config_value(ExperimentConfig& c, const std::string& key) {
  for (auto& f : config_detail::fields(c))
    if (f.key == key) return f.get();
  throw ConfigError(key, "unknown configuration key");
}

inline std::vector<std::string> config_keys() {
  ExperimentConfig c;
  std::vector<std::string> keys;
  for (auto& f : config_detail::fields(c)) keys.push_back(f.key);
  return keys;
}

inline ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = config_detail::trim(line.substr(0, eq));
    const std::string value = config_detail::trim(line.substr(eq + 1));
    set_config_value(c, key, value);
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

// Canonical echo: every key except output.dir, fixed order, full-precision
// numbers. Where a run is written does not change what it computes.
inline std::string to_text(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  std::string out;
  for (auto& f : config_detail::fields(c))
    if (f.key != "output.dir") out += f.key + " = " + f.get() + "\n";
  return out;
}

// FNV-1a 64 of the canonical echo, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void ExperimentConfig::validate() const {
  auto wrap = [](const std::string& section, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(section, e.what());
    }
  };
  if (dataset_source == DatasetSource::Synthetic) wrap("dataset", [&] { dataset.validate(); });
  if (dataset_source == DatasetSource::File && dataset_path.empty()) throw ConfigError("dataset.path", "required when dataset.source = file");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("dataset.test_fraction", "must be in (0, 1)");
  wrap("augment", [&] { augmentation.validate(); });
  wrap("encoder.widths", [&] { encoder.validate(); });
  wrap("head.widths", [&] { head.validate(); });
  if (head.input_dim() != encoder.output_dim()) throw ConfigError("head.widths", "first width must equal the encoder output width");
  if (dataset_source == DatasetSource::Synthetic && encoder.input_dim() != dataset.dim)
    throw ConfigError("encoder.widths", "first width must equal dataset.dim");
  if (aligning.kind == AligningKind::SimSiam) {
    wrap("predictor.widths", [&] { predictor.validate(); });
    if (predictor.input_dim() != head.output_dim() || predictor.output_dim() != head.output_dim())
      throw ConfigError("predictor.widths", "predictor must map the head output width to itself");
  }
  if (prior.kind == PriorKind::File && prior.path.empty()) throw ConfigError("prior.path", "required when prior.kind = file");
  wrap("aligning", [&] { aligning.validate(); });
  wrap("constraining", [&] { constraining.validate(); });
  if (!(lr_initial > 0.0 && lr_final > 0.0)) throw ConfigError("optimizer.lr_initial", "learning rates must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer.momentum", "must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay", "must be >= 0");
  if (batch_size < kMinBatch) throw ConfigError("train.batch_size", "must be >= 3");
  wrap("eval", [&] { probe.validate(); });
  if (knn_k < 1) throw ConfigError("eval.knn_k", "must be >= 1");
  for (const auto& t : toy_constraints) {
    static const std::vector<std::string> ok = {"a", "b", "c", "d", "e", "adc"};
    if (std::find(ok.begin(), ok.end(), t) == ok.end()) throw ConfigError("toy.constraints", "unknown constraint '" + t + "'");
  }
}

}  // namespace glf
