#pragma once

// Experiment runner: pretraining, evaluation, toy constraint comparison and
// hyperparameter sweeps, with deterministic CSV outputs.

#include "glf/config.hpp"
#include "glf/data.hpp"
#include "glf/eval.hpp"
#include "glf/gradcheck.hpp"
#include "glf/losses.hpp"
#include "glf/models.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace glf {

// Non-finite loss during training.
struct DivergenceError : std::runtime_error {
  DivergenceError(std::size_t epoch, std::size_t batch, const std::string& what)
      : std::runtime_error("numeric divergence at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                           ": " + what),
        epoch(epoch),
        batch(batch) {}
  std::size_t epoch, batch;
};

// ---------------------------------------------------------------------------
// Model

struct Model {
  MLPSpec encoder, head, predictor;
  bool has_predictor = false;
  ParameterSet params;  // encoder blocks, then head, then predictor
  std::size_t n_encoder = 0, n_head = 0, n_predictor = 0;

  std::span<const NamedParam> encoder_params() const { return {params.data(), n_encoder}; }
};

inline Model init_model(const ExperimentConfig& cfg) {
  Model m;
  m.encoder = cfg.encoder;
  m.head = cfg.head;
  m.predictor = cfg.predictor;
  m.has_predictor = cfg.aligning.kind == AligningKind::SimSiam;
  auto enc = init_mlp(cfg.encoder, derive_seed({cfg.seed_model, 1}), "encoder");
  auto head = init_mlp(cfg.head, derive_seed({cfg.seed_model, 2}), "head");
  m.n_encoder = enc.size();
  m.n_head = head.size();
  m.params = std::move(enc);
  m.params.insert(m.params.end(), head.begin(), head.end());
  if (m.has_predictor) {
    auto pred = init_mlp(cfg.predictor, derive_seed({cfg.seed_model, 3}), "predictor");
    m.n_predictor = pred.size();
    m.params.insert(m.params.end(), pred.begin(), pred.end());
  }
  return m;
}

inline std::vector<Tensor> as_tensors(std::span<const NamedParam> ps) {
  std::vector<Tensor> out;
  for (const auto& p : ps) out.emplace_back(p.value);
  return out;
}

// Frozen features (encoder output, or head output when requested).
inline Mat encode(const Model& m, const Mat& x, EvalFeatures which = EvalFeatures::Encoder) {
  const auto enc = as_tensors({m.params.data(), m.n_encoder});
  Tensor h = mlp_forward(m.encoder, enc, Tensor(x));
  if (which == EvalFeatures::Head) {
    const auto head = as_tensors({m.params.data() + m.n_encoder, m.n_head});
    h = mlp_forward(m.head, head, h);
  }
  return h.value();
}

inline Model model_from_checkpoint(const Checkpoint& ck) {
  const ExperimentConfig cfg = parse_config(ck.spec_echo, "<checkpoint spec>");
  Model m = init_model(cfg);
  if (m.params.size() != ck.params.size()) throw FormatError("checkpoint parameter blocks do not match its spec");
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const auto& src = ck.params[i];
    if (src.name != m.params[i].name || src.value.rows() != m.params[i].value.rows() || src.value.cols() != m.params[i].value.cols())
      throw FormatError("checkpoint block '" + src.name + "' does not match its spec");
    m.params[i].value = src.value;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Data

inline Dataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset_source == DatasetSource::File) {
    return from_table(load_numeric_file(cfg.dataset_path, cfg.dataset_format, cfg.dataset_has_labels));
  }
  SyntheticSpec s = cfg.dataset;
  s.seed = cfg.seed_data;
  return generate(s);
}

inline DatasetSplit load_split(const ExperimentConfig& cfg) {
  return split_dataset(load_dataset(cfg), cfg.test_fraction, cfg.seed_data);
}

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
  std::size_t epoch = 0;
  double l_ctr = 0.0, l_dcm = 0.0, l_lpm = 0.0, l_constraint = 0.0, total = 0.0;
  double knn_acc = -1.0;  // only when tracked per epoch
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  std::size_t steps = 0;
  std::size_t clamp_events = 0;
};

struct StepLosses {
  double l_ctr = 0.0, l_dcm = 0.0, l_lpm = 0.0, l_constraint = 0.0, total = 0.0;
  std::size_t clamp_events = 0;
};

// One optimization step on a label-free batch.
inline StepLosses train_step(Model& model, OptimizerState& opt, const ExperimentConfig& cfg, const PriorEncoder& prior,
                             const Batch& batch) {
  if (!batch.labels.empty()) throw std::logic_error("labels reached the training path");
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(model.params.size());
  for (const auto& p : model.params) leaves.push_back(tape.leaf(p.value));
  const std::span<const Tensor> enc(leaves.data(), model.n_encoder);
  const std::span<const Tensor> head(leaves.data() + model.n_encoder, model.n_head);
  const std::span<const Tensor> pred(leaves.data() + model.n_encoder + model.n_head, model.n_predictor);

  const Tensor x1(batch.view1), x2(batch.view2);
  const Tensor z1 = mlp_forward(model.head, head, mlp_forward(model.encoder, enc, x1));
  const Tensor z2 = mlp_forward(model.head, head, mlp_forward(model.encoder, enc, x2));

  Predictor predictor;
  if (model.has_predictor) predictor = [&](const Tensor& z) { return mlp_forward(model.predictor, pred, z); };
  const Tensor l_ctr = aligning_loss(cfg.aligning, z1, z2, predictor);

  StepLosses out;
  Tensor total = l_ctr;
  out.l_ctr = l_ctr.item();
  const auto& c = cfg.constraining;
  switch (c.kind) {
    case ConstrainingKind::None: break;
    case ConstrainingKind::Dcm:
    case ConstrainingKind::Lpm:
    case ConstrainingKind::Adc: {
      const double nu = c.kind == ConstrainingKind::Lpm ? 0.0 : c.nu;
      const double upsilon = c.kind == ConstrainingKind::Dcm ? 0.0 : c.upsilon;
      if (nu == 0.0 && upsilon == 0.0) break;
      const Tensor z = concat({z1, z2}, 0);
      const Tensor z_pre = prior.forward(Tensor(Mat((Mat(batch.view1.rows() * 2, batch.view1.cols()) << batch.view1, batch.view2).finished())));
      const auto ctx = build_anchor_contexts(z, z_pre, ContextOptions::from(c));
      const auto obj = total_objective(l_ctr, ctx, nu, upsilon, {c.lpm_variant, c.lpm_concentration});
      total = obj.total;
      out.l_dcm = obj.l_dcm;
      out.l_lpm = obj.l_lpm;
      out.clamp_events = obj.clamp_events;
      break;
    }
    default: {
      if (c.weight == 0.0) break;
      const Tensor z = l2_normalize_rows(concat({z1, z2}, 0));
      const Tensor pen = constraint_baseline(z, c.kind, c);
      out.l_constraint = pen.item();
      total = total + pen * c.weight;
      break;
    }
  }
  out.total = total.item();
  tape.backward(total);
  std::vector<Mat> grads;
  grads.reserve(leaves.size());
  for (const auto& l : leaves) grads.push_back(tape.grad(l));
  sgd_step(opt, model.params, grads);
  return out;
}

inline OptimizerState make_optimizer(const ExperimentConfig& cfg, std::size_t total_steps) {
  OptimizerState opt;
  opt.schedule = CosineSchedule{cfg.lr_initial, cfg.lr_final, total_steps};
  opt.momentum = cfg.momentum;
  opt.weight_decay = cfg.weight_decay;
  opt.validate();
  return opt;
}

inline double knn_accuracy(const Model& m, const ExperimentConfig& cfg, const DatasetSplit& split) {
  const Mat tr = encode(m, split.train.features, cfg.eval_features);
  const Mat te = encode(m, split.test.features, cfg.eval_features);
  return knn_classify(tr, split.train.labels, te, split.test.labels, cfg.knn_k, cfg.knn_metric);
}

inline TrainResult train(const ExperimentConfig& cfg, const DatasetSplit& split, bool knn_every_epoch = false) {
  cfg.validate();
  TrainResult res{init_model(cfg), {}, 0, 0};
  if (static_cast<std::size_t>(split.train.features.cols()) != cfg.encoder.input_dim())
    throw ConfigError("encoder.widths", "first width " + std::to_string(cfg.encoder.input_dim()) +
                                            " does not match data dimension " + std::to_string(split.train.features.cols()));
  const PriorEncoder prior(cfg.prior, split.train.dim());
  // Label firewall: the training path only sees views.
  Dataset unlabeled{split.train.features, {}};
  const std::size_t per_epoch = BatchIterator(unlabeled, cfg.batch_size, 0, cfg.augmentation).num_batches();
  OptimizerState opt = make_optimizer(cfg, cfg.epochs * per_epoch);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    BatchIterator it(unlabeled, cfg.batch_size, derive_seed({cfg.seed_train, e}), cfg.augmentation);
    EpochLog log;
    log.epoch = e + 1;
    std::size_t nb = 0;
    while (auto batch = it.next()) {
      StepLosses s;
      try {
        s = train_step(res.model, opt, cfg, prior, *batch);
      } catch (const NumericError& err) {
        throw DivergenceError(e + 1, nb + 1, err.what());
      } catch (const DomainError& err) {
        throw DivergenceError(e + 1, nb + 1, err.what());
      }
      if (!std::isfinite(s.total)) throw DivergenceError(e + 1, nb + 1, "non-finite loss");
      log.l_ctr += s.l_ctr;
      log.l_dcm += s.l_dcm;
      log.l_lpm += s.l_lpm;
      log.l_constraint += s.l_constraint;
      log.total += s.total;
      res.clamp_events += s.clamp_events;
      ++nb;
      ++res.steps;
    }
    const double inv = nb > 0 ? 1.0 / static_cast<double>(nb) : 0.0;
    log.l_ctr *= inv;
    log.l_dcm *= inv;
    log.l_lpm *= inv;
    log.l_constraint *= inv;
    log.total *= inv;
    for (const auto& p : res.model.params)
      if (!p.value.allFinite()) throw DivergenceError(e + 1, nb, "non-finite parameter in " + p.name);
    if (knn_every_epoch) log.knn_acc = knn_accuracy(res.model, cfg, split);
    res.log.push_back(log);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation

inline MetricsReport evaluate(const Model& m, const ExperimentConfig& cfg, const DatasetSplit& split) {
  if (split.train.labels.empty() || split.test.labels.empty()) throw std::invalid_argument("evaluation needs labeled data");
  if (static_cast<std::size_t>(split.train.features.cols()) != m.encoder.input_dim())
    throw ShapeError("checkpoint expects inputs of dimension " + std::to_string(m.encoder.input_dim()) + ", dataset has " +
                     std::to_string(split.train.features.cols()));
  const Mat tr = encode(m, split.train.features, cfg.eval_features);
  const Mat te = encode(m, split.test.features, cfg.eval_features);
  MetricsReport r;
  r.linear_acc = linear_probe(tr, split.train.labels, te, split.test.labels, cfg.probe);
  r.knn_acc = knn_classify(tr, split.train.labels, te, split.test.labels, cfg.knn_k, cfg.knn_metric);

  // Class-structure metrics on unit-normalized features (scale-free).
  Mat te_unit = te;
  for (Eigen::Index i = 0; i < te_unit.rows(); ++i) {
    const double n = te_unit.row(i).norm();
    if (n > 0.0) te_unit.row(i) /= n;
  }
  r.mean_ce = mean_classifier_ce(te_unit, split.test.labels);
  r.cond_variance = conditional_variance(te_unit, split.test.labels);
  r.intra_compactness = std::sqrt(r.cond_variance);
  r.inter_separability = separability(te_unit, split.test.labels);

  // Alignment/uniformity on two seeded augmentations of the test split.
  Dataset test_unlabeled{split.test.features, {}};
  BatchIterator it(test_unlabeled, split.test.size(), derive_seed({cfg.seed_train, 0xe7a1ULL}), cfg.augmentation);
  if (auto b = it.next()) {
    Mat v1 = encode(m, b->view1, cfg.eval_features), v2 = encode(m, b->view2, cfg.eval_features);
    v1 = v1.rowwise().normalized();
    v2 = v2.rowwise().normalized();
    const auto au = alignment_uniformity(v1, v2);
    r.alignment = au.alignment;
    r.uniformity = au.uniformity;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Output files

namespace harness_detail {

inline std::string num(double v) { return config_detail::fmt_double(v); }

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::filesystem::create_directories(p.parent_path().empty() ? "." : p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + p.string());
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace harness_detail

inline const char* kMetricsHeader =
    "config_hash,linear_acc,knn_acc,mean_ce,cond_variance,intra_compactness,inter_separability,alignment,uniformity\n";

inline std::string metrics_row(const std::string& hash, const MetricsReport& r) {
  using harness_detail::num;
  return hash + "," + num(r.linear_acc) + "," + num(r.knn_acc) + "," + num(r.mean_ce) + "," + num(r.cond_variance) + "," +
         num(r.intra_compactness) + "," + num(r.inter_separability) + "," + num(r.alignment) + "," + num(r.uniformity) + "\n";
}

inline std::string metrics_csv(const std::string& hash, const MetricsReport& r) { return kMetricsHeader + metrics_row(hash, r); }

inline std::string loss_log_csv(const std::string& hash, const std::vector<EpochLog>& log) {
  using harness_detail::num;
  std::string s = "config_hash,epoch,l_ctr,l_dcm,l_lpm,l_constraint,total\n";
  for (const auto& e : log)
    s += hash + "," + std::to_string(e.epoch) + "," + num(e.l_ctr) + "," + num(e.l_dcm) + "," + num(e.l_lpm) + "," +
         num(e.l_constraint) + "," + num(e.total) + "\n";
  return s;
}

inline nlohmann::json metrics_json(const MetricsReport& r) {
  return {{"linear_acc", r.linear_acc},       {"knn_acc", r.knn_acc},
          {"mean_ce", r.mean_ce},             {"cond_variance", r.cond_variance},
          {"intra_compactness", r.intra_compactness}, {"inter_separability", r.inter_separability},
          {"alignment", r.alignment},         {"uniformity", r.uniformity}};
}

struct RunRecord {
  static constexpr int kFormatVersion = 1;
  std::string config_echo;
  std::string config_hash;
  std::vector<EpochLog> log;
  MetricsReport metrics;
  double wall_clock_seconds = 0.0;
  std::string checkpoint_path, metrics_path, loss_log_path, config_path;
  std::size_t clamp_events = 0;
};

// Pretrain, checkpoint, evaluate and write the run directory:
//   config.cfg, losses.csv, metrics.csv, checkpoint.bin, record.json
inline RunRecord cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  using namespace harness_detail;
  const auto t0 = std::chrono::steady_clock::now();
  const DatasetSplit split = load_split(cfg);
  TrainResult tr = train(cfg, split, cfg.knn_every_epoch);
  RunRecord rec;
  rec.config_echo = to_text(cfg);
  rec.config_hash = config_hash(cfg);
  rec.log = tr.log;
  rec.clamp_events = tr.clamp_events;

  std::filesystem::create_directories(out_dir);
  rec.config_path = (out_dir / "config.cfg").string();
  rec.loss_log_path = (out_dir / "losses.csv").string();
  rec.checkpoint_path = (out_dir / "checkpoint.bin").string();
  rec.metrics_path = (out_dir / "metrics.csv").string();
  write_file(rec.config_path, rec.config_echo);
  write_file(rec.loss_log_path, loss_log_csv(rec.config_hash, tr.log));
  write_checkpoint(rec.checkpoint_path, Checkpoint{Checkpoint::kFormatVersion, rec.config_echo, cfg.seed_model, tr.steps, tr.model.params});

  rec.metrics = evaluate(tr.model, cfg, split);
  write_file(rec.metrics_path, metrics_csv(rec.config_hash, rec.metrics));
  rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::json j;
  j["format_version"] = RunRecord::kFormatVersion;
  j["config_hash"] = rec.config_hash;
  j["config"] = rec.config_echo;
  j["metrics"] = metrics_json(rec.metrics);
  j["wall_clock_seconds"] = rec.wall_clock_seconds;
  j["lpm_clamp_events"] = rec.clamp_events;
  j["artifacts"] = {{"checkpoint", rec.checkpoint_path}, {"metrics", rec.metrics_path},
                    {"loss_log", rec.loss_log_path}, {"config", rec.config_path}};
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : tr.log)
    epochs.push_back({{"epoch", e.epoch}, {"l_ctr", e.l_ctr}, {"l_dcm", e.l_dcm}, {"l_lpm", e.l_lpm},
                      {"l_constraint", e.l_constraint}, {"total", e.total}});
  j["epochs"] = epochs;
  write_file(out_dir / "record.json", j.dump(2) + "\n");
  return rec;
}

// Evaluate a checkpoint on the dataset described by `data_cfg`; writes metrics.csv.
inline MetricsReport cmd_eval(const std::filesystem::path& checkpoint, const ExperimentConfig& data_cfg,
                              const std::filesystem::path& out_dir) {
  const Checkpoint ck = read_checkpoint(checkpoint.string());
  const Model m = model_from_checkpoint(ck);
  const DatasetSplit split = load_split(data_cfg);
  if (static_cast<std::size_t>(split.train.features.cols()) != m.encoder.input_dim())
    throw ConfigError("dataset.dim", "checkpoint expects input dimension " + std::to_string(m.encoder.input_dim()) +
                                         ", dataset has " + std::to_string(split.train.features.cols()));
  const MetricsReport r = evaluate(m, data_cfg, split);
  harness_detail::write_file(out_dir / "metrics.csv", metrics_csv(config_hash(data_cfg), r));
  return r;
}

// ---------------------------------------------------------------------------
// Toy constraint comparison

struct ToyColumn {
  std::string name;
  std::vector<double> knn_per_epoch;
};

inline ExperimentConfig toy_variant(const ExperimentConfig& base, const std::string& which) {
  ExperimentConfig c = base;
  c.aligning.kind = AligningKind::AlignOnly;
  if (which == "a") c.constraining.kind = ConstrainingKind::UniformSphere;
  else if (which == "b") c.constraining.kind = ConstrainingKind::UniformCube;
  else if (which == "c") c.constraining.kind = ConstrainingKind::GaussFull;
  else if (which == "d") c.constraining.kind = ConstrainingKind::GaussIdentity;
  else if (which == "e") c.constraining.kind = ConstrainingKind::GaussMixture;
  else if (which == "adc") c.constraining.kind = ConstrainingKind::Adc;
  else throw ConfigError("toy.constraints", "unknown constraint '" + which + "'");
  return c;
}

inline std::size_t thread_budget() {
  if (const char* env = std::getenv("GLF_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

// Runs jobs[i] on up to `threads` workers; results keep index order.
template <typename T>
std::vector<T> run_parallel(std::size_t n, std::size_t threads, const std::function<T(std::size_t)>& job) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// Trains align_only + each configured constraint on the same data and seeds;
// writes toy_constraints.csv with one row per epoch and one 5-nn column per constraint.
inline std::vector<ToyColumn> cmd_toy_constraints(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                                  std::size_t threads = 1) {
  const DatasetSplit split = load_split(cfg);
  auto cols = run_parallel<ToyColumn>(cfg.toy_constraints.size(), threads, [&](std::size_t i) {
    const ExperimentConfig c = toy_variant(cfg, cfg.toy_constraints[i]);
    const TrainResult tr = train(c, split, true);
    ToyColumn col{cfg.toy_constraints[i], {}};
    for (const auto& e : tr.log) col.knn_per_epoch.push_back(e.knn_acc);
    return col;
  });
  std::string s = "config_hash,epoch";
  for (const auto& c : cols) s += "," + c.name;
  s += "\n";
  const std::string hash = config_hash(cfg);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    s += hash + "," + std::to_string(e + 1);
    for (const auto& c : cols) s += "," + harness_detail::num(c.knn_per_epoch[e]);
    s += "\n";
  }
  harness_detail::write_file(out_dir / "toy_constraints.csv", s);
  return cols;
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepCell {
  double nu = 0.0, upsilon = 0.0;
  std::string config_hash;
  MetricsReport metrics;
  bool resumed = false;
};

inline std::string sweep_cell_name(double nu, double upsilon) {
  return "nu_" + harness_detail::num(nu) + "__upsilon_" + harness_detail::num(upsilon);
}

inline MetricsReport parse_metrics_row(const std::string& csv) {
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  std::vector<std::string> f = config_detail::split_list(row);
  if (f.size() != 9) throw FormatError("malformed metrics file");
  MetricsReport r;
  double* slots[] = {&r.linear_acc, &r.knn_acc, &r.mean_ce, &r.cond_variance, &r.intra_compactness,
                     &r.inter_separability, &r.alignment, &r.uniformity};
  for (std::size_t i = 0; i < 8; ++i) *slots[i] = std::stod(f[i + 1]);
  return r;
}

// Cross product over (nu, upsilon) with ADC; each cell writes its own run
// directory under cells/ and is skipped when its metrics.csv already exists.
inline std::vector<SweepCell> cmd_sweep(const ExperimentConfig& base, const std::filesystem::path& out_dir,
                                        std::size_t threads = 1) {
  std::vector<std::pair<double, double>> grid;
  for (double nu : base.sweep_nu)
    for (double up : base.sweep_upsilon) grid.emplace_back(nu, up);
  auto cells = run_parallel<SweepCell>(grid.size(), threads, [&](std::size_t i) {
    ExperimentConfig c = base;
    c.constraining.kind = ConstrainingKind::Adc;
    c.constraining.nu = grid[i].first;
    c.constraining.upsilon = grid[i].second;
    const auto dir = out_dir / "cells" / sweep_cell_name(grid[i].first, grid[i].second);
    c.output_dir = dir.string();
    SweepCell cell{grid[i].first, grid[i].second, config_hash(c), {}, false};
    if (std::filesystem::exists(dir / "metrics.csv")) {
      cell.metrics = parse_metrics_row(harness_detail::read_file(dir / "metrics.csv"));
      cell.resumed = true;
    } else {
      // Write metrics last so an interrupted cell is rerun from scratch.
      std::filesystem::remove(dir / "metrics.csv");
      cell.metrics = cmd_train(c, dir).metrics;
    }
    return cell;
  });
  std::string s = "config_hash,nu,upsilon,linear_acc,knn_acc,mean_ce,cond_variance,intra_compactness,inter_separability,alignment,uniformity\n";
  for (const auto& c : cells) {
    const std::string row = metrics_row(c.config_hash, c.metrics);
    s += c.config_hash + "," + harness_detail::num(c.nu) + "," + harness_detail::num(c.upsilon) + row.substr(c.config_hash.size());
  }
  harness_detail::write_file(out_dir / "sweep.csv", s);
  return cells;
}

}  // namespace glf
