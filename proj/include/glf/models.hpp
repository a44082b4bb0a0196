#pragma once

// MLP encoders, frozen prior encoders, SGD with a cosine schedule, and the
// binary checkpoint container.

#include "glf/autodiff.hpp"
#include "glf/io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace glf {

enum class Activation { Relu, Tanh };
enum class FinalActivation { None, L2Normalize };

struct MLPSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::Relu;
  FinalActivation final_activation = FinalActivation::None;

  void validate() const {
    if (layer_widths.size() < 2) throw std::invalid_argument("MLPSpec needs at least 2 widths");
    for (auto w : layer_widths)
      if (w < 1) throw std::invalid_argument("MLPSpec widths must be >= 1");
  }
  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t output_dim() const { return layer_widths.back(); }
};

// Ordered, named parameter blocks. Order is the checkpoint order.
struct NamedParam {
  std::string name;
  Mat value;
};
using ParameterSet = std::vector<NamedParam>;

inline std::size_t parameter_count(const ParameterSet& ps) {
  std::size_t n = 0;
  for (const auto& p : ps) n += static_cast<std::size_t>(p.value.size());
  return n;
}

// Xavier-uniform weights (fan_in x fan_out), zero biases (1 x fan_out).
inline ParameterSet init_mlp(const MLPSpec& spec, std::uint64_t seed, const std::string& prefix = "mlp") {
  spec.validate();
  std::mt19937_64 rng(seed);
  ParameterSet ps;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(spec.layer_widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(spec.layer_widths[l + 1]);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    Mat w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    ps.push_back({prefix + "." + std::to_string(l) + ".weight", std::move(w)});
    ps.push_back({prefix + "." + std::to_string(l) + ".bias", Mat::Zero(1, fan_out)});
  }
  return ps;
}

// Forward pass over parameter tensors laid out as init_mlp produces them
// (weight, bias per layer). Tape-linked whenever params or x are.
inline Tensor mlp_forward(const MLPSpec& spec, std::span<const Tensor> params, const Tensor& x) {
  if (params.size() != 2 * (spec.layer_widths.size() - 1)) throw ShapeError("mlp_forward: parameter count mismatch");
  if (static_cast<std::size_t>(x.cols()) != spec.input_dim())
    throw ShapeError("mlp_forward: input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(spec.input_dim()));
  Tensor h = x;
  const std::size_t n_layers = params.size() / 2;
  for (std::size_t l = 0; l < n_layers; ++l) {
    h = add(matmul(h, params[2 * l]), broadcast_rows(params[2 * l + 1], h.rows()));
    if (l + 1 < n_layers) h = spec.activation == Activation::Relu ? relu(h) : tanh(h);
  }
  if (spec.final_activation == FinalActivation::L2Normalize) h = l2_normalize_rows(h);
  return h;
}

inline Tensor mlp_forward(const MLPSpec& spec, const ParameterSet& params, const Tensor& x) {
  std::vector<Tensor> ts;
  ts.reserve(params.size());
  for (const auto& p : params) ts.emplace_back(p.value);
  return mlp_forward(spec, ts, x);
}

// ---------------------------------------------------------------------------
// Frozen prior encoder

enum class PriorKind { Identity, RandomProjection, File };

struct PriorEncoderSpec {
  PriorKind kind = PriorKind::Identity;
  std::uint64_t seed = 0;
  std::string path;
  std::size_t output_dim = 0;  // 0: same as input
};

class PriorEncoder {
 public:
  PriorEncoder(PriorEncoderSpec spec, std::size_t input_dim) : spec_(std::move(spec)), input_dim_(input_dim) {
    const std::size_t out = spec_.output_dim == 0 ? input_dim : spec_.output_dim;
    switch (spec_.kind) {
      case PriorKind::Identity:
        if (out != input_dim) throw std::invalid_argument("identity prior requires output_dim == input dim");
        break;
      case PriorKind::RandomProjection: {
        std::mt19937_64 rng(spec_.seed);
        std::normal_distribution<double> n(0.0, 1.0);
        map_ = Mat(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(out));
        for (Eigen::Index i = 0; i < map_.size(); ++i) map_.data()[i] = n(rng);
        map_ /= std::sqrt(static_cast<double>(out));
        break;
      }
      case PriorKind::File: {
        NumericTable t = read_raw_f64(spec_.path);
        if (static_cast<std::size_t>(t.features.rows()) != input_dim)
          throw FormatError(spec_.path + ": prior map has " + std::to_string(t.features.rows()) + " rows, expected " +
                            std::to_string(input_dim));
        if (spec_.output_dim != 0 && static_cast<std::size_t>(t.features.cols()) != spec_.output_dim)
          throw FormatError(spec_.path + ": prior map has " + std::to_string(t.features.cols()) +
                            " columns, expected " + std::to_string(spec_.output_dim));
        map_ = std::move(t.features);
        break;
      }
    }
  }

  std::size_t output_dim() const {
    return spec_.kind == PriorKind::Identity ? input_dim_ : static_cast<std::size_t>(map_.cols());
  }

  // Always detached: the prior encoder is frozen.
  Tensor forward(const Tensor& x) const {
    if (static_cast<std::size_t>(x.cols()) != input_dim_) throw ShapeError("prior_forward: input dimension mismatch");
    const Tensor frozen = stop_gradient(x);
    if (spec_.kind == PriorKind::Identity) return frozen;
    return Tensor(Mat(frozen.value() * map_));
  }

  const Mat& map() const { return map_; }

 private:
  PriorEncoderSpec spec_;
  std::size_t input_dim_;
  Mat map_;
};

inline Tensor prior_forward(const PriorEncoderSpec& spec, const Tensor& x) {
  return PriorEncoder(spec, static_cast<std::size_t>(x.cols())).forward(x);
}

// ---------------------------------------------------------------------------
// SGD

struct CosineSchedule {
  double initial = 0.05;
  double final = 1e-4;
  std::size_t total_steps = 1;

  // step 0 -> initial, step total_steps - 1 -> final.
  double at(std::size_t step) const {
    if (total_steps <= 1) return initial;
    const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps - 1));
    return final + 0.5 * (initial - final) * (1.0 + std::cos(std::numbers::pi * t));
  }
};

struct OptimizerState {
  CosineSchedule schedule;
  double momentum = 0.9;
  double weight_decay = 5e-6;
  std::size_t step = 0;
  std::vector<Mat> velocity;

  void validate() const {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
    if (!(schedule.initial > 0.0 && schedule.final > 0.0)) throw std::invalid_argument("learning rates must be > 0");
  }
};

// v <- momentum v + g + weight_decay p;  p <- p - lr v.
inline void sgd_step(OptimizerState& state, ParameterSet& params, const std::vector<Mat>& grads) {
  if (grads.size() != params.size()) throw ShapeError("sgd_step: gradient count does not match parameters");
  if (state.velocity.empty()) {
    for (const auto& p : params) state.velocity.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  }
  const double lr = state.schedule.at(state.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat& p = params[i].value;
    if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols())
      throw ShapeError("sgd_step: gradient shape mismatch for " + params[i].name);
    Mat& v = state.velocity[i];
    v = state.momentum * v + grads[i] + state.weight_decay * p;
    p -= lr * v;
  }
  ++state.step;
}

// ---------------------------------------------------------------------------
// Checkpoint: "GLFC" | u32 version | u64 seed | u64 step | u32 len + spec text |
// u32 n_blocks | per block: u32 len + name, u64 rows, u64 cols, rows*cols f64 LE.

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;
  std::uint32_t format_version = kFormatVersion;
  std::string spec_echo;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  ParameterSet params;

  const Mat& get(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return p.value;
    throw FormatError("checkpoint has no parameter block '" + name + "'");
  }
};

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open checkpoint for writing: " + path);
  out.write("GLFC", 4);
  io::put_u32(out, ck.format_version);
  io::put_u64(out, ck.seed);
  io::put_u64(out, ck.step);
  io::put_string(out, ck.spec_echo);
  io::put_u32(out, static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& p : ck.params) {
    io::put_string(out, p.name);
    io::put_u64(out, static_cast<std::uint64_t>(p.value.rows()));
    io::put_u64(out, static_cast<std::uint64_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) io::put_f64(out, p.value.data()[i]);
  }
  if (!out) throw FormatError("failed writing checkpoint: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "GLFC") throw FormatError(path + ": not a checkpoint (bad magic)");
  Checkpoint ck;
  ck.format_version = io::get_u32(in, path);
  if (ck.format_version != Checkpoint::kFormatVersion)
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(ck.format_version));
  ck.seed = io::get_u64(in, path);
  ck.step = io::get_u64(in, path);
  ck.spec_echo = io::get_string(in, path);
  const std::uint32_t n = io::get_u32(in, path);
  for (std::uint32_t b = 0; b < n; ++b) {
    NamedParam p;
    p.name = io::get_string(in, path);
    const auto r = static_cast<Eigen::Index>(io::get_u64(in, path));
    const auto c = static_cast<Eigen::Index>(io::get_u64(in, path));
    p.value = Mat(r, c);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = io::get_f64(in, path);
    ck.params.push_back(std::move(p));
  }
  return ck;
}

}  // namespace glf
