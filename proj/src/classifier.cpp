#include "vfss/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vfss/error.hpp"
#include "vfss/io.hpp"
#include "vfss/kernels.hpp"
#include "vfss/random.hpp"

namespace vfss {

namespace {

int pooled(int side, int times) {
  for (int i = 0; i < times; ++i) side /= 2;
  return side;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> parse_ints(const std::string& s, std::string_view what) {
  std::vector<int> out;
  if (s.empty()) return out;
  for (const auto& f : io::split_fields(s)) out.push_back(io::parse_int(f, what));
  return out;
}

std::array<double, 2> softmax(std::array<double, 2> z) {
  const double m = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

std::map<std::string, PluginBackend>& plugin_registry() {
  static std::map<std::string, PluginBackend> registry;
  return registry;
}

}  // namespace

// ---------------------------------------------------------------- CnnSpec

CnnSpec CnnSpec::cnn3(int input_side) { return {input_side, {4, 8, 16}, {128, 64}, 2}; }
CnnSpec CnnSpec::cnn4(int input_side) { return {input_side, {4, 8, 16, 32}, {128, 64}, 2}; }

int CnnSpec::feature_grid() const { return pooled(input_side, n_blocks()); }

std::string CnnSpec::arch_name() const {
  if (*this == cnn3(input_side)) return "cnn3";
  if (*this == cnn4(input_side)) return "cnn4";
  return "custom";
}

void validate_layout(const CnnSpec& spec) {
  if (spec.input_side < 1) throw DataError("input side must be positive");
  if (spec.block_filters.empty()) throw DataError("network needs at least one convolutional block");
  if (spec.convs_per_block < 1) throw DataError("convs_per_block must be positive");
  for (int f : spec.block_filters)
    if (f < 1) throw DataError("filter counts must be positive");
  for (int f : spec.fc_sizes)
    if (f < 1) throw DataError("fully connected sizes must be positive");
  if (spec.feature_grid() < 1) throw DataError("input side too small for the number of pooling stages");
}

void validate_cnn_spec(const CnnSpec& spec) {
  validate_layout(spec);
  const int n = spec.n_blocks();
  if (n != 3 && n != 4) throw DataError("CNN must have 3 or 4 blocks");
  const std::vector<int> filters = {4, 8, 16, 32};
  if (!std::equal(spec.block_filters.begin(), spec.block_filters.end(), filters.begin()))
    throw DataError("block filters must be 4, 8, 16(, 32)");
  if (spec.convs_per_block != 2) throw DataError("each block holds two convolutions");
  if (spec.fc_sizes != std::vector<int>{128, 64}) throw DataError("fully connected layers must be 128 and 64");
  if (spec.feature_grid() < 4) throw DataError("last convolutional grid must be at least 4x4");
}

std::size_t parameter_count(const CnnSpec& spec) {
  std::size_t total = 0;
  int in = 1;
  for (int f : spec.block_filters) {
    for (int k = 0; k < spec.convs_per_block; ++k) {
      total += std::size_t(9) * in * f + f;
      in = f;
    }
  }
  const int g = spec.feature_grid();
  std::size_t width = std::size_t(in) * g * g;
  for (int f : spec.fc_sizes) {
    total += width * f + f;
    width = f;
  }
  return total + width * 2 + 2;
}

FramePrediction prediction_from_logits(std::array<double, 2> logits) {
  const auto p = softmax(logits);
  return {p[0], p[1], p[1] > p[0] ? Phase::P : Phase::N};
}

FramePrediction PhaseClassifier::predict_frame(const ImageF& input) const {
  return prediction_from_logits(logits(input));
}

// ---------------------------------------------------------------- BasicCnn

template <std::floating_point T>
BasicCnn<T>::BasicCnn(CnnSpec spec) : spec_(std::move(spec)) {
  validate_layout(spec_);
  int in = 1;
  for (int b = 0; b < spec_.n_blocks(); ++b) {
    const int f = spec_.block_filters[b];
    for (int k = 0; k < spec_.convs_per_block; ++k) {
      const std::string base = "block" + std::to_string(b + 1) + "_conv" + std::to_string(k + 1);
      params_.push_back({base + ".weight", {f, in, 3, 3}, std::vector<T>(std::size_t(f) * in * 9)});
      params_.push_back({base + ".bias", {f}, std::vector<T>(f)});
      in = f;
      ++n_conv_;
    }
  }
  const int g = spec_.feature_grid();
  int width = in * g * g;
  for (std::size_t i = 0; i < spec_.fc_sizes.size(); ++i) {
    const int f = spec_.fc_sizes[i];
    const std::string base = "fc" + std::to_string(i + 1);
    params_.push_back({base + ".weight", {f, width}, std::vector<T>(std::size_t(f) * width)});
    params_.push_back({base + ".bias", {f}, std::vector<T>(f)});
    width = f;
  }
  params_.push_back({"logits.weight", {2, width}, std::vector<T>(std::size_t(2) * width)});
  params_.push_back({"logits.bias", {2}, std::vector<T>(2)});
}

template <std::floating_point T>
void BasicCnn<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < params_.size(); i += 2) {
    auto& w = params_[i];
    const bool output_layer = i + 2 == params_.size();
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < w.shape.size(); ++d) fan_in *= w.shape[d];
    const double limit = output_layer ? std::sqrt(6.0 / double(fan_in + w.shape[0])) : std::sqrt(6.0 / double(fan_in));
    for (T& v : w.values) v = static_cast<T>(rng.uniform(-limit, limit));
    std::fill(params_[i + 1].values.begin(), params_[i + 1].values.end(), T{});
  }
}

template <std::floating_point T>
std::size_t BasicCnn<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.values.size();
  return n;
}

template <std::floating_point T>
std::vector<ParamTensor<T>> BasicCnn<T>::zero_like() const {
  std::vector<ParamTensor<T>> out = params_;
  for (auto& p : out) std::fill(p.values.begin(), p.values.end(), T{});
  return out;
}

template <std::floating_point T>
void BasicCnn<T>::forward(std::span<const T> input, Trace& trace) const {
  if (input.size() != std::size_t(spec_.input_side) * spec_.input_side)
    throw DataError("input does not match the network input side");
  const int nb = spec_.n_blocks();
  trace.conv_out.resize(n_conv_);
  trace.pool_out.resize(nb);
  trace.pool_idx.resize(nb);

  std::span<const T> cur = input;
  int in = 1, side = spec_.input_side, layer = 0;
  for (int b = 0; b < nb; ++b) {
    const int f = spec_.block_filters[b];
    for (int k = 0; k < spec_.convs_per_block; ++k, ++layer) {
      const kernels::ConvShape s{in, f, side, side};
      auto& out = trace.conv_out[layer];
      out.resize(s.output_size());
      const auto& w = params_[2 * layer].values;
      const auto& bias = params_[2 * layer + 1].values;
      kernels::conv3x3_forward<T>(s, cur, w, bias, out);
      for (T& v : out) v = std::max(v, T{});
      cur = out;
      in = f;
    }
    const kernels::PoolShape ps{f, side, side};
    trace.pool_out[b].resize(ps.output_size());
    trace.pool_idx[b].resize(ps.output_size());
    kernels::maxpool2x2_forward<T>(ps, cur, trace.pool_out[b], trace.pool_idx[b]);
    cur = trace.pool_out[b];
    side /= 2;
  }
  head_forward(cur, trace);
}

template <std::floating_point T>
void BasicCnn<T>::head_forward(std::span<const T> features, Trace& trace) const {
  const std::size_t first_fc = 2 * std::size_t(n_conv_);
  trace.fc_out.resize(spec_.fc_sizes.size());
  std::span<const T> cur = features;
  for (std::size_t i = 0; i < spec_.fc_sizes.size(); ++i) {
    const auto& w = params_[first_fc + 2 * i];
    const auto& b = params_[first_fc + 2 * i + 1];
    auto& out = trace.fc_out[i];
    out.resize(w.shape[0]);
    kernels::dense_forward<T>(w.shape[1], w.shape[0], cur, w.values, b.values, out);
    for (T& v : out) v = std::max(v, T{});
    cur = out;
  }
  const auto& w = params_[params_.size() - 2];
  const auto& b = params_.back();
  if (cur.size() != std::size_t(w.shape[1])) throw DataError("feature size does not match the network head");
  kernels::dense_forward<T>(w.shape[1], 2, cur, w.values, b.values, trace.logits);
}

template <std::floating_point T>
void BasicCnn<T>::backward(std::span<const T> input, const Trace& trace, std::array<T, 2> grad_logits,
                           std::vector<ParamTensor<T>>* grads, std::span<T> grad_features) const {
  const std::size_t first_fc = 2 * std::size_t(n_conv_);
  const std::size_t n_fc = spec_.fc_sizes.size();
  const std::vector<T>& features = trace.pool_out.back();

  std::vector<T> g(grad_logits.begin(), grad_logits.end());
  std::vector<T> gin;
  std::vector<T> tmp_w, tmp_b;
  // Dense layers from the output back to the features: layer index n_fc is the output layer.
  for (std::size_t li = n_fc + 1; li-- > 0;) {
    const auto& w = params_[first_fc + 2 * li];
    const std::span<const T> layer_in = li == 0 ? std::span<const T>(features) : std::span<const T>(trace.fc_out[li - 1]);
    gin.assign(w.shape[1], T{});
    std::span<T> gw, gb;
    if (grads) {
      gw = (*grads)[first_fc + 2 * li].values;
      gb = (*grads)[first_fc + 2 * li + 1].values;
    } else {
      tmp_w.assign(w.values.size(), T{});
      tmp_b.assign(w.shape[0], T{});
      gw = tmp_w;
      gb = tmp_b;
    }
    kernels::dense_backward<T>(w.shape[1], w.shape[0], layer_in, w.values, g, gin, gw, gb);
    if (li > 0) {
      const auto& act = trace.fc_out[li - 1];
      for (std::size_t i = 0; i < gin.size(); ++i)
        if (!(act[i] > T{})) gin[i] = T{};
    }
    g.swap(gin);
  }
  if (!grad_features.empty()) std::copy(g.begin(), g.end(), grad_features.begin());
  if (!grads) return;

  int side = spec_.feature_grid();
  int layer = n_conv_ - 1;
  std::vector<T> gconv;
  for (int b = spec_.n_blocks() - 1; b >= 0; --b) {
    const int f = spec_.block_filters[b];
    side = pooled(spec_.input_side, b);
    const kernels::PoolShape ps{f, side, side};
    gconv.assign(ps.input_size(), T{});
    kernels::maxpool2x2_backward<T>(ps, g, trace.pool_idx[b], gconv);
    g.swap(gconv);
    for (int k = spec_.convs_per_block - 1; k >= 0; --k, --layer) {
      const auto& act = trace.conv_out[layer];
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!(act[i] > T{})) g[i] = T{};
      const int in_ch = layer == 0 ? 1 : params_[2 * layer].shape[1];
      const kernels::ConvShape s{in_ch, f, side, side};
      std::span<const T> layer_in;
      if (layer == 0) layer_in = input;
      else if (k == 0) layer_in = trace.pool_out[b - 1];
      else layer_in = trace.conv_out[layer - 1];
      gin.assign(layer == 0 ? 0 : s.input_size(), T{});
      kernels::conv3x3_backward<T>(s, layer_in, params_[2 * layer].values, g, gin, (*grads)[2 * layer].values,
                                   (*grads)[2 * layer + 1].values);
      g.swap(gin);
    }
  }
}

template <std::floating_point T>
std::array<double, 2> BasicCnn<T>::logits(const ImageF& input) const {
  if (input.rows() != spec_.input_side || input.cols() != spec_.input_side)
    throw DataError("input is " + std::to_string(input.rows()) + "x" + std::to_string(input.cols()) +
                    ", network expects side " + std::to_string(spec_.input_side));
  std::vector<T> x(input.pixels().begin(), input.pixels().end());
  Trace trace;
  forward(x, trace);
  return {double(trace.logits[0]), double(trace.logits[1])};
}

template <std::floating_point T>
std::array<double, 2> BasicCnn<T>::logits_from_features(std::span<const T> features) const {
  Trace trace;
  head_forward(features, trace);
  return {double(trace.logits[0]), double(trace.logits[1])};
}

template <std::floating_point T>
FeatureGradients BasicCnn<T>::feature_gradients(const ImageF& input, std::optional<Phase> target) const {
  if (input.rows() != spec_.input_side || input.cols() != spec_.input_side)
    throw DataError("input does not match the network input side");
  std::vector<T> x(input.pixels().begin(), input.pixels().end());
  Trace trace;
  forward(x, trace);

  FeatureGradients out;
  out.logits = {double(trace.logits[0]), double(trace.logits[1])};
  out.target = target ? *target : prediction_from_logits(out.logits).predicted;
  out.channels = spec_.block_filters.back();
  out.rows = out.cols = spec_.feature_grid();

  std::array<T, 2> seed{};
  seed[out.target == Phase::P ? 1 : 0] = T{1};
  std::vector<T> g(trace.pool_out.back().size());
  backward(x, trace, seed, nullptr, g);
  out.maps.assign(trace.pool_out.back().begin(), trace.pool_out.back().end());
  out.grads.assign(g.begin(), g.end());
  return out;
}

template class BasicCnn<float>;
template class BasicCnn<double>;

Cnn build_cnn(const CnnSpec& spec, std::uint64_t seed) {
  validate_cnn_spec(spec);
  Cnn model(spec);
  model.initialize(seed);
  return model;
}

// ---------------------------------------------------------------- training

double TrainConfig::learning_rate(int epoch) const {
  return initial_lr * std::pow(lr_decay_factor, epoch / lr_decay_period);
}

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size < 1 || lr_decay_period < 1) throw DataError("training counts must be positive");
  if (!(initial_lr > 0.0)) throw DataError("learning rate must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) throw DataError("decay factor must lie in (0, 1]");
}

std::pair<double, double> evaluate_loss(const Cnn& model, const LabeledFrames& data) {
  if (data.inputs.empty()) return {0.0, 0.0};
  double loss = 0.0;
  std::size_t correct = 0;
  Cnn::Trace trace;
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    model.forward(data.inputs[i].pixels(), trace);
    const auto p = softmax({double(trace.logits[0]), double(trace.logits[1])});
    const int y = data.labels[i] == Phase::P ? 1 : 0;
    loss -= std::log(std::max(p[y], 1e-12));
    correct += ((p[1] > p[0]) == (y == 1));
  }
  const double n = static_cast<double>(data.inputs.size());
  return {loss / n, correct / n};
}

ModelCheckpoint train(Cnn model, const LabeledFrames& train_set, const LabeledFrames& val_set,
                      const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.inputs.empty()) throw DataError("training set is empty");
  if (train_set.inputs.size() != train_set.labels.size()) throw DataError("training inputs and labels differ in size");
  const auto n_pos = std::count(train_set.labels.begin(), train_set.labels.end(), Phase::P);
  const auto n = static_cast<std::ptrdiff_t>(train_set.labels.size());
  if (n_pos == 0 || n_pos == n) throw DataError("training set must contain both P and N frames");

  std::array<double, 2> class_weight{1.0, 1.0};
  if (config.class_balance) {
    class_weight[0] = 0.5 * double(n) / double(n - n_pos);
    class_weight[1] = 0.5 * double(n) / double(n_pos);
  }

  ModelCheckpoint ckpt;
  ckpt.config = config;

  auto m = model.zero_like();
  auto v = model.zero_like();
  auto grads = model.zero_like();
  std::vector<std::size_t> order(train_set.inputs.size());
  Cnn::Trace trace;
  long long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::derive(config.seed, static_cast<std::uint64_t>(epoch));
    shuffle(order, rng);

    double epoch_loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + std::size_t(config.batch_size));
      const double inv_batch = 1.0 / double(end - start);
      for (auto& g : grads) std::fill(g.values.begin(), g.values.end(), 0.0f);
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        const auto input = train_set.inputs[idx].pixels();
        model.forward(input, trace);
        const auto p = softmax({double(trace.logits[0]), double(trace.logits[1])});
        const int y = train_set.labels[idx] == Phase::P ? 1 : 0;
        const double w = class_weight[y];
        epoch_loss -= std::log(std::max(p[y], 1e-12));
        correct += ((p[1] > p[0]) == (y == 1));
        std::array<float, 2> dl{static_cast<float>(w * (p[0] - (y == 0)) * inv_batch),
                                static_cast<float>(w * (p[1] - (y == 1)) * inv_batch)};
        model.backward(input, trace, dl, &grads, {});
      }
      ++step;
      const double b1 = config.adam_beta1, b2 = config.adam_beta2;
      const double c1 = 1.0 - std::pow(b1, double(step));
      const double c2 = 1.0 - std::pow(b2, double(step));
      const float step_size = static_cast<float>(lr * std::sqrt(c2) / c1);
      const float eps = static_cast<float>(config.adam_epsilon * std::sqrt(c2));
      const float fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
      auto& params = model.params();
      for (std::size_t t = 0; t < params.size(); ++t) {
        float* pv = params[t].values.data();
        float* mv = m[t].values.data();
        float* vv = v[t].values.data();
        const float* gv = grads[t].values.data();
        const std::size_t len = params[t].values.size();
#pragma omp simd
        for (std::size_t k = 0; k < len; ++k) {
          mv[k] = fb1 * mv[k] + (1.0f - fb1) * gv[k];
          vv[k] = fb2 * vv[k] + (1.0f - fb2) * gv[k] * gv[k];
          pv[k] -= step_size * mv[k] / (std::sqrt(vv[k]) + eps);
        }
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.train_loss = epoch_loss / double(order.size());
    rec.train_accuracy = double(correct) / double(order.size());
    if (!val_set.inputs.empty()) {
      const auto [vl, va] = evaluate_loss(model, val_set);
      rec.val_loss = vl;
      rec.val_accuracy = va;
    }
    ckpt.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  ckpt.model = std::move(model);
  return ckpt;
}

std::string config_hash(const CnnSpec& spec, const TrainConfig& c, const ClaheParams& clahe) {
  std::ostringstream s;
  s << "side=" << spec.input_side << ";filters=" << join_ints(spec.block_filters) << ";fc=" << join_ints(spec.fc_sizes)
    << ";convs=" << spec.convs_per_block << ";epochs=" << c.epochs << ";batch=" << c.batch_size
    << ";lr=" << io::format_double(c.initial_lr) << ";period=" << c.lr_decay_period
    << ";factor=" << io::format_double(c.lr_decay_factor) << ";seed=" << c.seed << ";balance=" << c.class_balance
    << ";clahe=" << io::format_double(clahe.clip_limit) << "/" << clahe.tiles_x << "x" << clahe.tiles_y;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- checkpoints

void save_checkpoint(const ModelCheckpoint& ckpt, const fs::path& dir) {
  io::ensure_directory(dir / "params");
  const CnnSpec& spec = ckpt.model.spec();
  const TrainConfig& c = ckpt.config;
  {
    std::ofstream out(dir / "checkpoint.txt");
    if (!out) throw Error("cannot write checkpoint in " + dir.string());
    out << "format=vfss-cnn-1\n"
        << "arch=" << spec.arch_name() << '\n'
        << "input_side=" << spec.input_side << '\n'
        << "block_filters=" << join_ints(spec.block_filters) << '\n'
        << "fc_sizes=" << join_ints(spec.fc_sizes) << '\n'
        << "convs_per_block=" << spec.convs_per_block << '\n'
        << "epochs=" << c.epochs << '\n'
        << "batch_size=" << c.batch_size << '\n'
        << "initial_lr=" << io::format_double(c.initial_lr) << '\n'
        << "lr_decay_period=" << c.lr_decay_period << '\n'
        << "lr_decay_factor=" << io::format_double(c.lr_decay_factor) << '\n'
        << "seed=" << c.seed << '\n'
        << "class_balance=" << (c.class_balance ? 1 : 0) << '\n'
        << "clahe_clip=" << io::format_double(ckpt.clahe.clip_limit) << '\n'
        << "clahe_tiles=" << ckpt.clahe.tiles_x << 'x' << ckpt.clahe.tiles_y << '\n'
        << "config_hash=" << ckpt.config_hash << '\n';
  }
  {
    std::ofstream out(dir / "history.csv");
    out << "epoch,learning_rate,train_loss,train_accuracy,val_loss,val_accuracy\n";
    for (const auto& r : ckpt.history)
      out << r.epoch << ',' << io::format_double(r.learning_rate) << ',' << io::format_double(r.train_loss) << ','
          << io::format_double(r.train_accuracy) << ',' << (r.val_loss ? io::format_double(*r.val_loss) : "") << ','
          << (r.val_accuracy ? io::format_double(*r.val_accuracy) : "") << '\n';
  }
  std::ofstream index(dir / "params" / "index.csv");
  index << "name,file,shape,count\n";
  for (const auto& p : ckpt.model.params()) {
    const std::string file = p.name + ".bin";
    std::string shape;
    for (std::size_t i = 0; i < p.shape.size(); ++i) shape += (i ? "x" : "") + std::to_string(p.shape[i]);
    index << p.name << ',' << file << ',' << shape << ',' << p.values.size() << '\n';
    std::ofstream bin(dir / "params" / file, std::ios::binary);
    for (float v : p.values) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      bin.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
    if (!bin) throw Error("cannot write parameter file " + file);
  }
}

ModelCheckpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "checkpoint.txt");
  if (!in) throw DataError("not a checkpoint directory: " + dir.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[io::trim(line.substr(0, eq))] = io::trim(line.substr(eq + 1));
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DataError("checkpoint missing key '" + key + "'");
    return it->second;
  };
  if (get("format") != "vfss-cnn-1") throw DataError("unsupported checkpoint format");

  CnnSpec spec;
  spec.input_side = io::parse_int(get("input_side"), "input_side");
  spec.block_filters = parse_ints(get("block_filters"), "block_filters");
  spec.fc_sizes = parse_ints(get("fc_sizes"), "fc_sizes");
  spec.convs_per_block = io::parse_int(get("convs_per_block"), "convs_per_block");

  ModelCheckpoint ckpt;
  ckpt.model = Cnn(spec);
  ckpt.config.epochs = io::parse_int(get("epochs"), "epochs");
  ckpt.config.batch_size = io::parse_int(get("batch_size"), "batch_size");
  ckpt.config.initial_lr = io::parse_double(get("initial_lr"), "initial_lr");
  ckpt.config.lr_decay_period = io::parse_int(get("lr_decay_period"), "lr_decay_period");
  ckpt.config.lr_decay_factor = io::parse_double(get("lr_decay_factor"), "lr_decay_factor");
  ckpt.config.seed = std::stoull(get("seed"));
  ckpt.config.class_balance = get("class_balance") == "1";
  ckpt.clahe.clip_limit = io::parse_double(get("clahe_clip"), "clahe_clip");
  const auto tiles = get("clahe_tiles");
  const auto x = tiles.find('x');
  if (x == std::string::npos) throw DataError("bad clahe_tiles in checkpoint");
  ckpt.clahe.tiles_x = io::parse_int(tiles.substr(0, x), "clahe_tiles");
  ckpt.clahe.tiles_y = io::parse_int(tiles.substr(x + 1), "clahe_tiles");
  ckpt.config_hash = get("config_hash");

  for (auto& p : ckpt.model.params()) {
    std::ifstream bin(dir / "params" / (p.name + ".bin"), std::ios::binary);
    if (!bin) throw DataError("checkpoint missing parameter file for " + p.name);
    for (float& v : p.values) {
      std::uint32_t bits = 0;
      bin.read(reinterpret_cast<char*>(&bits), sizeof(bits));
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      v = std::bit_cast<float>(bits);
    }
    if (!bin) throw DataError("parameter file for " + p.name + " is truncated");
    if (bin.peek() != std::char_traits<char>::eof()) throw DataError("parameter file for " + p.name + " is too long");
  }

  if (fs::exists(dir / "history.csv")) {
    const auto t = io::read_csv(dir / "history.csv");
    for (const auto& row : t.rows) {
      EpochRecord r;
      r.epoch = io::parse_int(row[0], "epoch");
      r.learning_rate = io::parse_double(row[1], "learning_rate");
      r.train_loss = io::parse_double(row[2], "train_loss");
      r.train_accuracy = io::parse_double(row[3], "train_accuracy");
      if (!row[4].empty()) r.val_loss = io::parse_double(row[4], "val_loss");
      if (!row[5].empty()) r.val_accuracy = io::parse_double(row[5], "val_accuracy");
      ckpt.history.push_back(r);
    }
  }
  return ckpt;
}

ClipPrediction predict_clip(const PhaseClassifier& model, const std::vector<ImageF>& net_inputs) {
  if (net_inputs.empty()) throw DataError("cannot predict an empty clip");
  ClipPrediction out;
  out.frames.reserve(net_inputs.size());
  for (const auto& x : net_inputs) {
    out.frames.push_back(model.predict_frame(x));
    out.labels.push_back(out.frames.back().predicted);
  }
  return out;
}

void register_plugin(const std::string& name, PluginBackend backend) { plugin_registry()[name] = std::move(backend); }

const PluginBackend* find_plugin(const std::string& name) {
  const auto& r = plugin_registry();
  const auto it = r.find(name);
  return it == r.end() ? nullptr : &it->second;
}

}  // namespace vfss
