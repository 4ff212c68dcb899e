#pragma once

#include <array>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vfss/data.hpp"
#include "vfss/image.hpp"
#include "vfss/preprocess.hpp"

namespace vfss {

namespace fs = std::filesystem;

/// Block-structured CNN: each block is `convs_per_block` 3x3 same-padded
/// convolutions with ReLU followed by a 2x2 max pool; then hidden fully
/// connected layers with ReLU and a 2-way output (N, P).
struct CnnSpec {
  int input_side = 224;
  std::vector<int> block_filters;
  std::vector<int> fc_sizes;
  int convs_per_block = 2;

  static CnnSpec cnn3(int input_side = 224);
  static CnnSpec cnn4(int input_side = 224);

  int n_blocks() const { return static_cast<int>(block_filters.size()); }
  /// Side of the feature maps produced by the last block (after pooling).
  int feature_grid() const;
  /// "cnn3", "cnn4" or "custom".
  std::string arch_name() const;

  bool operator==(const CnnSpec&) const = default;
};

/// Structural checks every network must pass (positive sizes, grid >= 1).
void validate_layout(const CnnSpec& spec);
/// Additionally enforces the CNN3/CNN4 family: 3 or 4 blocks with filters
/// 4, 8, 16(, 32), two convs per block, FC 128 and 64, feature grid >= 4.
void validate_cnn_spec(const CnnSpec& spec);

/// Closed-form trainable parameter count.
std::size_t parameter_count(const CnnSpec& spec);

struct FramePrediction {
  double prob_n = 0.5;
  double prob_p = 0.5;
  Phase predicted = Phase::N;
};

FramePrediction prediction_from_logits(std::array<double, 2> logits);

/// Forward pass plus the gradient of one pre-softmax logit with respect to
/// the feature maps of the final convolutional block (C x rows x cols).
struct FeatureGradients {
  std::array<double, 2> logits{};
  Phase target = Phase::P;
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> maps;
  std::vector<double> grads;
};

/// Frame classifier seen by prediction and Grad-CAM. The built-in CNNs
/// implement it; larger backbones plug in through the registry below.
class PhaseClassifier {
 public:
  virtual ~PhaseClassifier() = default;
  virtual std::string name() const = 0;
  virtual int input_side() const = 0;
  virtual std::array<double, 2> logits(const ImageF& input) const = 0;
  /// `target` defaults to the top predicted class.
  virtual FeatureGradients feature_gradients(const ImageF& input, std::optional<Phase> target = {}) const = 0;

  FramePrediction predict_frame(const ImageF& input) const;
};

template <std::floating_point T>
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;
};

template <std::floating_point T>
class BasicCnn final : public PhaseClassifier {
 public:
  /// Zero-initialized parameters; only validate_layout is applied.
  explicit BasicCnn(CnnSpec spec);

  const CnnSpec& spec() const { return spec_; }
  std::string name() const override { return spec_.arch_name(); }
  int input_side() const override { return spec_.input_side; }

  /// He-uniform hidden layers, Glorot-uniform output layer, zero biases.
  void initialize(std::uint64_t seed);

  std::vector<ParamTensor<T>>& params() { return params_; }
  const std::vector<ParamTensor<T>>& params() const { return params_; }
  std::size_t parameter_count() const;

  std::array<double, 2> logits(const ImageF& input) const override;
  FeatureGradients feature_gradients(const ImageF& input, std::optional<Phase> target = {}) const override;

  /// Logits computed from final-block feature maps (C x g x g) through the
  /// fully connected head only.
  std::array<double, 2> logits_from_features(std::span<const T> features) const;

  /// Activations kept by a forward pass for the backward pass.
  struct Trace {
    std::vector<std::vector<T>> conv_out;
    std::vector<std::vector<T>> pool_out;
    std::vector<std::vector<std::int32_t>> pool_idx;
    std::vector<std::vector<T>> fc_out;
    std::vector<T> scratch_a, scratch_b;
    std::array<T, 2> logits{};
  };

  void forward(std::span<const T> input, Trace& trace) const;
  /// Accumulates parameter gradients for d(loss)/d(logits) = grad_logits.
  /// When `grad_features` is non-empty it receives d/d(final feature maps).
  void backward(std::span<const T> input, const Trace& trace, std::array<T, 2> grad_logits,
                std::vector<ParamTensor<T>>* grads, std::span<T> grad_features) const;

  std::vector<ParamTensor<T>> zero_like() const;

 private:
  void head_forward(std::span<const T> features, Trace& trace) const;

  CnnSpec spec_;
  std::vector<ParamTensor<T>> params_;
  int n_conv_ = 0;
};

using Cnn = BasicCnn<float>;

extern template class BasicCnn<float>;
extern template class BasicCnn<double>;

/// Validates the spec (validate_cnn_spec) and returns a seeded network.
Cnn build_cnn(const CnnSpec& spec, std::uint64_t seed);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double initial_lr = 1e-3;
  int lr_decay_period = 5;
  double lr_decay_factor = 0.9;
  std::uint64_t seed = 0;
  bool class_balance = false;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-7;

  /// initial_lr * factor^floor(epoch / period), epochs counted from 0.
  double learning_rate(int epoch) const;
  void validate() const;
};

struct LabeledFrames {
  std::vector<ImageF> inputs;  // net-side x net-side, values in [0, 1]
  std::vector<Phase> labels;
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
};

struct ModelCheckpoint {
  Cnn model{CnnSpec::cnn3()};
  TrainConfig config;
  ClaheParams clahe;
  std::vector<EpochRecord> history;
  std::string config_hash;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mean cross-entropy and accuracy of `model` on a labeled set.
std::pair<double, double> evaluate_loss(const Cnn& model, const LabeledFrames& data);

ModelCheckpoint train(Cnn model, const LabeledFrames& train_set, const LabeledFrames& val_set,
                      const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Hash of the training configuration, network spec and preprocessing.
std::string config_hash(const CnnSpec& spec, const TrainConfig& config, const ClaheParams& clahe);

/// Checkpoint directory layout:
///   checkpoint.txt   key=value manifest (spec, config, preprocessing, hash)
///   history.csv      epoch,learning_rate,train_loss,train_accuracy,val_loss,val_accuracy
///   params/index.csv name,file,shape,count
///   params/<name>.bin  little-endian float32 values, row-major in `shape`
void save_checkpoint(const ModelCheckpoint& checkpoint, const fs::path& dir);
ModelCheckpoint load_checkpoint(const fs::path& dir);

/// Per-frame outputs for a clip.
struct ClipPrediction {
  PhaseSequence labels;
  std::vector<FramePrediction> frames;
};

ClipPrediction predict_clip(const PhaseClassifier& model, const std::vector<ImageF>& net_inputs);

/// Registry for externally provided backbones (`--arch plugin:<name>`).
struct PluginBackend {
  std::function<std::unique_ptr<PhaseClassifier>(const fs::path& checkpoint_dir)> load;
};
void register_plugin(const std::string& name, PluginBackend backend);
const PluginBackend* find_plugin(const std::string& name);

}  // namespace vfss
