#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sbmeter/ndnum.hpp"
#include "sbmeter/path_logits.hpp"
#include "sbmeter/spectral.hpp"

namespace sbmeter::models {

using ndnum::ImageTensor;

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class ActivationKind { relu, betarelu };

struct ActivationConfig {
  ActivationKind kind = ActivationKind::relu;
  /// Smoothness in (0, 1]; ignored for relu.
  double beta = 1.0;
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// 0.5·σ(βx/(1−β))·x + 0.5·softplus(x/(1−β))·(1−β).
///
/// β = 1 returns relu(x) exactly. For β < 1 the logistic and softplus terms
/// are evaluated through their overflow-free branches, so arbitrarily large
/// |x|/(1−β) is safe. Throws std::domain_error for β outside (0, 1].
double beta_relu(double x, double beta);

double activate(const ActivationConfig& cfg, double x);

// ---------------------------------------------------------------------------
// LayerNorm with an extra scale
// ---------------------------------------------------------------------------

struct LayerNormConfig {
  std::vector<double> gamma;
  std::vector<double> shift;
  double gamma_s = 1.0;
  double eps = 1e-5;

  /// γ = 1, shift = 0 for a vector of length `n`.
  static LayerNormConfig identity(std::size_t n, double gamma_s = 1.0, double eps = 1e-5);
};

/// ((x − μ)/√(σ² + ε))·(γ·γ_s) + shift with the population variance.
std::vector<double> layernorm_scaled(std::span<const double> x, const LayerNormConfig& cfg);

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

/// Dense map over the flattened input; output shape is out×1×1.
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // out × in, row-major
  std::vector<double> bias;    // empty or `out` entries
};

/// Stride-1 convolution with zero "same" padding; `kernel` must be odd.
struct Conv2d {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::vector<double> weight;  // out × in × kernel × kernel
  std::vector<double> bias;    // empty or out_channels entries
};

struct Activation {
  ActivationConfig config;
};

/// Normalizes the whole (flattened) feature vector.
struct LayerNorm {
  LayerNormConfig config;
};

/// Radial frequency filter applied per channel. Bins with normalized radius
/// below `cutoff` pass unchanged; the rest are attenuated to
/// stopband_gain·(cutoff/ρ)². A cutoff of 1 is the identity.
struct LowPass {
  double cutoff = 1.0;
  double stopband_gain = 1e-4;

  double response(double rho) const;
};

struct GlobalAvgPool {};

/// h + fc2(act(fc1(norm(h)))), the MLP half of a pre-norm transformer block.
struct PreNormMlpBlock {
  LayerNorm norm;
  Dense fc1;
  Activation act;
  Dense fc2;
};

using Layer = std::variant<Dense, Conv2d, Activation, LayerNorm, LowPass, GlobalAvgPool,
                           PreNormMlpBlock>;

struct InputShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  bool operator==(const InputShape&) const = default;
};

/// Forward-only image encoder. Immutable once built; forward() is reentrant.
class EncoderModel {
 public:
  /// Throws std::invalid_argument when the layer stack does not fit `input`.
  EncoderModel(std::string name, InputShape input, std::vector<Layer> layers);

  std::vector<double> forward(const ImageTensor& x) const;
  std::vector<std::vector<double>> forward_batch(std::span<const ImageTensor> xs) const;

  const std::string& name() const { return name_; }
  InputShape input_shape() const { return input_; }
  std::size_t output_dim() const { return output_dim_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<std::string> activation_sites() const;
  std::vector<std::string> layernorm_sites() const;
  std::vector<std::string> lowpass_sites() const;
  std::size_t parameter_count() const;

 private:
  std::string name_;
  InputShape input_;
  std::vector<Layer> layers_;
  std::size_t output_dim_ = 0;
};

// ---------------------------------------------------------------------------
// Model surgery. Each returns a new model; the input is untouched.
// ---------------------------------------------------------------------------

struct SurgeryResult {
  EncoderModel model;
  /// Set when the model had no site to modify.
  std::optional<std::string> warning;
};

/// Every activation site becomes beta_relu(·, β).
SurgeryResult swap_activations(const EncoderModel& model, double beta);
/// Every LayerNorm's extra scale is multiplied by γ_s.
SurgeryResult scale_layernorms(const EncoderModel& model, double gamma_s);
/// Every LowPass site gets the given cutoff in (0, 1].
SurgeryResult set_lowpass_cutoff(const EncoderModel& model, double cutoff);

// ---------------------------------------------------------------------------
// Logit contract
// ---------------------------------------------------------------------------

/// K class embeddings of dimension D, standing in for the text tower output.
class TextAnchors {
 public:
  /// Throws std::invalid_argument unless K >= 2, rows has K·D finite entries.
  TextAnchors(std::size_t num_classes, std::size_t dim, std::vector<double> rows);

  std::size_t num_classes() const { return num_classes_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> row(std::size_t k) const {
    return std::span<const double>(rows_).subspan(k * dim_, dim_);
  }
  std::span<const double> values() const { return rows_; }

  /// Logits for one embedding (dot products, no softmax).
  std::vector<double> logits(std::span<const double> embedding) const;

 private:
  std::size_t num_classes_;
  std::size_t dim_;
  std::vector<double> rows_;
};

/// Uniform [−1, 1] anchors from SplitMix64(seed).
TextAnchors random_anchors(std::uint64_t seed, std::size_t num_classes, std::size_t dim);

/// Row q = encoder(step_q) · anchorsᵀ.
metrics::PathLogits clip_logits(const EncoderModel& encoder, const spectral::InterpolationPath& path,
                                const TextAnchors& anchors, std::size_t target_class);

/// Index of the largest logit; ties resolve to the lowest index.
std::size_t predict(const EncoderModel& encoder, const TextAnchors& anchors, const ImageTensor& x);

// ---------------------------------------------------------------------------
// Fixture encoders
// ---------------------------------------------------------------------------

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
};

/// Uniform [−1/√cols, 1/√cols] entries from SplitMix64(seed).
Matrix random_matrix(std::uint64_t seed, std::size_t rows, std::size_t cols);

/// embedding = W · vec(x); W is D × (C·H·W).
struct LinearFixture {
  InputShape shape;
  Matrix weight;
};

/// embedding = W · vec(LowPass(x)).
struct SmoothingFixture {
  InputShape shape;
  double cutoff = 1.0;
  Matrix weight;
  double stopband_gain = 1e-4;
};

/// conv3×3 → act → conv3×3 → act → dense(embed_dim).
struct TinyCnnFixture {
  InputShape shape;
  std::uint64_t seed = 0;
  ActivationConfig activation;
  std::size_t hidden_channels = 4;
  std::size_t embed_dim = 8;
};

/// dense(embed_dim) → pre-norm MLP block (relu) → final LayerNorm; both
/// LayerNorms start with the given γ_s.
struct TinyPrenormFixture {
  InputShape shape;
  std::uint64_t seed = 0;
  double gamma_s = 1.0;
  std::size_t embed_dim = 16;
  std::size_t hidden = 32;
};

using FixtureKind = std::variant<LinearFixture, SmoothingFixture, TinyCnnFixture, TinyPrenormFixture>;

/// Parameters are drawn uniform in [−1/√fan_in, 1/√fan_in] from one
/// SplitMix64(seed) stream, layer by layer, weights before biases.
EncoderModel fixture_encoder(const FixtureKind& kind);

// ---------------------------------------------------------------------------
// Persistence: <dir>/model.json plus one SBT1 file per parameter tensor.
// ---------------------------------------------------------------------------

void save_model(const EncoderModel& model, const std::filesystem::path& dir);
EncoderModel load_model(const std::filesystem::path& dir);

}  // namespace sbmeter::models
