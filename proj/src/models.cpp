#include "sbmeter/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

#include "json.hpp"
#include "sbmeter/containers.hpp"
#include "sbmeter/rng.hpp"

namespace sbmeter::models {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_beta(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw std::domain_error("beta must lie in (0, 1], got " + std::to_string(beta));
  }
}

// Intermediate activations: channels × height × width, flattened.
struct Feature {
  InputShape shape;
  std::vector<double> values;
};

InputShape flat(std::size_t n) { return {n, 1, 1}; }

std::string shape_str(InputShape s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

void check_dense(const Dense& d, std::size_t in, const std::string& where) {
  if (d.in != in) {
    throw std::invalid_argument(where + ": dense expects " + std::to_string(d.in) +
                                " inputs, gets " + std::to_string(in));
  }
  if (d.out == 0 || d.weight.size() != d.in * d.out) {
    throw std::invalid_argument(where + ": dense weight has wrong size");
  }
  if (!d.bias.empty() && d.bias.size() != d.out) {
    throw std::invalid_argument(where + ": dense bias has wrong size");
  }
}

void check_layernorm(const LayerNormConfig& cfg, std::size_t n, const std::string& where) {
  if (cfg.gamma.size() != n || cfg.shift.size() != n) {
    throw std::invalid_argument(where + ": layernorm expects " + std::to_string(cfg.gamma.size()) +
                                " features, gets " + std::to_string(n));
  }
  if (!(cfg.gamma_s > 0.0) || !(cfg.eps > 0.0)) {
    throw std::invalid_argument(where + ": layernorm needs gamma_s > 0 and eps > 0");
  }
}

void check_activation(const ActivationConfig& cfg) {
  if (cfg.kind == ActivationKind::betarelu) require_beta(cfg.beta);
}

InputShape infer(const Layer& layer, InputShape in, const std::string& where) {
  return std::visit(
      Overloaded{
          [&](const Dense& d) {
            check_dense(d, in.size(), where);
            return flat(d.out);
          },
          [&](const Conv2d& c) {
            if (c.in_channels != in.channels) {
              throw std::invalid_argument(where + ": conv expects " +
                                          std::to_string(c.in_channels) + " channels, gets " +
                                          shape_str(in));
            }
            if (c.kernel % 2 == 0 || c.out_channels == 0 ||
                c.weight.size() != c.out_channels * c.in_channels * c.kernel * c.kernel ||
                (!c.bias.empty() && c.bias.size() != c.out_channels)) {
              throw std::invalid_argument(where + ": malformed conv parameters");
            }
            return InputShape{c.out_channels, in.height, in.width};
          },
          [&](const Activation& a) {
            check_activation(a.config);
            return in;
          },
          [&](const LayerNorm& n) {
            check_layernorm(n.config, in.size(), where);
            return in;
          },
          [&](const LowPass& lp) {
            if (!(lp.cutoff > 0.0 && lp.cutoff <= 1.0) || !(lp.stopband_gain >= 0.0)) {
              throw std::invalid_argument(where + ": lowpass needs cutoff in (0, 1]");
            }
            if (in.height < 2 || in.width < 2) {
              throw std::invalid_argument(where + ": lowpass needs a spatial input, gets " +
                                          shape_str(in));
            }
            return in;
          },
          [&](const GlobalAvgPool&) { return InputShape{in.channels, 1, 1}; },
          [&](const PreNormMlpBlock& b) {
            check_layernorm(b.norm.config, in.size(), where + ".norm");
            check_dense(b.fc1, in.size(), where + ".fc1");
            check_activation(b.act.config);
            check_dense(b.fc2, b.fc1.out, where + ".fc2");
            if (b.fc2.out != in.size()) {
              throw std::invalid_argument(where + ": residual branch changes the width");
            }
            return flat(in.size());
          },
      },
      layer);
}

std::vector<double> dense_forward(const Dense& d, std::span<const double> x) {
  std::vector<double> y(d.out);
  for (std::size_t o = 0; o < d.out; ++o) {
    double acc = d.bias.empty() ? 0.0 : d.bias[o];
    const double* w = d.weight.data() + o * d.in;
    for (std::size_t i = 0; i < d.in; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
  return y;
}

Feature conv_forward(const Conv2d& c, const Feature& in) {
  const std::size_t h = in.shape.height;
  const std::size_t w = in.shape.width;
  const auto r = static_cast<std::ptrdiff_t>(c.kernel / 2);
  const auto k = static_cast<std::ptrdiff_t>(c.kernel);
  Feature out{{c.out_channels, h, w}, std::vector<double>(c.out_channels * h * w)};
  for (std::size_t o = 0; o < c.out_channels; ++o) {
    const double b = c.bias.empty() ? 0.0 : c.bias[o];
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        double acc = b;
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          const double* kw = c.weight.data() + (o * c.in_channels + ch) * c.kernel * c.kernel;
          for (std::ptrdiff_t di = 0; di < k; ++di) {
            const auto ii = static_cast<std::ptrdiff_t>(i) + di - r;
            if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::ptrdiff_t dj = 0; dj < k; ++dj) {
              const auto jj = static_cast<std::ptrdiff_t>(j) + dj - r;
              if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += kw[di * k + dj] * in.values[(ch * h + static_cast<std::size_t>(ii)) * w +
                                                 static_cast<std::size_t>(jj)];
            }
          }
        }
        out.values[(o * h + i) * w + j] = acc;
      }
    }
  }
  return out;
}

Feature lowpass_forward(const LowPass& lp, Feature in) {
  const std::size_t h = in.shape.height;
  const std::size_t w = in.shape.width;
  for (std::size_t c = 0; c < in.shape.channels; ++c) {
    auto first = in.values.begin() + static_cast<std::ptrdiff_t>(c * h * w);
    ndnum::Grid g(h, w, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(h * w)));
    auto spec = ndnum::dft2(g);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) spec(i, j) *= lp.response(ndnum::radial_distance(i, j, h, w));
    }
    const auto back = ndnum::idft2(spec);
    std::copy(back.values.begin(), back.values.end(), first);
  }
  return in;
}

void activate_all(const ActivationConfig& cfg, std::vector<double>& v) {
  for (double& x : v) x = activate(cfg, x);
}

Feature apply(const Layer& layer, Feature in) {
  return std::visit(
      Overloaded{
          [&](const Dense& d) {
            auto y = dense_forward(d, in.values);
            return Feature{flat(d.out), std::move(y)};
          },
          [&](const Conv2d& c) { return conv_forward(c, in); },
          [&](const Activation& a) {
            activate_all(a.config, in.values);
            return std::move(in);
          },
          [&](const LayerNorm& n) {
            in.values = layernorm_scaled(in.values, n.config);
            return std::move(in);
          },
          [&](const LowPass& lp) { return lowpass_forward(lp, std::move(in)); },
          [&](const GlobalAvgPool&) {
            const std::size_t hw = in.shape.height * in.shape.width;
            Feature out{{in.shape.channels, 1, 1}, std::vector<double>(in.shape.channels)};
            for (std::size_t c = 0; c < in.shape.channels; ++c) {
              double s = 0.0;
              for (std::size_t k = 0; k < hw; ++k) s += in.values[c * hw + k];
              out.values[c] = s / static_cast<double>(hw);
            }
            return out;
          },
          [&](const PreNormMlpBlock& b) {
            auto hidden = dense_forward(b.fc1, layernorm_scaled(in.values, b.norm.config));
            activate_all(b.act.config, hidden);
            const auto branch = dense_forward(b.fc2, hidden);
            Feature out{flat(in.values.size()), std::move(in.values)};
            for (std::size_t k = 0; k < branch.size(); ++k) out.values[k] += branch[k];
            return out;
          },
      },
      layer);
}

std::string site(std::size_t index, const char* sub = nullptr) {
  std::string s = "layers[" + std::to_string(index) + "]";
  if (sub != nullptr) s += std::string(".") + sub;
  return s;
}

// Applies `edit` to every activation / layernorm / lowpass in the stack,
// including those nested in blocks. Returns the number of sites touched.
template <class Edit>
std::size_t edit_sites(std::vector<Layer>& layers, Edit&& edit) {
  std::size_t touched = 0;
  for (auto& layer : layers) {
    std::visit(
        [&](auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, PreNormMlpBlock>) {
            if constexpr (std::is_invocable_v<Edit&, LayerNorm&>) {
              edit(l.norm);
              ++touched;
            }
            if constexpr (std::is_invocable_v<Edit&, Activation&>) {
              edit(l.act);
              ++touched;
            }
          } else if constexpr (std::is_invocable_v<Edit&, T&>) {
            edit(l);
            ++touched;
          }
        },
        layer);
  }
  return touched;
}

std::string list_or_none(const std::vector<std::string>& names) {
  if (names.empty()) return "none";
  std::string s;
  for (const auto& n : names) s += (s.empty() ? "" : ", ") + n;
  return s;
}

std::string sites_summary(const EncoderModel& m) {
  return "activation sites: " + list_or_none(m.activation_sites()) +
         "; layernorm sites: " + list_or_none(m.layernorm_sites()) +
         "; lowpass sites: " + list_or_none(m.lowpass_sites());
}

std::vector<double> uniform_block(SplitMix64& rng, std::size_t count, double bound) {
  std::vector<double> v(count);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return v;
}

Dense random_dense(SplitMix64& rng, std::size_t in, std::size_t out) {
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  Dense d{in, out, {}, {}};
  d.weight = uniform_block(rng, in * out, s);
  d.bias = uniform_block(rng, out, s);
  return d;
}

Conv2d random_conv(SplitMix64& rng, std::size_t in, std::size_t out, std::size_t k) {
  const double s = 1.0 / std::sqrt(static_cast<double>(in * k * k));
  Conv2d c{in, out, k, {}, {}};
  c.weight = uniform_block(rng, out * in * k * k, s);
  c.bias = uniform_block(rng, out, s);
  return c;
}

void require_shape(InputShape s) {
  if (s.channels == 0 || s.height == 0 || s.width == 0) {
    throw std::invalid_argument("fixture: input shape must be non-empty, got " + shape_str(s));
  }
}

Dense dense_from(const Matrix& m, InputShape shape) {
  require_shape(shape);
  if (m.rows == 0 || m.cols != shape.size() || m.values.size() != m.rows * m.cols) {
    throw std::invalid_argument("fixture: weight must be D × " + std::to_string(shape.size()));
  }
  return Dense{m.cols, m.rows, m.values, {}};
}

}  // namespace

// ---------------------------------------------------------------------------

double beta_relu(double x, double beta) {
  require_beta(beta);
  if (beta == 1.0) return relu(x);
  const double s = 1.0 - beta;
  const double t = x / s;  // may overflow to ±inf; every use below tolerates that
  // softplus(t)·s = x + s·log1p(e^{−t}) for x > 0, s·log1p(e^{t}) otherwise.
  const double smooth = x > 0.0 ? x + s * std::log1p(std::exp(-t)) : s * std::log1p(std::exp(t));
  return 0.5 * logistic(beta * t) * x + 0.5 * smooth;
}

double activate(const ActivationConfig& cfg, double x) {
  return cfg.kind == ActivationKind::relu ? relu(x) : beta_relu(x, cfg.beta);
}

LayerNormConfig LayerNormConfig::identity(std::size_t n, double gamma_s, double eps) {
  return LayerNormConfig{std::vector<double>(n, 1.0), std::vector<double>(n, 0.0), gamma_s, eps};
}

std::vector<double> layernorm_scaled(std::span<const double> x, const LayerNormConfig& cfg) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("layernorm_scaled: empty vector");
  if (cfg.gamma.size() != n || cfg.shift.size() != n) {
    throw std::invalid_argument("layernorm_scaled: gamma/shift length mismatch");
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + cfg.eps);
  std::vector<double> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    y[k] = (x[k] - mean) * inv * (cfg.gamma[k] * cfg.gamma_s) + cfg.shift[k];
  }
  return y;
}

double LowPass::response(double rho) const {
  if (cutoff >= 1.0 || rho < cutoff) return 1.0;
  const double r = cutoff / rho;
  return stopband_gain * r * r;
}

// ---------------------------------------------------------------------------

EncoderModel::EncoderModel(std::string name, InputShape input, std::vector<Layer> layers)
    : name_(std::move(name)), input_(input), layers_(std::move(layers)) {
  if (input_.size() == 0) throw std::invalid_argument("EncoderModel: empty input shape");
  InputShape s = input_;
  for (std::size_t k = 0; k < layers_.size(); ++k) s = infer(layers_[k], s, site(k));
  output_dim_ = s.size();
}

std::vector<double> EncoderModel::forward(const ImageTensor& x) const {
  const InputShape got{x.channels(), x.height(), x.width()};
  if (!(got == input_)) {
    throw std::invalid_argument("EncoderModel '" + name_ + "': expects " + shape_str(input_) +
                                " input, got " + shape_str(got));
  }
  Feature f{input_, std::vector<double>(x.data().begin(), x.data().end())};
  for (const auto& layer : layers_) f = apply(layer, std::move(f));
  return std::move(f.values);
}

std::vector<std::vector<double>> EncoderModel::forward_batch(std::span<const ImageTensor> xs) const {
  std::vector<std::vector<double>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(forward(x));
  return out;
}

std::vector<std::string> EncoderModel::activation_sites() const {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (std::holds_alternative<Activation>(layers_[k])) names.push_back(site(k));
    if (std::holds_alternative<PreNormMlpBlock>(layers_[k])) names.push_back(site(k, "act"));
  }
  return names;
}

std::vector<std::string> EncoderModel::layernorm_sites() const {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (std::holds_alternative<LayerNorm>(layers_[k])) names.push_back(site(k));
    if (std::holds_alternative<PreNormMlpBlock>(layers_[k])) names.push_back(site(k, "norm"));
  }
  return names;
}

std::vector<std::string> EncoderModel::lowpass_sites() const {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (std::holds_alternative<LowPass>(layers_[k])) names.push_back(site(k));
  }
  return names;
}

std::size_t EncoderModel::parameter_count() const {
  auto dense = [](const Dense& d) { return d.weight.size() + d.bias.size(); };
  auto norm = [](const LayerNorm& n) { return n.config.gamma.size() + n.config.shift.size(); };
  std::size_t total = 0;
  for (const auto& layer : layers_) {
    total += std::visit(Overloaded{
                            [&](const Dense& d) { return dense(d); },
                            [](const Conv2d& c) { return c.weight.size() + c.bias.size(); },
                            [&](const LayerNorm& n) { return norm(n); },
                            [&](const PreNormMlpBlock& b) {
                              return norm(b.norm) + dense(b.fc1) + dense(b.fc2);
                            },
                            [](const auto&) { return std::size_t{0}; },
                        },
                        layer);
  }
  return total;
}

// ---------------------------------------------------------------------------

SurgeryResult swap_activations(const EncoderModel& model, double beta) {
  require_beta(beta);
  auto layers = model.layers();
  const auto touched = edit_sites(layers, [&](Activation& a) {
    a.config = {ActivationKind::betarelu, beta};
  });
  SurgeryResult r{EncoderModel(model.name(), model.input_shape(), std::move(layers)), std::nullopt};
  if (touched == 0) {
    r.warning = "swap_activations: model '" + model.name() + "' has no activation sites (" +
                sites_summary(model) + "); no-op";
  }
  return r;
}

SurgeryResult scale_layernorms(const EncoderModel& model, double gamma_s) {
  if (!(gamma_s > 0.0) || !std::isfinite(gamma_s)) {
    throw std::domain_error("gamma_s must be a positive finite value");
  }
  auto layers = model.layers();
  const auto touched = edit_sites(layers, [&](LayerNorm& n) { n.config.gamma_s *= gamma_s; });
  SurgeryResult r{EncoderModel(model.name(), model.input_shape(), std::move(layers)), std::nullopt};
  if (touched == 0) {
    r.warning = "scale_layernorms: model '" + model.name() + "' has no layernorm sites (" +
                sites_summary(model) + "); no-op";
  }
  return r;
}

SurgeryResult set_lowpass_cutoff(const EncoderModel& model, double cutoff) {
  if (!(cutoff > 0.0 && cutoff <= 1.0)) throw std::domain_error("cutoff must lie in (0, 1]");
  auto layers = model.layers();
  const auto touched = edit_sites(layers, [&](LowPass& lp) { lp.cutoff = cutoff; });
  SurgeryResult r{EncoderModel(model.name(), model.input_shape(), std::move(layers)), std::nullopt};
  if (touched == 0) {
    r.warning = "set_lowpass_cutoff: model '" + model.name() + "' has no lowpass sites (" +
                sites_summary(model) + "); no-op";
  }
  return r;
}

// ---------------------------------------------------------------------------

TextAnchors::TextAnchors(std::size_t num_classes, std::size_t dim, std::vector<double> rows)
    : num_classes_(num_classes), dim_(dim), rows_(std::move(rows)) {
  if (num_classes_ < 2) throw std::invalid_argument("TextAnchors: need at least 2 classes");
  if (dim_ == 0 || rows_.size() != num_classes_ * dim_) {
    throw std::invalid_argument("TextAnchors: rows must hold K·D values");
  }
  for (double v : rows_) {
    if (!std::isfinite(v)) throw std::invalid_argument("TextAnchors: non-finite entry");
  }
}

std::vector<double> TextAnchors::logits(std::span<const double> embedding) const {
  if (embedding.size() != dim_) {
    throw std::invalid_argument("embedding dimension " + std::to_string(embedding.size()) +
                                " does not match anchor dimension " + std::to_string(dim_));
  }
  std::vector<double> z(num_classes_);
  for (std::size_t k = 0; k < num_classes_; ++k) {
    const auto r = row(k);
    double acc = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) acc += embedding[d] * r[d];
    z[k] = acc;
  }
  return z;
}

TextAnchors random_anchors(std::uint64_t seed, std::size_t num_classes, std::size_t dim) {
  SplitMix64 rng(seed);
  return TextAnchors(num_classes, dim, uniform_block(rng, num_classes * dim, 1.0));
}

metrics::PathLogits clip_logits(const EncoderModel& encoder, const spectral::InterpolationPath& path,
                                const TextAnchors& anchors, std::size_t target_class) {
  if (encoder.output_dim() != anchors.dim()) {
    throw std::invalid_argument("clip_logits: encoder dimension " +
                                std::to_string(encoder.output_dim()) +
                                " does not match anchor dimension " + std::to_string(anchors.dim()));
  }
  if (target_class >= anchors.num_classes()) {
    throw std::invalid_argument("clip_logits: target class out of range");
  }
  metrics::PathLogits out;
  out.x1_id = path.pair.x1;
  out.x2_id = path.pair.x2;
  out.band = path.band.value_or("full");
  out.target_class = target_class;
  out.norm_distance = path.endpoint_distance;
  out.num_classes = anchors.num_classes();
  out.lambdas.reserve(path.steps.size());
  out.logits.reserve(path.steps.size() * anchors.num_classes());
  for (const auto& step : path.steps) {
    out.lambdas.push_back(step.lambda);
    const auto z = anchors.logits(encoder.forward(step.image));
    out.logits.insert(out.logits.end(), z.begin(), z.end());
  }
  return out;
}

std::size_t predict(const EncoderModel& encoder, const TextAnchors& anchors, const ImageTensor& x) {
  const auto z = anchors.logits(encoder.forward(x));
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

// ---------------------------------------------------------------------------

Matrix random_matrix(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("random_matrix: empty shape");
  SplitMix64 rng(seed);
  return Matrix{rows, cols, uniform_block(rng, rows * cols, 1.0 / std::sqrt(static_cast<double>(cols)))};
}

EncoderModel fixture_encoder(const FixtureKind& kind) {
  return std::visit(
      Overloaded{
          [](const LinearFixture& f) {
            return EncoderModel("linear", f.shape, {dense_from(f.weight, f.shape)});
          },
          [](const SmoothingFixture& f) {
            auto readout = dense_from(f.weight, f.shape);
            return EncoderModel("smoothing", f.shape,
                                {LowPass{f.cutoff, f.stopband_gain}, std::move(readout)});
          },
          [](const TinyCnnFixture& f) {
            require_shape(f.shape);
            if (f.hidden_channels == 0 || f.embed_dim == 0) {
              throw std::invalid_argument("tiny_cnn: widths must be positive");
            }
            check_activation(f.activation);
            SplitMix64 rng(f.seed);
            std::vector<Layer> layers;
            layers.emplace_back(random_conv(rng, f.shape.channels, f.hidden_channels, 3));
            layers.emplace_back(Activation{f.activation});
            layers.emplace_back(random_conv(rng, f.hidden_channels, f.hidden_channels, 3));
            layers.emplace_back(Activation{f.activation});
            layers.emplace_back(random_dense(
                rng, f.hidden_channels * f.shape.height * f.shape.width, f.embed_dim));
            return EncoderModel("tiny_cnn", f.shape, std::move(layers));
          },
          [](const TinyPrenormFixture& f) {
            require_shape(f.shape);
            if (f.embed_dim == 0 || f.hidden == 0) {
              throw std::invalid_argument("tiny_prenorm_block: widths must be positive");
            }
            if (!(f.gamma_s > 0.0)) throw std::invalid_argument("tiny_prenorm_block: gamma_s <= 0");
            SplitMix64 rng(f.seed);
            std::vector<Layer> layers;
            layers.emplace_back(random_dense(rng, f.shape.size(), f.embed_dim));
            PreNormMlpBlock block;
            block.norm = LayerNorm{LayerNormConfig::identity(f.embed_dim, f.gamma_s)};
            block.fc1 = random_dense(rng, f.embed_dim, f.hidden);
            block.act = Activation{};
            block.fc2 = random_dense(rng, f.hidden, f.embed_dim);
            layers.emplace_back(std::move(block));
            layers.emplace_back(LayerNorm{LayerNormConfig::identity(f.embed_dim, f.gamma_s)});
            return EncoderModel("tiny_prenorm_block", f.shape, std::move(layers));
          },
      },
      kind);
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

class ParamWriter {
 public:
  explicit ParamWriter(fs::path dir) : dir_(std::move(dir)) {}

  json vec(const std::string& stem, const std::vector<double>& v) {
    if (v.empty()) return nullptr;
    const std::string file = stem + ".sbt";
    io::save_tensor(dir_ / file, io::Tensor{{static_cast<std::uint32_t>(v.size())}, v, io::DType::f64});
    return file;
  }

 private:
  fs::path dir_;
};

std::vector<double> read_vec(const fs::path& dir, const json& ref) {
  if (ref.is_null()) return {};
  return io::load_tensor(dir / ref.get<std::string>()).values;
}

json activation_json(const Activation& a) {
  return {{"kind", a.config.kind == ActivationKind::relu ? "relu" : "betarelu"},
          {"beta", a.config.beta}};
}

Activation activation_from(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "relu" && kind != "betarelu") throw std::invalid_argument("unknown activation " + kind);
  return Activation{{kind == "relu" ? ActivationKind::relu : ActivationKind::betarelu,
                     j.at("beta").get<double>()}};
}

json dense_json(ParamWriter& w, const std::string& stem, const Dense& d) {
  return {{"in", d.in}, {"out", d.out}, {"weight", w.vec(stem + ".weight", d.weight)},
          {"bias", w.vec(stem + ".bias", d.bias)}};
}

Dense dense_from_json(const fs::path& dir, const json& j) {
  return Dense{j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>(),
               read_vec(dir, j.at("weight")), read_vec(dir, j.at("bias"))};
}

json norm_json(ParamWriter& w, const std::string& stem, const LayerNorm& n) {
  return {{"gamma", w.vec(stem + ".gamma", n.config.gamma)},
          {"shift", w.vec(stem + ".shift", n.config.shift)},
          {"gamma_s", n.config.gamma_s},
          {"eps", n.config.eps}};
}

LayerNorm norm_from_json(const fs::path& dir, const json& j) {
  return LayerNorm{{read_vec(dir, j.at("gamma")), read_vec(dir, j.at("shift")),
                    j.at("gamma_s").get<double>(), j.at("eps").get<double>()}};
}

}  // namespace

void save_model(const EncoderModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  ParamWriter w(dir);
  json layers = json::array();
  for (std::size_t k = 0; k < model.layers().size(); ++k) {
    const std::string stem = "layer" + std::to_string(k);
    layers.push_back(std::visit(
        Overloaded{
            [&](const Dense& d) {
              json j = dense_json(w, stem, d);
              j["type"] = "dense";
              return j;
            },
            [&](const Conv2d& c) {
              return json{{"type", "conv2d"},
                          {"in_channels", c.in_channels},
                          {"out_channels", c.out_channels},
                          {"kernel", c.kernel},
                          {"weight", w.vec(stem + ".weight", c.weight)},
                          {"bias", w.vec(stem + ".bias", c.bias)}};
            },
            [&](const Activation& a) {
              json j = activation_json(a);
              j["type"] = "activation";
              return j;
            },
            [&](const LayerNorm& n) {
              json j = norm_json(w, stem, n);
              j["type"] = "layernorm";
              return j;
            },
            [&](const LowPass& lp) {
              return json{{"type", "lowpass"}, {"cutoff", lp.cutoff}, {"stopband_gain", lp.stopband_gain}};
            },
            [&](const GlobalAvgPool&) { return json{{"type", "global_avg_pool"}}; },
            [&](const PreNormMlpBlock& b) {
              return json{{"type", "prenorm_mlp"},
                          {"norm", norm_json(w, stem + ".norm", b.norm)},
                          {"fc1", dense_json(w, stem + ".fc1", b.fc1)},
                          {"act", activation_json(b.act)},
                          {"fc2", dense_json(w, stem + ".fc2", b.fc2)}};
            },
        },
        model.layers()[k]));
  }
  const auto in = model.input_shape();
  json manifest{{"format", "sbmeter-model-1"},
                {"name", model.name()},
                {"input", {in.channels, in.height, in.width}},
                {"layers", layers}};
  std::ofstream out(dir / "model.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + (dir / "model.json").string());
}

EncoderModel load_model(const fs::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "model.json").string());
  const json manifest = json::parse(in);
  if (manifest.value("format", "") != "sbmeter-model-1") {
    throw std::invalid_argument("unrecognized model manifest format");
  }
  const auto& shape = manifest.at("input");
  InputShape input{shape.at(0).get<std::size_t>(), shape.at(1).get<std::size_t>(),
                   shape.at(2).get<std::size_t>()};
  std::vector<Layer> layers;
  for (const auto& j : manifest.at("layers")) {
    const auto type = j.at("type").get<std::string>();
    if (type == "dense") {
      layers.emplace_back(dense_from_json(dir, j));
    } else if (type == "conv2d") {
      layers.emplace_back(Conv2d{j.at("in_channels").get<std::size_t>(),
                                 j.at("out_channels").get<std::size_t>(),
                                 j.at("kernel").get<std::size_t>(), read_vec(dir, j.at("weight")),
                                 read_vec(dir, j.at("bias"))});
    } else if (type == "activation") {
      layers.emplace_back(activation_from(j));
    } else if (type == "layernorm") {
      layers.emplace_back(norm_from_json(dir, j));
    } else if (type == "lowpass") {
      layers.emplace_back(LowPass{j.at("cutoff").get<double>(), j.at("stopband_gain").get<double>()});
    } else if (type == "global_avg_pool") {
      layers.emplace_back(GlobalAvgPool{});
    } else if (type == "prenorm_mlp") {
      layers.emplace_back(PreNormMlpBlock{norm_from_json(dir, j.at("norm")),
                                          dense_from_json(dir, j.at("fc1")),
                                          activation_from(j.at("act")),
                                          dense_from_json(dir, j.at("fc2"))});
    } else {
      throw std::invalid_argument("unknown layer type '" + type + "'");
    }
  }
  return EncoderModel(manifest.at("name").get<std::string>(), input, std::move(layers));
}

}  // namespace sbmeter::models
