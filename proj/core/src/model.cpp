#include "asr/model.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "asr/error.hpp"
#include "asr/rng.hpp"

namespace asr::model {
namespace {

using Span = std::span<double>;
using CSpan = std::span<const double>;

// out = W * in + b
void affine(const Matrix& w, const Matrix& b, CSpan in, Span out) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* wr = w.data.data() + r * w.cols;
    double acc = b.data[r];
    for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * in[c];
    out[r] = acc;
  }
}

// out += W * in
void matvec_add(const Matrix& w, CSpan in, Span out) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* wr = w.data.data() + r * w.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * in[c];
    out[r] += acc;
  }
}

// out += W^T * d
void matvec_t_add(const Matrix& w, CSpan d, Span out) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double dr = d[r];
    if (dr == 0.0) continue;
    const double* wr = w.data.data() + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) out[c] += wr[c] * dr;
  }
}

// gw += d (x) in ; gb += d
void outer_add(Matrix& gw, Matrix& gb, CSpan d, CSpan in) {
  for (std::size_t r = 0; r < gw.rows; ++r) {
    const double dr = d[r];
    gb.data[r] += dr;
    if (dr == 0.0) continue;
    double* gr = gw.data.data() + r * gw.cols;
    for (std::size_t c = 0; c < gw.cols; ++c) gr[c] += dr * in[c];
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clipped_relu(double z, double clip) { return std::min(std::max(z, 0.0), clip); }

void fill_mask(Matrix& mask, const DropoutKey& key, std::uint64_t layer) {
  rng::CounterStream stream(rng::key({key.key, layer}));
  const double keep_scale = 1.0 / (1.0 - key.rate);
  for (double& v : mask.data) v = stream.uniform() < key.rate ? 0.0 : keep_scale;
}

void dense_forward(const Matrix& w, const Matrix& b, double clip, const Matrix& in, Matrix& z, Matrix& h,
                   const Matrix* mask) {
  for (std::size_t t = 0; t < in.rows; ++t) {
    affine(w, b, in.row(t), z.row(t));
    auto zr = z.row(t);
    auto hr = h.row(t);
    for (std::size_t j = 0; j < hr.size(); ++j) {
      hr[j] = clipped_relu(zr[j], clip);
      if (mask) hr[j] *= (*mask)(t, j);
    }
  }
}

// Turns dL/dh into dL/dz in place for a clipped ReLU (with optional mask).
void dense_activation_backward(Span grad, CSpan z, double clip, const Matrix* mask, std::size_t t) {
  for (std::size_t j = 0; j < grad.size(); ++j) {
    const bool active = z[j] > 0.0 && z[j] < clip;
    double g = active ? grad[j] : 0.0;
    if (mask) g *= (*mask)(t, j);
    grad[j] = g;
  }
}

void uniform_fill(Matrix& m, rng::CounterStream& stream) {
  const double s = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
  for (double& v : m.data) v = stream.uniform(-s, s);
}

}  // namespace

void ModelConfig::validate() const {
  if (n_input < 1 || n_hidden < 1 || n_output < 2) {
    throw Error(Errc::InvalidConfig, "model dims must be >= 1 and n_output >= 2");
  }
  if (!(relu_clip > 0.0)) throw Error(Errc::InvalidConfig, "relu_clip must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::InvalidConfig, "dropout must lie in [0,1)");
}

std::array<Matrix*, ModelParams::kTensorCount> ModelParams::tensors() {
  return {&dense1_w, &dense1_b, &dense2_w, &dense2_b, &dense3_w, &dense3_b, &lstm_wx,
          &lstm_wh,  &lstm_b,   &dense5_w, &dense5_b, &output_w, &output_b};
}

std::array<const Matrix*, ModelParams::kTensorCount> ModelParams::tensors() const {
  return {&dense1_w, &dense1_b, &dense2_w, &dense2_b, &dense3_w, &dense3_b, &lstm_wx,
          &lstm_wh,  &lstm_b,   &dense5_w, &dense5_b, &output_w, &output_b};
}

const std::array<std::string_view, ModelParams::kTensorCount>& ModelParams::tensor_names() {
  static const std::array<std::string_view, kTensorCount> names = {
      "dense1.weight", "dense1.bias", "dense2.weight", "dense2.bias", "dense3.weight",
      "dense3.bias",   "lstm.input_weight", "lstm.recurrent_weight", "lstm.bias",
      "dense5.weight", "dense5.bias", "output.weight", "output.bias"};
  return names;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* m : tensors()) n += m->data.size();
  return n;
}

ModelParams zeros(const ModelConfig& cfg) {
  cfg.validate();
  const auto in = static_cast<std::size_t>(cfg.n_input);
  const auto h = static_cast<std::size_t>(cfg.n_hidden);
  const auto out = static_cast<std::size_t>(cfg.n_output);
  ModelParams p;
  p.dense1_w = Matrix(h, in);
  p.dense1_b = Matrix(h, 1);
  p.dense2_w = Matrix(h, h);
  p.dense2_b = Matrix(h, 1);
  p.dense3_w = Matrix(h, h);
  p.dense3_b = Matrix(h, 1);
  p.lstm_wx = Matrix(4 * h, h);
  p.lstm_wh = Matrix(4 * h, h);
  p.lstm_b = Matrix(4 * h, 1);
  p.dense5_w = Matrix(h, h);
  p.dense5_b = Matrix(h, 1);
  p.output_w = Matrix(out, h);
  p.output_b = Matrix(out, 1);
  return p;
}

ModelParams init_model(const ModelConfig& cfg) {
  ModelParams p = zeros(cfg);
  auto tensors = p.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Matrix& m = *tensors[i];
    if (m.cols == 1) continue;  // biases
    rng::CounterStream stream(rng::key({cfg.seed, i}));
    uniform_fill(m, stream);
  }
  const auto h = static_cast<std::size_t>(cfg.n_hidden);
  for (std::size_t j = h; j < 2 * h; ++j) p.lstm_b.data[j] = 1.0;
  return p;
}

std::size_t expected_parameter_count(const ModelConfig& cfg) {
  const auto in = static_cast<std::size_t>(cfg.n_input);
  const auto h = static_cast<std::size_t>(cfg.n_hidden);
  const auto out = static_cast<std::size_t>(cfg.n_output);
  return (h * in + h) + 2 * (h * h + h) + (8 * h * h + 4 * h) + (h * h + h) + (out * h + out);
}

void check_shapes(const ModelParams& params, const ModelConfig& cfg) {
  const ModelParams reference = zeros(cfg);
  const auto want = reference.tensors();
  const auto have = params.tensors();
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i]->rows != have[i]->rows || want[i]->cols != have[i]->cols) {
      throw Error(Errc::ShapeMismatch, std::string(ModelParams::tensor_names()[i]) + " is " +
                                           std::to_string(have[i]->rows) + "x" + std::to_string(have[i]->cols) +
                                           ", expected " + std::to_string(want[i]->rows) + "x" +
                                           std::to_string(want[i]->cols));
    }
  }
}

Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  for (std::size_t t = 0; t < logits.rows; ++t) {
    const auto row = logits.row(t);
    const double top = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - top);
    const double log_z = top + std::log(sum);
    auto o = out.row(t);
    for (std::size_t k = 0; k < row.size(); ++k) o[k] = row[k] - log_z;
  }
  return out;
}

ForwardResult forward(const ModelParams& params, const ModelConfig& cfg, const Matrix& feats,
                      std::optional<DropoutKey> dropout) {
  if (feats.cols != static_cast<std::size_t>(cfg.n_input)) {
    throw Error(Errc::ShapeMismatch, "feature width " + std::to_string(feats.cols) + " != n_input " +
                                         std::to_string(cfg.n_input));
  }
  check_shapes(params, cfg);
  const std::size_t frames = feats.rows;
  const auto h = static_cast<std::size_t>(cfg.n_hidden);
  const auto n_out = static_cast<std::size_t>(cfg.n_output);
  const double clip = cfg.relu_clip;

  ForwardResult result;
  ForwardCache& c = result.cache;
  c.input = feats;
  for (Matrix* m : {&c.z1, &c.h1, &c.z2, &c.h2, &c.z3, &c.h3, &c.gate_i, &c.gate_f, &c.gate_g, &c.gate_o, &c.cell,
                    &c.cell_tanh, &c.lstm_h, &c.z5, &c.h5}) {
    *m = Matrix(frames, h);
  }
  const bool use_dropout = dropout && dropout->rate > 0.0;
  if (use_dropout) {
    std::uint64_t layer = 0;
    for (Matrix* m : {&c.mask1, &c.mask2, &c.mask3, &c.mask5}) {
      *m = Matrix(frames, h);
      fill_mask(*m, *dropout, layer++);
    }
  }
  auto mask = [&](const Matrix& m) { return use_dropout ? &m : nullptr; };

  dense_forward(params.dense1_w, params.dense1_b, clip, feats, c.z1, c.h1, mask(c.mask1));
  dense_forward(params.dense2_w, params.dense2_b, clip, c.h1, c.z2, c.h2, mask(c.mask2));
  dense_forward(params.dense3_w, params.dense3_b, clip, c.h2, c.z3, c.h3, mask(c.mask3));

  std::vector<double> pre(4 * h);
  std::vector<double> h_prev(h, 0.0), c_prev(h, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    affine(params.lstm_wx, params.lstm_b, c.h3.row(t), pre);
    matvec_add(params.lstm_wh, h_prev, pre);
    auto gi = c.gate_i.row(t), gf = c.gate_f.row(t), gg = c.gate_g.row(t), go = c.gate_o.row(t);
    auto cell = c.cell.row(t), ct = c.cell_tanh.row(t), hl = c.lstm_h.row(t);
    for (std::size_t j = 0; j < h; ++j) {
      gi[j] = sigmoid(pre[j]);
      gf[j] = sigmoid(pre[h + j]);
      gg[j] = std::tanh(pre[2 * h + j]);
      go[j] = sigmoid(pre[3 * h + j]);
      cell[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
      ct[j] = std::tanh(cell[j]);
      hl[j] = go[j] * ct[j];
    }
    std::copy(hl.begin(), hl.end(), h_prev.begin());
    std::copy(cell.begin(), cell.end(), c_prev.begin());
  }

  dense_forward(params.dense5_w, params.dense5_b, clip, c.lstm_h, c.z5, c.h5, mask(c.mask5));

  result.logits = Matrix(frames, n_out);
  for (std::size_t t = 0; t < frames; ++t) affine(params.output_w, params.output_b, c.h5.row(t), result.logits.row(t));
  result.log_probs = log_softmax(result.logits);
  result.probs = Matrix(frames, n_out);
  for (std::size_t i = 0; i < result.probs.data.size(); ++i) result.probs.data[i] = std::exp(result.log_probs.data[i]);
  return result;
}

ModelParams backward(const ModelParams& params, const ModelConfig& cfg, const ForwardCache& c,
                     const Matrix& grad_logits) {
  check_shapes(params, cfg);
  const std::size_t frames = c.input.rows;
  const auto h = static_cast<std::size_t>(cfg.n_hidden);
  if (grad_logits.rows != frames || grad_logits.cols != static_cast<std::size_t>(cfg.n_output) ||
      c.h5.rows != frames) {
    throw Error(Errc::ShapeMismatch, "gradient does not match the forward cache");
  }
  const double clip = cfg.relu_clip;
  const bool use_dropout = !c.mask1.data.empty();
  auto mask = [&](const Matrix& m) { return use_dropout ? &m : nullptr; };

  ModelParams g = zeros(cfg);
  std::vector<double> d_h5(h), d_top(frames * h, 0.0);

  // Output and dense5 layers are per-frame.
  for (std::size_t t = 0; t < frames; ++t) {
    const auto dl = grad_logits.row(t);
    outer_add(g.output_w, g.output_b, dl, c.h5.row(t));
    std::fill(d_h5.begin(), d_h5.end(), 0.0);
    matvec_t_add(params.output_w, dl, d_h5);
    dense_activation_backward(d_h5, c.z5.row(t), clip, mask(c.mask5), t);
    outer_add(g.dense5_w, g.dense5_b, d_h5, c.lstm_h.row(t));
    matvec_t_add(params.dense5_w, d_h5, Span(d_top.data() + t * h, h));
  }

  // LSTM, right to left.
  Matrix d_h3(frames, h);
  std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0), da(4 * h), dh(h);
  const std::vector<double> zeros_h(h, 0.0);
  for (std::size_t step = frames; step-- > 0;) {
    const auto gi = c.gate_i.row(step), gf = c.gate_f.row(step), gg = c.gate_g.row(step), go = c.gate_o.row(step);
    const auto ct = c.cell_tanh.row(step);
    const CSpan c_prev = step == 0 ? CSpan(zeros_h) : c.cell.row(step - 1);
    const CSpan h_prev = step == 0 ? CSpan(zeros_h) : c.lstm_h.row(step - 1);
    for (std::size_t j = 0; j < h; ++j) {
      dh[j] = d_top[step * h + j] + dh_next[j];
      const double d_o = dh[j] * ct[j];
      const double dc = dh[j] * go[j] * (1.0 - ct[j] * ct[j]) + dc_next[j];
      const double d_i = dc * gg[j];
      const double d_g = dc * gi[j];
      const double d_f = dc * c_prev[j];
      dc_next[j] = dc * gf[j];
      da[j] = d_i * gi[j] * (1.0 - gi[j]);
      da[h + j] = d_f * gf[j] * (1.0 - gf[j]);
      da[2 * h + j] = d_g * (1.0 - gg[j] * gg[j]);
      da[3 * h + j] = d_o * go[j] * (1.0 - go[j]);
    }
    outer_add(g.lstm_wx, g.lstm_b, da, c.h3.row(step));
    for (std::size_t r = 0; r < 4 * h; ++r) {
      const double dr = da[r];
      if (dr == 0.0) continue;
      double* gr = g.lstm_wh.data.data() + r * h;
      for (std::size_t col = 0; col < h; ++col) gr[col] += dr * h_prev[col];
    }
    matvec_t_add(params.lstm_wx, da, d_h3.row(step));
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    matvec_t_add(params.lstm_wh, da, dh_next);
  }

  // Dense stack, per frame.
  std::vector<double> d2(h), d1(h);
  for (std::size_t t = 0; t < frames; ++t) {
    auto d3 = d_h3.row(t);
    dense_activation_backward(d3, c.z3.row(t), clip, mask(c.mask3), t);
    outer_add(g.dense3_w, g.dense3_b, d3, c.h2.row(t));
    std::fill(d2.begin(), d2.end(), 0.0);
    matvec_t_add(params.dense3_w, d3, d2);
    dense_activation_backward(d2, c.z2.row(t), clip, mask(c.mask2), t);
    outer_add(g.dense2_w, g.dense2_b, d2, c.h1.row(t));
    std::fill(d1.begin(), d1.end(), 0.0);
    matvec_t_add(params.dense2_w, d2, d1);
    dense_activation_backward(d1, c.z1.row(t), clip, mask(c.mask1), t);
    outer_add(g.dense1_w, g.dense1_b, d1, c.input.row(t));
  }
  return g;
}

}  // namespace asr::model
