#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gesture/core.hpp"
#include "gesture/nn/activation.hpp"
#include "gesture/rng.hpp"

namespace gesture::nn {

struct LstmLayerSpec {
  int hidden = 0;
  /// Elementwise activation on the concatenated forward/backward output.
  Activation post = Activation::identity;
  /// Inverted-dropout probability on this layer's output (the next layer's input).
  double dropout = 0.0;

  bool operator==(const LstmLayerSpec&) const = default;
};

struct LstmStackSpec {
  int input = 0;
  std::vector<LstmLayerSpec> layers;
  int output = kNumClasses;
  double leaky_slope = 0.01;

  bool operator==(const LstmStackSpec&) const = default;

  void validate() const {
    if (input < 1) fail(ErrorCategory::config, "LSTM input width must be positive");
    if (layers.empty()) fail(ErrorCategory::config, "LSTM stack needs at least one layer");
    for (const auto& l : layers) {
      if (l.hidden < 1) fail(ErrorCategory::config, "LSTM layer sizes must be positive");
      if (!(l.dropout >= 0.0 && l.dropout < 1.0))
        fail(ErrorCategory::config, "dropout probability must be in [0, 1)");
      if (l.post != Activation::identity && l.post != Activation::leaky_relu &&
          l.post != Activation::tanh)
        fail(ErrorCategory::config, "LSTM post activation must be identity, leaky_relu or tanh");
    }
    if (output != kNumClasses)
      fail(ErrorCategory::config, "final dense layer must have 21 units");
  }

  /// Per layer: fwd.Wx fwd.Wh fwd.b bwd.Wx bwd.Wh bwd.b; then dense.W dense.b.
  /// Gate rows are ordered input, forget, candidate, output.
  ParamLayout layout() const {
    ParamLayout l;
    Eigen::Index offset = 0;
    auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
      l.push_back({std::move(name), offset, rows, cols});
      offset += rows * cols;
    };
    int in = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const int h = layers[i].hidden;
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string tag = "lstm" + std::to_string(i) + "." + dir;
        add(tag + ".Wx", 4 * h, in);
        add(tag + ".Wh", 4 * h, h);
        add(tag + ".b", 4 * h, 1);
      }
      in = 2 * h;
    }
    add("dense.W", output, in);
    add("dense.b", output, 1);
    return l;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    Eigen::Index in = input;
    for (const auto& l : layers) {
      n += 2 * 4 * static_cast<Eigen::Index>(l.hidden) * (in + l.hidden + 1);
      in = 2 * l.hidden;
    }
    return n + static_cast<Eigen::Index>(output) * (in + 1);
  }
};

/// Inverted-dropout multipliers: 0 with probability p, else 1 / (1 - p).
inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < p ? 0.0 : keep;
  return mask;
}

/// Equal-length sequences packed step-major: column `t * batch + b` holds
/// step t of sequence b.
struct SequenceBatch {
  Matrix data;
  int steps = 0;
  int batch = 0;

  static SequenceBatch single(const Matrix& frames) {
    return {frames, static_cast<int>(frames.cols()), 1};
  }

  static SequenceBatch pack(std::span<const Matrix* const> sequences) {
    SequenceBatch out;
    if (sequences.empty()) return out;
    out.batch = static_cast<int>(sequences.size());
    out.steps = static_cast<int>(sequences[0]->cols());
    out.data.resize(sequences[0]->rows(), static_cast<Eigen::Index>(out.steps) * out.batch);
    for (int b = 0; b < out.batch; ++b) {
      if (sequences[b]->cols() != out.steps || sequences[b]->rows() != out.data.rows())
        fail(ErrorCategory::mismatch, "sequences in a batch must share shape");
      for (int t = 0; t < out.steps; ++t)
        out.data.col(static_cast<Eigen::Index>(t) * out.batch + b) = sequences[b]->col(t);
    }
    return out;
  }
};

class BiLstm {
 public:
  BiLstm() = default;

  explicit BiLstm(LstmStackSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    layout_ = spec_.layout();
    params_ = Vector::Zero(spec_.parameter_count());
  }

  const LstmStackSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  const Vector& parameters() const { return params_; }
  Vector& parameters() { return params_; }

  void set_parameters(const Vector& p) {
    if (p.size() != params_.size())
      fail(ErrorCategory::mismatch, "parameter vector has " + std::to_string(p.size()) +
                                        " entries, expected " + std::to_string(params_.size()));
    params_ = p;
  }

  /// Fan-scaled uniform matrices; forget-gate bias 1, other biases 0.
  void initialize(Rng& rng) {
    params_.setZero();
    std::size_t k = 0;
    for (const auto& l : spec_.layers) {
      for (int dir = 0; dir < 2; ++dir) {
        const ParamBlock& wx = layout_[k++];
        const ParamBlock& wh = layout_[k++];
        const ParamBlock& b = layout_[k++];
        init_uniform(view(params_, wx), wx.cols, wx.rows, rng);
        init_uniform(view(params_, wh), wh.cols, wh.rows, rng);
        view(params_, b).middleRows(l.hidden, l.hidden).setOnes();
      }
    }
    const ParamBlock& w = layout_[k];
    init_uniform(view(params_, w), w.cols, w.rows, rng);
  }

  /// Class probabilities (output x steps*batch). Dropout masks are drawn
  /// from `dropout_rng` when it is non-null (training mode).
  Matrix forward(const SequenceBatch& x, Rng* dropout_rng = nullptr) const {
    return run(params_, x, dropout_rng, nullptr);
  }

  Matrix forward(const Vector& params, const SequenceBatch& x, Rng* dropout_rng = nullptr) const {
    return run(params, x, dropout_rng, nullptr);
  }

  /// Probabilities for one sequence given as (input x frames).
  Matrix predict(const Matrix& frames) const { return forward(SequenceBatch::single(frames)); }

  /// Mean per-frame categorical cross-entropy and its full BPTT gradient.
  /// `targets` follows the column order of `x.data`.
  double gradient(const SequenceBatch& x, std::span<const int> targets, Vector& grad,
                  Rng* dropout_rng = nullptr) const {
    return gradient(params_, x, targets, grad, dropout_rng);
  }

  double gradient(const Vector& params, const SequenceBatch& x, std::span<const int> targets,
                  Vector& grad, Rng* dropout_rng = nullptr) const {
    if (static_cast<Eigen::Index>(targets.size()) != x.data.cols())
      fail(ErrorCategory::mismatch, "target count does not match sequence length");
    Cache cache;
    const Matrix probs = run(params, x, dropout_rng, &cache);
    const Eigen::Index n = probs.cols();

    double total = 0.0;
    Matrix delta = probs;
    for (Eigen::Index c = 0; c < n; ++c) {
      const int y = targets[c];
      if (y < 0 || y >= spec_.output) fail(ErrorCategory::mismatch, "target class out of range");
      const double loss = -std::log(std::max(probs(y, c), 1e-300));
      if (!std::isfinite(loss))
        fail(ErrorCategory::numeric, "non-finite loss at frame " + std::to_string(c));
      total += loss;
      delta(y, c) -= 1.0;
    }
    delta /= static_cast<double>(n);

    grad.setZero(params.size());
    const std::size_t n_layers = spec_.layers.size();
    const ParamBlock& dense_w = layout_[6 * n_layers];
    const ParamBlock& dense_b = layout_[6 * n_layers + 1];
    view(grad, dense_w).noalias() = delta * cache.layer_out.back().transpose();
    view(grad, dense_b).col(0) = delta.rowwise().sum();
    Matrix d_out = view(params, dense_w).transpose() * delta;

    for (std::size_t li = n_layers; li-- > 0;) {
      const LayerCache& lc = cache.layers[li];
      const LstmLayerSpec& ls = spec_.layers[li];
      // d_out is the gradient at this layer's (post-dropout) output.
      if (lc.mask.size()) d_out = d_out.cwiseProduct(lc.mask);
      Matrix d_concat =
          ls.post == Activation::identity
              ? d_out
              : Matrix(d_out.cwiseProduct(
                    activation_derivative(ls.post, lc.concat, lc.post_out, spec_.leaky_slope)));
      // The network input needs no gradient.
      Matrix d_in = li > 0 ? Matrix::Zero(lc.input.rows(), lc.input.cols()) : Matrix();
      for (int dir = 0; dir < 2; ++dir)
        backward_direction(params, grad, li, dir, lc, x,
                           d_concat.middleRows(dir * ls.hidden, ls.hidden), li > 0 ? &d_in : nullptr);
      d_out = std::move(d_in);
    }
    return total / static_cast<double>(n);
  }

 private:
  struct DirectionCache {
    Matrix gates;  // activated i, f, g, o (4H x steps*batch)
    Matrix cell;   // H x steps*batch
    Matrix hidden;
  };

  struct LayerCache {
    Matrix input;     // layer input as seen by the gates
    Matrix concat;    // [h_fwd; h_bwd] before the post activation
    Matrix post_out;  // after the post activation, before dropout
    Matrix mask;      // inverted-dropout multipliers (empty when unused)
    DirectionCache dir[2];
  };

  struct Cache {
    std::vector<LayerCache> layers;
    std::vector<Matrix> layer_out;  // post-dropout output per layer
  };

  Matrix run(const Vector& params, const SequenceBatch& x, Rng* dropout_rng, Cache* cache) const {
    if (x.data.rows() != spec_.input)
      fail(ErrorCategory::mismatch, "input width " + std::to_string(x.data.rows()) +
                                        " does not match network input " +
                                        std::to_string(spec_.input));
    if (x.data.cols() != static_cast<Eigen::Index>(x.steps) * x.batch)
      fail(ErrorCategory::mismatch, "sequence batch shape is inconsistent");
    if (cache) cache->layers.resize(spec_.layers.size());

    Matrix in = x.data;
    for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
      const LstmLayerSpec& ls = spec_.layers[li];
      Matrix concat(2 * ls.hidden, in.cols());
      for (int dir = 0; dir < 2; ++dir) {
        DirectionCache dc;
        forward_direction(params, li, dir, in, x.steps, x.batch, dc);
        concat.middleRows(dir * ls.hidden, ls.hidden) = dc.hidden;
        if (cache) cache->layers[li].dir[dir] = std::move(dc);
      }
      Matrix out = activate(ls.post, concat, spec_.leaky_slope);
      Matrix mask;
      if (dropout_rng && ls.dropout > 0.0)
        mask = dropout_mask(out.rows(), out.cols(), ls.dropout, *dropout_rng);
      if (cache) {
        LayerCache& lc = cache->layers[li];
        lc.input = std::move(in);
        lc.concat = std::move(concat);
        lc.post_out = out;
        lc.mask = mask;
      }
      in = mask.size() ? Matrix(out.cwiseProduct(mask)) : std::move(out);
      if (cache) cache->layer_out.push_back(in);
    }
    const std::size_t k = 6 * spec_.layers.size();
    Matrix z = view(params, layout_[k]) * in;
    z.colwise() += view(params, layout_[k + 1]).col(0);
    return softmax_columns(z);
  }

  void forward_direction(const Vector& params, std::size_t li, int dir, const Matrix& in,
                         int steps, int batch, DirectionCache& dc) const {
    const int h = spec_.layers[li].hidden;
    const std::size_t k = 6 * li + 3 * dir;
    const auto wx = view(params, layout_[k]);
    const auto wh = view(params, layout_[k + 1]);
    const auto b = view(params, layout_[k + 2]);

    Matrix zx = wx * in;
    zx.colwise() += b.col(0);
    dc.gates.resize(4 * h, in.cols());
    dc.cell.resize(h, in.cols());
    dc.hidden.resize(h, in.cols());
    Matrix h_prev = Matrix::Zero(h, batch);
    Matrix c_prev = Matrix::Zero(h, batch);
    for (int s = 0; s < steps; ++s) {
      const int t = dir == 0 ? s : steps - 1 - s;
      const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
      Matrix z = zx.middleCols(col, batch);
      z.noalias() += wh * h_prev;
      auto g = dc.gates.middleCols(col, batch);
      g.topRows(2 * h) = z.topRows(2 * h).unaryExpr([](double v) { return sigmoid(v); });
      g.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh();
      g.bottomRows(h) = z.bottomRows(h).unaryExpr([](double v) { return sigmoid(v); });
      c_prev = g.middleRows(h, h).cwiseProduct(c_prev) +
               g.topRows(h).cwiseProduct(g.middleRows(2 * h, h));
      h_prev = g.bottomRows(h).cwiseProduct(Matrix(c_prev.array().tanh()));
      dc.cell.middleCols(col, batch) = c_prev;
      dc.hidden.middleCols(col, batch) = h_prev;
    }
  }

  template <typename DHidden>
  void backward_direction(const Vector& params, Vector& grad, std::size_t li, int dir,
                          const LayerCache& lc, const SequenceBatch& x, const DHidden& d_hidden,
                          Matrix* d_in) const {
    const int h = spec_.layers[li].hidden;
    const int steps = x.steps, batch = x.batch;
    const std::size_t k = 6 * li + 3 * dir;
    const auto wx = view(params, layout_[k]);
    const auto wh = view(params, layout_[k + 1]);
    const DirectionCache& dc = lc.dir[dir];

    Matrix dz(4 * h, lc.input.cols());
    Matrix h_prev_all = Matrix::Zero(h, lc.input.cols());
    Matrix dh_next = Matrix::Zero(h, batch);
    Matrix dc_next = Matrix::Zero(h, batch);
    const Matrix zero = Matrix::Zero(h, batch);
    for (int s = steps; s-- > 0;) {
      const int t = dir == 0 ? s : steps - 1 - s;
      const int t_prev = dir == 0 ? t - 1 : t + 1;
      const bool has_prev = s > 0;
      const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
      const Eigen::Index col_prev = static_cast<Eigen::Index>(t_prev) * batch;

      const auto g = dc.gates.middleCols(col, batch);
      const auto i_g = g.topRows(h).array();
      const auto f_g = g.middleRows(h, h).array();
      const auto c_g = g.middleRows(2 * h, h).array();
      const auto o_g = g.bottomRows(h).array();
      const Matrix c_prev = has_prev ? Matrix(dc.cell.middleCols(col_prev, batch)) : zero;
      if (has_prev) h_prev_all.middleCols(col, batch) = dc.hidden.middleCols(col_prev, batch);

      const Eigen::ArrayXXd tc = dc.cell.middleCols(col, batch).array().tanh();
      const Eigen::ArrayXXd dh = (d_hidden.middleCols(col, batch) + dh_next).array();
      const Eigen::ArrayXXd dcell = dh * o_g * (1.0 - tc.square()) + dc_next.array();
      auto dzb = dz.middleCols(col, batch);
      dzb.topRows(h) = (dcell * c_g * i_g * (1.0 - i_g)).matrix();
      dzb.middleRows(h, h) = (dcell * c_prev.array() * f_g * (1.0 - f_g)).matrix();
      dzb.middleRows(2 * h, h) = (dcell * i_g * (1.0 - c_g.square())).matrix();
      dzb.bottomRows(h) = (dh * tc * o_g * (1.0 - o_g)).matrix();
      dc_next = (dcell * f_g).matrix();
      dh_next.noalias() = wh.transpose() * dzb;
    }
    view(grad, layout_[k]).noalias() += dz * lc.input.transpose();
    view(grad, layout_[k + 1]).noalias() += dz * h_prev_all.transpose();
    view(grad, layout_[k + 2]).col(0) += dz.rowwise().sum();
    if (d_in) d_in->noalias() += wx.transpose() * dz;
  }

  LstmStackSpec spec_;
  ParamLayout layout_;
  Vector params_;
};

}  // namespace gesture::nn
