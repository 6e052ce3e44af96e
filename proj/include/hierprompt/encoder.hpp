#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hierprompt/sequence.hpp"
#include "hierprompt/util.hpp"

namespace hierprompt {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct EncoderConfig {
  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int ffn = 256;
  int vocab_size = 0;
  int max_positions = 128;
  int relations = 0;
  int graph_dim = 0;  // 0 means equal to hidden; otherwise a learned projection maps it to hidden
  double dropout = 0.0;
  bool tie_mlm = false;
  bool graph_mask = false;  // learned MASK vector + regression head for masked graph slots
  double init_std = 0.02;

  int soft_dim() const { return graph_dim > 0 ? graph_dim : hidden; }
  bool has_projection() const { return graph_dim > 0 && graph_dim != hidden; }
  void validate() const;
  ordered_json to_json() const;
  static EncoderConfig from_json(const json& j);
};

struct LayerParams {
  Matrix ln1_g, ln1_b;
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix ln2_g, ln2_b;
  Matrix w1, b1, w2, b2;
};

// Also used as the gradient container (same shapes, zero-initialized).
struct EncoderParams {
  EncoderConfig config;
  Matrix tok_emb, pos_emb, seg_emb, rel_emb;
  Matrix proj_w, proj_b;
  Matrix graph_mask_vec;
  std::vector<LayerParams> layers;
  Matrix lnf_g, lnf_b;
  Matrix nsp_w, nsp_b;
  Matrix mlm_w, mlm_b;
  Matrix greg_w, greg_b;

  template <class F>
  void for_each(F&& f);
  template <class F>
  void for_each(F&& f) const;

  EncoderParams zeros_like() const;
  void set_zero();
  void add_scaled(const EncoderParams& other, double scale);
  double squared_norm() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
  std::string hash() const;
};

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

struct LayerCache {
  Matrix x_in;
  Matrix ln1_xhat, ln1_out;
  RowVector ln1_rstd;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, n x n, row-stochastic
  Matrix ctx;
  Matrix attn_drop;  // dropout scale mask (empty when dropout is off)
  Matrix x_mid;
  Matrix ln2_xhat, ln2_out;
  RowVector ln2_rstd;
  Matrix pre_act, act;
  Matrix ffn_drop;
};

struct ForwardTrace {
  MixedSequence sequence;  // inputs as fed (after any masking)
  Matrix soft;             // graph soft vectors, one row per graph slot
  Matrix x0;
  std::vector<LayerCache> layers;
  Matrix lnf_xhat;
  RowVector lnf_rstd;
  Matrix hidden;  // final hidden states, n x d
  RowVector pooled() const { return hidden.row(0); }
};

// Optional stochastic state for dropout; nullptr runs deterministically.
ForwardTrace forward(const EncoderParams& params, const MixedSequence& sequence, const Matrix& soft_vectors,
                     Rng* dropout_rng = nullptr);

double nsp_logit(const ForwardTrace& trace, const EncoderParams& params);
// One row of raw vocabulary scores per requested position.
Matrix mlm_logits(const ForwardTrace& trace, const std::vector<std::size_t>& positions, const EncoderParams& params);
// Regression of masked graph slots onto their frozen graph tokens.
Matrix graph_predictions(const ForwardTrace& trace, const std::vector<std::size_t>& positions,
                         const EncoderParams& params);

// Gradients of a scalar loss with respect to the head outputs and, optionally,
// directly with respect to the final hidden states.
struct OutputGrads {
  double nsp_logit = 0.0;
  std::vector<std::size_t> mlm_positions;
  Matrix mlm_logits;  // |mlm_positions| x vocab
  std::vector<std::size_t> graph_positions;
  Matrix graph_predictions;  // |graph_positions| x soft_dim
  Matrix hidden;             // n x d, or empty
};

// Accumulates parameter gradients into `grads` and returns the gradient with
// respect to the soft vectors (one row per graph slot).
Matrix backward(const EncoderParams& params, const ForwardTrace& trace, const OutputGrads& output_grads,
                EncoderParams& grads);

enum class Pooling { kCls, kMean };
Pooling parse_pooling(std::string_view name);
std::string pooling_name(Pooling pooling);
// kCls: row 0. kMean: mean over non-special positions (all positions if none).
RowVector pool(const ForwardTrace& trace, Pooling pooling);

double gelu(double x);
double sigmoid(double x);
void softmax_rows(Matrix& m);

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path);
std::string serialize_params(const EncoderParams& params);

template <class F>
void EncoderParams::for_each(F&& f) {
  f("tok_emb", tok_emb);
  f("pos_emb", pos_emb);
  f("seg_emb", seg_emb);
  f("rel_emb", rel_emb);
  if (config.has_projection()) {
    f("proj_w", proj_w);
    f("proj_b", proj_b);
  }
  if (config.graph_mask) f("graph_mask_vec", graph_mask_vec);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& L = layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    f(p + "ln1_g", L.ln1_g);
    f(p + "ln1_b", L.ln1_b);
    f(p + "wq", L.wq);
    f(p + "bq", L.bq);
    f(p + "wk", L.wk);
    f(p + "bk", L.bk);
    f(p + "wv", L.wv);
    f(p + "bv", L.bv);
    f(p + "wo", L.wo);
    f(p + "bo", L.bo);
    f(p + "ln2_g", L.ln2_g);
    f(p + "ln2_b", L.ln2_b);
    f(p + "w1", L.w1);
    f(p + "b1", L.b1);
    f(p + "w2", L.w2);
    f(p + "b2", L.b2);
  }
  f("lnf_g", lnf_g);
  f("lnf_b", lnf_b);
  f("nsp_w", nsp_w);
  f("nsp_b", nsp_b);
  if (!config.tie_mlm) f("mlm_w", mlm_w);
  f("mlm_b", mlm_b);
  if (config.graph_mask) {
    f("greg_w", greg_w);
    f("greg_b", greg_b);
  }
}

template <class F>
void EncoderParams::for_each(F&& f) const {
  const_cast<EncoderParams*>(this)->for_each([&](const std::string& name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
}

}  // namespace hierprompt
