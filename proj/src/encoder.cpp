#include "hierprompt/encoder.hpp"

#include <cmath>

namespace hierprompt {

namespace {

constexpr double kLnEps = 1e-5;

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double std, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix constant(Eigen::Index rows, Eigen::Index cols, double v) { return Matrix::Constant(rows, cols, v); }

void layer_norm(const Matrix& x, const Matrix& g, const Matrix& b, Matrix& xhat, RowVector& rstd, Matrix& out) {
  const auto n = x.rows();
  const auto d = x.cols();
  xhat.resize(n, d);
  rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    rstd(i) = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(i) = (x.row(i).array() - mu) * rstd(i);
  }
  out = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& xhat, const RowVector& rstd, const Matrix& g, Matrix& dg,
                           Matrix& db) {
  dg.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  Matrix dxhat = dy.array().rowwise() * g.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  const double inv_d = 1.0 / static_cast<double>(dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).sum() * inv_d;
    const double m2 = dxhat.row(i).dot(xhat.row(i)) * inv_d;
    dx.row(i) = rstd(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
  }
  return dx;
}

double gelu_grad(double x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform_real(rng) < p ? 0.0 : keep;
  return m;
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * 0.70710678118654752440)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

void EncoderConfig::validate() const {
  if (layers < 1) throw_config("encoder.layers must be >= 1");
  if (hidden < 1 || heads < 1 || hidden % heads != 0) throw_config("encoder.hidden must be divisible by encoder.heads");
  if (ffn < 1) throw_config("encoder.ffn must be >= 1");
  if (vocab_size < 5) throw_config("encoder.vocab_size must cover the special tokens");
  if (max_positions < 3) throw_config("encoder.max_positions must be >= 3");
  if (relations < 0) throw_config("encoder.relations must be >= 0");
  if (graph_dim < 0) throw_config("encoder.graph_dim must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) throw_config("encoder.dropout must lie in [0, 1)");
  if (!(init_std > 0.0)) throw_config("encoder.init_std must be positive");
}

ordered_json EncoderConfig::to_json() const {
  ordered_json j;
  j["layers"] = layers;
  j["hidden"] = hidden;
  j["heads"] = heads;
  j["ffn"] = ffn;
  j["vocab_size"] = vocab_size;
  j["max_positions"] = max_positions;
  j["relations"] = relations;
  j["graph_dim"] = graph_dim;
  j["dropout"] = dropout;
  j["tie_mlm"] = tie_mlm;
  j["graph_mask"] = graph_mask;
  j["init_std"] = init_std;
  return j;
}

EncoderConfig EncoderConfig::from_json(const json& j) {
  reject_unknown_keys(j,
                      {"layers", "hidden", "heads", "ffn", "vocab_size", "max_positions", "relations", "graph_dim",
                       "dropout", "tie_mlm", "graph_mask", "init_std"},
                      "encoder");
  EncoderConfig c;
  c.layers = j.value("layers", c.layers);
  c.hidden = j.value("hidden", c.hidden);
  c.heads = j.value("heads", c.heads);
  c.ffn = j.value("ffn", c.ffn);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.relations = j.value("relations", c.relations);
  c.graph_dim = j.value("graph_dim", c.graph_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.tie_mlm = j.value("tie_mlm", c.tie_mlm);
  c.graph_mask = j.value("graph_mask", c.graph_mask);
  c.init_std = j.value("init_std", c.init_std);
  return c;
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z = *this;
  z.set_zero();
  return z;
}

void EncoderParams::set_zero() {
  for_each([](const std::string&, Matrix& m) { m.setZero(); });
}

void EncoderParams::add_scaled(const EncoderParams& other, double scale) {
  std::vector<const Matrix*> src;
  other.for_each([&](const std::string&, const Matrix& m) { src.push_back(&m); });
  std::size_t i = 0;
  for_each([&](const std::string&, Matrix& m) { m.noalias() += scale * *src[i++]; });
}

double EncoderParams::squared_norm() const {
  double s = 0;
  for_each([&](const std::string&, const Matrix& m) { s += m.squaredNorm(); });
  return s;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool EncoderParams::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

std::string EncoderParams::hash() const { return content_hash(serialize_params(*this)); }

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(mix_seed(seed, "encoder-init"));
  const double s = config.init_std;
  const int d = config.hidden;
  EncoderParams p;
  p.config = config;
  p.tok_emb = normal_matrix(config.vocab_size, d, s, rng);
  p.pos_emb = normal_matrix(config.max_positions, d, s, rng);
  p.seg_emb = normal_matrix(2, d, s, rng);
  p.rel_emb = normal_matrix(config.relations, d, s, rng);
  if (config.has_projection()) {
    p.proj_w = normal_matrix(config.graph_dim, d, s, rng);
    p.proj_b = constant(1, d, 0.0);
  }
  if (config.graph_mask) p.graph_mask_vec = normal_matrix(1, config.soft_dim(), s, rng);
  for (int l = 0; l < config.layers; ++l) {
    LayerParams L;
    L.ln1_g = constant(1, d, 1.0);
    L.ln1_b = constant(1, d, 0.0);
    L.wq = normal_matrix(d, d, s, rng);
    L.bq = constant(1, d, 0.0);
    L.wk = normal_matrix(d, d, s, rng);
    L.bk = constant(1, d, 0.0);
    L.wv = normal_matrix(d, d, s, rng);
    L.bv = constant(1, d, 0.0);
    L.wo = normal_matrix(d, d, s, rng);
    L.bo = constant(1, d, 0.0);
    L.ln2_g = constant(1, d, 1.0);
    L.ln2_b = constant(1, d, 0.0);
    L.w1 = normal_matrix(d, config.ffn, s, rng);
    L.b1 = constant(1, config.ffn, 0.0);
    L.w2 = normal_matrix(config.ffn, d, s, rng);
    L.b2 = constant(1, d, 0.0);
    p.layers.push_back(std::move(L));
  }
  p.lnf_g = constant(1, d, 1.0);
  p.lnf_b = constant(1, d, 0.0);
  p.nsp_w = normal_matrix(1, d, s, rng);
  p.nsp_b = constant(1, 1, 0.0);
  if (!config.tie_mlm) p.mlm_w = normal_matrix(config.vocab_size, d, s, rng);
  p.mlm_b = constant(1, config.vocab_size, 0.0);
  if (config.graph_mask) {
    p.greg_w = normal_matrix(d, config.soft_dim(), s, rng);
    p.greg_b = constant(1, config.soft_dim(), 0.0);
  }
  return p;
}

namespace {

RowVector soft_input(const EncoderParams& p, const RowVector& s) {
  if (!p.config.has_projection()) return s;
  return s * p.proj_w + p.proj_b.row(0);
}

}  // namespace

ForwardTrace forward(const EncoderParams& params, const MixedSequence& sequence, const Matrix& soft_vectors,
                     Rng* dropout_rng) {
  const auto& cfg = params.config;
  const auto n = static_cast<Eigen::Index>(sequence.size());
  const Eigen::Index d = cfg.hidden;
  if (n == 0) throw_data("cannot encode an empty sequence");
  if (n > cfg.max_positions)
    throw_data("sequence length " + std::to_string(n) + " exceeds max_positions " + std::to_string(cfg.max_positions));
  const auto graph_slots = static_cast<Eigen::Index>(sequence.count(ElementKind::kGraphSlot));
  if (soft_vectors.rows() != graph_slots)
    throw_data("expected " + std::to_string(graph_slots) + " soft vectors, got " + std::to_string(soft_vectors.rows()));
  if (graph_slots > 0 && soft_vectors.cols() != cfg.soft_dim())
    throw_data("soft vector dimension " + std::to_string(soft_vectors.cols()) + " does not match " +
               std::to_string(cfg.soft_dim()));

  ForwardTrace t;
  t.sequence = sequence;
  t.soft = soft_vectors;
  t.x0.resize(n, d);
  Eigen::Index g = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int id = sequence.ids[static_cast<std::size_t>(i)];
    switch (sequence.kinds[static_cast<std::size_t>(i)]) {
      case ElementKind::kToken:
        if (id < 0 || id >= cfg.vocab_size) throw_data("token id " + std::to_string(id) + " out of range");
        t.x0.row(i) = params.tok_emb.row(id);
        break;
      case ElementKind::kGraphSlot:
        if (id < 0) {
          if (!cfg.graph_mask) throw_data("masked graph slot requires encoder.graph_mask");
          t.x0.row(i) = soft_input(params, params.graph_mask_vec.row(0));
        } else {
          t.x0.row(i) = soft_input(params, soft_vectors.row(g));
        }
        ++g;
        break;
      case ElementKind::kRelationSlot: {
        const auto r = sequence.slots.at(static_cast<std::size_t>(id)).relation;
        if (r >= cfg.relations) throw_data("relation id " + std::to_string(r) + " out of range");
        t.x0.row(i) = params.rel_emb.row(r);
        break;
      }
    }
    t.x0.row(i) += params.pos_emb.row(i) + params.seg_emb.row(sequence.segments[static_cast<std::size_t>(i)]);
  }

  const int h = cfg.heads;
  const Eigen::Index dh = d / h;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool drop = dropout_rng != nullptr && cfg.dropout > 0.0;

  Matrix x = t.x0;
  t.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& L = params.layers[l];
    auto& c = t.layers[l];
    c.x_in = x;
    layer_norm(x, L.ln1_g, L.ln1_b, c.ln1_xhat, c.ln1_rstd, c.ln1_out);
    c.q.noalias() = c.ln1_out * L.wq;
    c.q.rowwise() += L.bq.row(0);
    c.k.noalias() = c.ln1_out * L.wk;
    c.k.rowwise() += L.bk.row(0);
    c.v.noalias() = c.ln1_out * L.wv;
    c.v.rowwise() += L.bv.row(0);
    c.ctx.resize(n, d);
    c.probs.resize(static_cast<std::size_t>(h));
    for (int hd = 0; hd < h; ++hd) {
      auto qh = c.q.middleCols(hd * dh, dh);
      auto kh = c.k.middleCols(hd * dh, dh);
      auto vh = c.v.middleCols(hd * dh, dh);
      Matrix& P = c.probs[static_cast<std::size_t>(hd)];
      P.noalias() = scale * (qh * kh.transpose());
      softmax_rows(P);
      c.ctx.middleCols(hd * dh, dh).noalias() = P * vh;
    }
    Matrix a = c.ctx * L.wo;
    a.rowwise() += L.bo.row(0);
    if (drop) {
      c.attn_drop = dropout_mask(n, d, cfg.dropout, *dropout_rng);
      a.array() *= c.attn_drop.array();
    }
    c.x_mid = x + a;
    layer_norm(c.x_mid, L.ln2_g, L.ln2_b, c.ln2_xhat, c.ln2_rstd, c.ln2_out);
    c.pre_act.noalias() = c.ln2_out * L.w1;
    c.pre_act.rowwise() += L.b1.row(0);
    c.act = c.pre_act.unaryExpr([](double v) { return gelu(v); });
    Matrix f = c.act * L.w2;
    f.rowwise() += L.b2.row(0);
    if (drop) {
      c.ffn_drop = dropout_mask(n, d, cfg.dropout, *dropout_rng);
      f.array() *= c.ffn_drop.array();
    }
    x = c.x_mid + f;
  }
  layer_norm(x, params.lnf_g, params.lnf_b, t.lnf_xhat, t.lnf_rstd, t.hidden);
  return t;
}

Pooling parse_pooling(std::string_view name) {
  if (name == "cls") return Pooling::kCls;
  if (name == "mean") return Pooling::kMean;
  throw_config("unknown pooling '" + std::string(name) + "' (expected cls or mean)");
}

std::string pooling_name(Pooling pooling) { return pooling == Pooling::kCls ? "cls" : "mean"; }

RowVector pool(const ForwardTrace& trace, Pooling pooling) {
  if (pooling == Pooling::kCls) return trace.hidden.row(0);
  const auto& seq = trace.sequence;
  RowVector sum = RowVector::Zero(trace.hidden.cols());
  std::size_t n = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq.kinds[i] == ElementKind::kToken && Vocab::is_special(seq.ids[i])) continue;
    sum += trace.hidden.row(static_cast<Eigen::Index>(i));
    ++n;
  }
  if (n == 0) return trace.hidden.colwise().mean();
  return sum / static_cast<double>(n);
}

double nsp_logit(const ForwardTrace& trace, const EncoderParams& params) {
  return trace.hidden.row(0).dot(params.nsp_w.row(0)) + params.nsp_b(0, 0);
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& positions) {
  Matrix out(static_cast<Eigen::Index>(positions.size()), m.cols());
  for (std::size_t k = 0; k < positions.size(); ++k) {
    if (positions[k] >= static_cast<std::size_t>(m.rows()))
      throw_data("position " + std::to_string(positions[k]) + " out of range");
    out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(positions[k]));
  }
  return out;
}

}  // namespace

Matrix mlm_logits(const ForwardTrace& trace, const std::vector<std::size_t>& positions, const EncoderParams& params) {
  const Matrix& W = params.config.tie_mlm ? params.tok_emb : params.mlm_w;
  Matrix logits = gather_rows(trace.hidden, positions) * W.transpose();
  logits.rowwise() += params.mlm_b.row(0);
  return logits;
}

Matrix graph_predictions(const ForwardTrace& trace, const std::vector<std::size_t>& positions,
                         const EncoderParams& params) {
  if (!params.config.graph_mask) throw_config("graph-token regression requires encoder.graph_mask");
  Matrix pred = gather_rows(trace.hidden, positions) * params.greg_w;
  pred.rowwise() += params.greg_b.row(0);
  return pred;
}

Matrix backward(const EncoderParams& params, const ForwardTrace& trace, const OutputGrads& out, EncoderParams& grads) {
  const auto& cfg = params.config;
  const Eigen::Index n = trace.hidden.rows();
  const Eigen::Index d = cfg.hidden;
  const auto& seq = trace.sequence;

  Matrix dH = Matrix::Zero(n, d);
  if (out.hidden.size() > 0) {
    if (out.hidden.rows() != n || out.hidden.cols() != d) throw_data("hidden-state gradient has the wrong shape");
    dH = out.hidden;
  }
  if (out.nsp_logit != 0.0) {
    dH.row(0) += out.nsp_logit * params.nsp_w.row(0);
    grads.nsp_w.row(0) += out.nsp_logit * trace.hidden.row(0);
    grads.nsp_b(0, 0) += out.nsp_logit;
  }
  if (!out.mlm_positions.empty()) {
    if (out.mlm_logits.rows() != static_cast<Eigen::Index>(out.mlm_positions.size()) || out.mlm_logits.cols() != cfg.vocab_size)
      throw_data("MLM logit gradient has the wrong shape");
    const Matrix& W = cfg.tie_mlm ? params.tok_emb : params.mlm_w;
    Matrix& gW = cfg.tie_mlm ? grads.tok_emb : grads.mlm_w;
    const Matrix Hp = gather_rows(trace.hidden, out.mlm_positions);
    const Matrix dHp = out.mlm_logits * W;
    gW.noalias() += out.mlm_logits.transpose() * Hp;
    grads.mlm_b.row(0) += out.mlm_logits.colwise().sum();
    for (std::size_t k = 0; k < out.mlm_positions.size(); ++k)
      dH.row(static_cast<Eigen::Index>(out.mlm_positions[k])) += dHp.row(static_cast<Eigen::Index>(k));
  }
  if (!out.graph_positions.empty()) {
    const Matrix Hp = gather_rows(trace.hidden, out.graph_positions);
    const Matrix dHp = out.graph_predictions * params.greg_w.transpose();
    grads.greg_w.noalias() += Hp.transpose() * out.graph_predictions;
    grads.greg_b.row(0) += out.graph_predictions.colwise().sum();
    for (std::size_t k = 0; k < out.graph_positions.size(); ++k)
      dH.row(static_cast<Eigen::Index>(out.graph_positions[k])) += dHp.row(static_cast<Eigen::Index>(k));
  }

  Matrix dx = layer_norm_backward(dH, trace.lnf_xhat, trace.lnf_rstd, params.lnf_g, grads.lnf_g, grads.lnf_b);

  const int h = cfg.heads;
  const Eigen::Index dh = d / h;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& L = params.layers[l];
    auto& G = grads.layers[l];
    const auto& c = trace.layers[l];

    // feed-forward branch
    Matrix df = dx;
    if (c.ffn_drop.size() > 0) df.array() *= c.ffn_drop.array();
    G.b2.row(0) += df.colwise().sum();
    G.w2.noalias() += c.act.transpose() * df;
    Matrix dpre = df * L.w2.transpose();
    dpre.array() *= c.pre_act.unaryExpr([](double v) { return gelu_grad(v); }).array();
    G.b1.row(0) += dpre.colwise().sum();
    G.w1.noalias() += c.ln2_out.transpose() * dpre;
    Matrix dln2 = dpre * L.w1.transpose();
    Matrix dx_mid = dx + layer_norm_backward(dln2, c.ln2_xhat, c.ln2_rstd, L.ln2_g, G.ln2_g, G.ln2_b);

    // attention branch
    Matrix da = dx_mid;
    if (c.attn_drop.size() > 0) da.array() *= c.attn_drop.array();
    G.bo.row(0) += da.colwise().sum();
    G.wo.noalias() += c.ctx.transpose() * da;
    const Matrix dctx = da * L.wo.transpose();
    Matrix dq(n, d), dk(n, d), dv(n, d);
    for (int hd = 0; hd < h; ++hd) {
      const auto& P = c.probs[static_cast<std::size_t>(hd)];
      auto dctx_h = dctx.middleCols(hd * dh, dh);
      Matrix dP = dctx_h * c.v.middleCols(hd * dh, dh).transpose();
      dv.middleCols(hd * dh, dh).noalias() = P.transpose() * dctx_h;
      const Eigen::VectorXd row_dot = (dP.array() * P.array()).rowwise().sum();
      Matrix dS = P.array() * (dP.array().colwise() - row_dot.array());
      dq.middleCols(hd * dh, dh).noalias() = scale * (dS * c.k.middleCols(hd * dh, dh));
      dk.middleCols(hd * dh, dh).noalias() = scale * (dS.transpose() * c.q.middleCols(hd * dh, dh));
    }
    G.wq.noalias() += c.ln1_out.transpose() * dq;
    G.bq.row(0) += dq.colwise().sum();
    G.wk.noalias() += c.ln1_out.transpose() * dk;
    G.bk.row(0) += dk.colwise().sum();
    G.wv.noalias() += c.ln1_out.transpose() * dv;
    G.bv.row(0) += dv.colwise().sum();
    Matrix dln1 = dq * L.wq.transpose();
    dln1.noalias() += dk * L.wk.transpose();
    dln1.noalias() += dv * L.wv.transpose();
    dx = dx_mid + layer_norm_backward(dln1, c.ln1_xhat, c.ln1_rstd, L.ln1_g, G.ln1_g, G.ln1_b);
  }

  // input embeddings
  Matrix dsoft = Matrix::Zero(trace.soft.rows(), cfg.soft_dim());
  Eigen::Index g = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const int id = seq.ids[idx];
    grads.pos_emb.row(i) += dx.row(i);
    grads.seg_emb.row(seq.segments[idx]) += dx.row(i);
    switch (seq.kinds[idx]) {
      case ElementKind::kToken:
        grads.tok_emb.row(id) += dx.row(i);
        break;
      case ElementKind::kRelationSlot:
        grads.rel_emb.row(seq.slots[static_cast<std::size_t>(id)].relation) += dx.row(i);
        break;
      case ElementKind::kGraphSlot: {
        RowVector ds = dx.row(i);
        if (cfg.has_projection()) {
          const RowVector s = id < 0 ? RowVector(params.graph_mask_vec.row(0)) : RowVector(trace.soft.row(g));
          grads.proj_w.noalias() += s.transpose() * dx.row(i);
          grads.proj_b.row(0) += dx.row(i);
          ds = dx.row(i) * params.proj_w.transpose();
        }
        if (id < 0)
          grads.graph_mask_vec.row(0) += ds;
        else
          dsoft.row(g) = ds;
        ++g;
        break;
      }
    }
  }
  return dsoft;
}

}  // namespace hierprompt
