#include "vtv/inversion/model.hpp"

#include <algorithm>
#include <cmath>

#include "vtv/error.hpp"
#include "vtv/simd/kernels.hpp"

namespace vtv::inversion {

ParamLayout::ParamLayout(const ModelDims& d) {
  std::size_t off = 0;
  const auto take = [&off](std::size_t n) {
    Slice s{off, n};
    off += n;
    return s;
  };
  conv_a_w = take(d.conv_channels * d.layers * 9);
  bn_a_gamma = take(d.conv_channels);
  bn_a_beta = take(d.conv_channels);
  conv_b_w = take(d.conv_channels * 9);
  bn_b_gamma = take(1);
  bn_b_beta = take(1);
  gru1_wih = take(3 * d.gru1 * d.feature_dim);
  gru1_whh = take(3 * d.gru1 * d.gru1);
  gru1_bih = take(3 * d.gru1);
  gru1_bhh = take(3 * d.gru1);
  gru2_wih = take(3 * d.gru2 * d.gru1);
  gru2_whh = take(3 * d.gru2 * d.gru2);
  gru2_bih = take(3 * d.gru2);
  gru2_bhh = take(3 * d.gru2);
  dense1_w = take(d.dense1 * d.gru2);
  dense1_b = take(d.dense1);
  out_w = take(d.outputs * d.dense1);
  out_b = take(d.outputs);
  total = off;
}

std::vector<std::pair<std::string, ParamLayout::Slice>> ParamLayout::named() const {
  return {{"conv_a.weight", conv_a_w}, {"bn_a.gamma", bn_a_gamma},
          {"bn_a.beta", bn_a_beta},    {"conv_b.weight", conv_b_w},
          {"bn_b.gamma", bn_b_gamma},  {"bn_b.beta", bn_b_beta},
          {"gru1.w_ih", gru1_wih},     {"gru1.w_hh", gru1_whh},
          {"gru1.b_ih", gru1_bih},     {"gru1.b_hh", gru1_bhh},
          {"gru2.w_ih", gru2_wih},     {"gru2.w_hh", gru2_whh},
          {"gru2.b_ih", gru2_bih},     {"gru2.b_hh", gru2_bhh},
          {"dense1.weight", dense1_w}, {"dense1.bias", dense1_b},
          {"dense_out.weight", out_w}, {"dense_out.bias", out_b}};
}

InversionModel::InversionModel(const ModelDims& d, std::uint64_t s)
    : dims(d), seed(s) {
  const ParamLayout lay(d);
  params.assign(lay.total, 0.0);
  Rng rng(mix_seed(s, 11));
  const auto fill = [&](const ParamLayout::Slice& sl, double bound) {
    for (std::size_t i = 0; i < sl.size; ++i) {
      params[sl.offset + i] = rng.uniform(-bound, bound);
    }
  };
  const auto fill_const = [&](const ParamLayout::Slice& sl, double v) {
    std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(sl.offset), sl.size, v);
  };
  const auto dbl = [](std::size_t n) { return static_cast<double>(n); };
  fill(lay.conv_a_w, std::sqrt(6.0 / dbl(d.layers * 9)));
  fill_const(lay.bn_a_gamma, 1.0);
  fill(lay.conv_b_w, std::sqrt(6.0 / dbl(d.conv_channels * 9)));
  fill_const(lay.bn_b_gamma, 1.0);
  const double g1 = 1.0 / std::sqrt(dbl(d.gru1));
  fill(lay.gru1_wih, g1);
  fill(lay.gru1_whh, g1);
  fill(lay.gru1_bih, g1);
  fill(lay.gru1_bhh, g1);
  const double g2 = 1.0 / std::sqrt(dbl(d.gru2));
  fill(lay.gru2_wih, g2);
  fill(lay.gru2_whh, g2);
  fill(lay.gru2_bih, g2);
  fill(lay.gru2_bhh, g2);
  fill(lay.dense1_w, std::sqrt(6.0 / dbl(d.gru2)));
  fill(lay.dense1_b, 1.0 / std::sqrt(dbl(d.gru2)));
  fill(lay.out_w, 1.0 / std::sqrt(dbl(d.dense1)));
  fill(lay.out_b, 1.0 / std::sqrt(dbl(d.dense1)));

  bn_running.assign(2 * d.conv_channels + 2, 0.0);
  std::fill_n(bn_running.begin() + static_cast<std::ptrdiff_t>(d.conv_channels),
              d.conv_channels, 1.0);
  bn_running[2 * d.conv_channels + 1] = 1.0;
}

void validate_input(const InversionModel& model, const EmbeddingTensor& emb) {
  if (emb.layers != model.dims.layers) {
    throw Error(ErrorKind::Shape, "embedding has " + std::to_string(emb.layers) +
                                      " layers, model expects " +
                                      std::to_string(model.dims.layers));
  }
  if (emb.dim != model.dims.feature_dim) {
    throw Error(ErrorKind::Shape, "embedding dim " + std::to_string(emb.dim) +
                                      " does not match model feature dim " +
                                      std::to_string(model.dims.feature_dim));
  }
  if (emb.frames < 1) throw Error(ErrorKind::Shape, "embedding has no frames");
  if (emb.values.size() != emb.layers * emb.frames * emb.dim) {
    throw Error(ErrorKind::Shape, "embedding value count does not match its shape");
  }
  for (double v : emb.values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Shape, "embedding has non-finite values");
  }
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// 3x3 cross-correlation with zero padding over a [channel][frame][feature]
// volume. in: cin x T x D, w: cout x cin x 3 x 3, out: cout x T x D (+=).
void conv3x3_forward(const double* in, std::size_t cin, const double* w,
                     std::size_t cout, std::size_t frames, std::size_t dim,
                     double* out) {
  const auto& k = simd::active();
  const auto T = static_cast<std::ptrdiff_t>(frames);
  const auto D = static_cast<std::ptrdiff_t>(dim);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* wk = w + (co * cin + ci) * 9;
      for (std::ptrdiff_t kt = 0; kt < 3; ++kt) {
        for (std::ptrdiff_t kd = 0; kd < 3; ++kd) {
          const double wv = wk[kt * 3 + kd];
          const std::ptrdiff_t dt = kt - 1, dd = kd - 1;
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -dd);
          const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(D, D - dd);
          if (hi <= lo) continue;
          for (std::ptrdiff_t t = 0; t < T; ++t) {
            const std::ptrdiff_t ts = t + dt;
            if (ts < 0 || ts >= T) continue;
            k.axpy(wv, in + (static_cast<std::ptrdiff_t>(ci) * T + ts) * D + lo + dd,
                   out + (static_cast<std::ptrdiff_t>(co) * T + t) * D + lo,
                   static_cast<std::size_t>(hi - lo));
          }
        }
      }
    }
  }
}

void conv3x3_backward(const double* in, std::size_t cin, const double* w,
                      std::size_t cout, std::size_t frames, std::size_t dim,
                      const double* dout, double* din, double* dw) {
  const auto& k = simd::active();
  const auto T = static_cast<std::ptrdiff_t>(frames);
  const auto D = static_cast<std::ptrdiff_t>(dim);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* wk = w + (co * cin + ci) * 9;
      double* dwk = dw + (co * cin + ci) * 9;
      for (std::ptrdiff_t kt = 0; kt < 3; ++kt) {
        for (std::ptrdiff_t kd = 0; kd < 3; ++kd) {
          const double wv = wk[kt * 3 + kd];
          const std::ptrdiff_t dt = kt - 1, dd = kd - 1;
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -dd);
          const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(D, D - dd);
          if (hi <= lo) continue;
          const auto len = static_cast<std::size_t>(hi - lo);
          double acc = 0.0;
          for (std::ptrdiff_t t = 0; t < T; ++t) {
            const std::ptrdiff_t ts = t + dt;
            if (ts < 0 || ts >= T) continue;
            const double* g = dout + (static_cast<std::ptrdiff_t>(co) * T + t) * D + lo;
            const std::ptrdiff_t src = (static_cast<std::ptrdiff_t>(ci) * T + ts) * D + lo + dd;
            acc += k.dot(g, in + src, len);
            if (din != nullptr) k.axpy(wv, g, din + src, len);
          }
          dwk[kt * 3 + kd] += acc;
        }
      }
    }
  }
}

struct GruWeights {
  const double* wih;
  const double* whh;
  const double* bih;
  const double* bhh;
  std::size_t in;
  std::size_t hidden;
};

struct GruCache {
  std::vector<double> r, z, n, ghn, h;  // [T][H]
};

void gru_forward(const GruWeights& g, const double* x, std::size_t frames,
                 GruCache& c) {
  const std::size_t H = g.hidden;
  c.r.assign(frames * H, 0.0);
  c.z.assign(frames * H, 0.0);
  c.n.assign(frames * H, 0.0);
  c.ghn.assign(frames * H, 0.0);
  c.h.assign(frames * H, 0.0);
  std::vector<double> gi(3 * H), gh(3 * H), zero(H, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* hp = t == 0 ? zero.data() : c.h.data() + (t - 1) * H;
    simd::gemv(g.wih, 3 * H, g.in, x + t * g.in, g.bih, gi.data());
    simd::gemv(g.whh, 3 * H, H, hp, g.bhh, gh.data());
    for (std::size_t i = 0; i < H; ++i) {
      const double r = sigmoid(gi[i] + gh[i]);
      const double z = sigmoid(gi[H + i] + gh[H + i]);
      const double n = std::tanh(gi[2 * H + i] + r * gh[2 * H + i]);
      c.r[t * H + i] = r;
      c.z[t * H + i] = z;
      c.n[t * H + i] = n;
      c.ghn[t * H + i] = gh[2 * H + i];
      c.h[t * H + i] = (1.0 - z) * n + z * hp[i];
    }
  }
}

// dh_out: gradient w.r.t. every h[t]; dx (may be null) receives input grads.
void gru_backward(const GruWeights& g, const double* x, std::size_t frames,
                  const GruCache& c, const double* dh_out, double* dx,
                  double* dwih, double* dwhh, double* dbih, double* dbhh) {
  const std::size_t H = g.hidden;
  std::vector<double> carry(H, 0.0), next(H), dgi(3 * H), dgh(3 * H), zero(H, 0.0);
  for (std::size_t tt = frames; tt-- > 0;) {
    const double* hp = tt == 0 ? zero.data() : c.h.data() + (tt - 1) * H;
    for (std::size_t i = 0; i < H; ++i) {
      const std::size_t idx = tt * H + i;
      const double dh = dh_out[idx] + carry[i];
      const double r = c.r[idx], z = c.z[idx], n = c.n[idx];
      const double dn = dh * (1.0 - z);
      const double dz = dh * (hp[i] - n);
      const double dan = dn * (1.0 - n * n);
      const double dr = dan * c.ghn[idx];
      const double dar = dr * r * (1.0 - r);
      const double daz = dz * z * (1.0 - z);
      dgi[i] = dar;
      dgi[H + i] = daz;
      dgi[2 * H + i] = dan;
      dgh[i] = dar;
      dgh[H + i] = daz;
      dgh[2 * H + i] = dan * r;
      next[i] = dh * z;
    }
    simd::gemv_backward(g.wih, 3 * H, g.in, x + tt * g.in, dgi.data(),
                        dx != nullptr ? dx + tt * g.in : nullptr, dwih);
    simd::gemv_backward(g.whh, 3 * H, H, hp, dgh.data(), next.data(), dwhh);
    for (std::size_t i = 0; i < 3 * H; ++i) {
      dbih[i] += dgi[i];
      dbhh[i] += dgh[i];
    }
    carry.swap(next);
  }
}

}  // namespace

struct BatchForward::Impl {
  struct Seq {
    const EmbeddingTensor* emb = nullptr;
    std::size_t T = 0;
    std::vector<double> a1, xhat1, h1;  // C1 x T x D
    std::vector<double> a2, xhat2, g;   // T x D
    GruCache gru1, gru2;
    std::vector<double> mask1, s1d;     // T x H1
    std::vector<double> mask2, s2d;     // T x H2
    std::vector<double> u;              // 2T x H2
    std::vector<double> vpre, v;        // 2T x F1
  };

  const InversionModel* model = nullptr;
  ParamLayout lay;
  ForwardOptions opt;
  std::vector<Seq> seqs;
  std::vector<double> mean_a, var_a;  // statistics used in the forward pass
  double mean_b = 0.0, var_b = 1.0;
  std::vector<TractVariableMatrix> outputs;

  explicit Impl(const InversionModel& m) : model(&m), lay(m.dims) {}

  const double* p(const ParamLayout::Slice& s) const {
    return model->params.data() + s.offset;
  }
  bool training() const { return opt.mode == Mode::Training; }
  bool dropping() const {
    return training() && opt.dropout && model->dropout > 0.0;
  }
};

BatchForward::BatchForward(const InversionModel& model,
                           std::span<const EmbeddingTensor* const> batch,
                           const ForwardOptions& options)
    : impl_(std::make_unique<Impl>(model)) {
  Impl& m = *impl_;
  m.opt = options;
  const ModelDims& d = model.dims;
  const std::size_t C1 = d.conv_channels, D = d.feature_dim;
  if (batch.empty()) throw Error(ErrorKind::EmptyInput, "empty batch");
  if (m.dropping() && options.rng == nullptr) {
    throw Error(ErrorKind::Config, "dropout requires an rng");
  }

  m.seqs.resize(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    validate_input(model, *batch[s]);
    m.seqs[s].emb = batch[s];
    m.seqs[s].T = batch[s]->frames;
  }

  // conv_a, then per-channel normalization over every (utterance, frame, feature).
  for (auto& q : m.seqs) {
    q.a1.assign(C1 * q.T * D, 0.0);
    conv3x3_forward(q.emb->values.data(), d.layers, m.p(m.lay.conv_a_w), C1, q.T, D,
                    q.a1.data());
  }
  m.mean_a.assign(C1, 0.0);
  m.var_a.assign(C1, 1.0);
  if (m.training()) {
    for (std::size_t c = 0; c < C1; ++c) {
      double sum = 0.0, sq = 0.0, count = 0.0;
      for (const auto& q : m.seqs) {
        const double* a = q.a1.data() + c * q.T * D;
        for (std::size_t i = 0; i < q.T * D; ++i) {
          sum += a[i];
          sq += a[i] * a[i];
        }
        count += static_cast<double>(q.T * D);
      }
      m.mean_a[c] = sum / count;
      m.var_a[c] = std::max(0.0, sq / count - m.mean_a[c] * m.mean_a[c]);
    }
  } else {
    for (std::size_t c = 0; c < C1; ++c) {
      m.mean_a[c] = model.bn_running[c];
      m.var_a[c] = model.bn_running[C1 + c];
    }
  }
  const double* gamma_a = m.p(m.lay.bn_a_gamma);
  const double* beta_a = m.p(m.lay.bn_a_beta);
  for (auto& q : m.seqs) {
    q.xhat1.resize(q.a1.size());
    q.h1.resize(q.a1.size());
    for (std::size_t c = 0; c < C1; ++c) {
      const double inv = 1.0 / std::sqrt(m.var_a[c] + InversionModel::kBnEps);
      for (std::size_t i = c * q.T * D; i < (c + 1) * q.T * D; ++i) {
        q.xhat1[i] = (q.a1[i] - m.mean_a[c]) * inv;
        q.h1[i] = std::max(0.0, gamma_a[c] * q.xhat1[i] + beta_a[c]);
      }
    }
    q.a2.assign(q.T * D, 0.0);
    conv3x3_forward(q.h1.data(), C1, m.p(m.lay.conv_b_w), 1, q.T, D, q.a2.data());
  }

  if (m.training()) {
    double sum = 0.0, sq = 0.0, count = 0.0;
    for (const auto& q : m.seqs) {
      for (double v : q.a2) {
        sum += v;
        sq += v * v;
      }
      count += static_cast<double>(q.a2.size());
    }
    m.mean_b = sum / count;
    m.var_b = std::max(0.0, sq / count - m.mean_b * m.mean_b);
  } else {
    m.mean_b = model.bn_running[2 * C1];
    m.var_b = model.bn_running[2 * C1 + 1];
  }
  const double gamma_b = *m.p(m.lay.bn_b_gamma);
  const double beta_b = *m.p(m.lay.bn_b_beta);
  const double inv_b = 1.0 / std::sqrt(m.var_b + InversionModel::kBnEps);

  const GruWeights g1{m.p(m.lay.gru1_wih), m.p(m.lay.gru1_whh), m.p(m.lay.gru1_bih),
                      m.p(m.lay.gru1_bhh), D, d.gru1};
  const GruWeights g2{m.p(m.lay.gru2_wih), m.p(m.lay.gru2_whh), m.p(m.lay.gru2_bih),
                      m.p(m.lay.gru2_bhh), d.gru1, d.gru2};
  const double keep_scale = 1.0 / (1.0 - model.dropout);

  const auto make_mask = [&](std::vector<double>& mask, std::size_t n) {
    mask.assign(n, 1.0);
    if (!m.dropping()) return;
    for (double& v : mask) {
      v = options.rng->uniform() < model.dropout ? 0.0 : keep_scale;
    }
  };

  m.outputs.clear();
  m.outputs.reserve(m.seqs.size());
  for (auto& q : m.seqs) {
    q.xhat2.resize(q.a2.size());
    q.g.resize(q.a2.size());
    for (std::size_t i = 0; i < q.a2.size(); ++i) {
      q.xhat2[i] = (q.a2[i] - m.mean_b) * inv_b;
      q.g[i] = std::max(0.0, gamma_b * q.xhat2[i] + beta_b);
    }

    gru_forward(g1, q.g.data(), q.T, q.gru1);
    make_mask(q.mask1, q.T * d.gru1);
    q.s1d = q.gru1.h;
    simd::active().mul_inplace(q.mask1.data(), q.s1d.data(), q.s1d.size());

    gru_forward(g2, q.s1d.data(), q.T, q.gru2);
    make_mask(q.mask2, q.T * d.gru2);
    q.s2d = q.gru2.h;
    simd::active().mul_inplace(q.mask2.data(), q.s2d.data(), q.s2d.size());

    // Linear 2x upsampling, half-sample aligned, edges clamped.
    const std::size_t H2 = d.gru2, F1 = d.dense1, n_out = 2 * q.T;
    q.u.assign(n_out * H2, 0.0);
    for (std::size_t t = 0; t < q.T; ++t) {
      const double* cur = q.s2d.data() + t * H2;
      const double* prev = q.s2d.data() + (t == 0 ? 0 : t - 1) * H2;
      const double* nxt = q.s2d.data() + std::min(t + 1, q.T - 1) * H2;
      double* even = q.u.data() + (2 * t) * H2;
      double* odd = q.u.data() + (2 * t + 1) * H2;
      for (std::size_t i = 0; i < H2; ++i) {
        even[i] = 0.75 * cur[i] + 0.25 * prev[i];
        odd[i] = 0.75 * cur[i] + 0.25 * nxt[i];
      }
    }

    q.vpre.resize(n_out * F1);
    q.v.resize(n_out * F1);
    TractVariableMatrix out(n_out);
    std::vector<double> o(d.outputs);
    for (std::size_t j = 0; j < n_out; ++j) {
      simd::gemv(m.p(m.lay.dense1_w), F1, H2, q.u.data() + j * H2,
                 m.p(m.lay.dense1_b), q.vpre.data() + j * F1);
      for (std::size_t i = 0; i < F1; ++i) {
        q.v[j * F1 + i] = std::max(0.0, q.vpre[j * F1 + i]);
      }
      simd::gemv(m.p(m.lay.out_w), d.outputs, F1, q.v.data() + j * F1,
                 m.p(m.lay.out_b), o.data());
      for (std::size_t c = 0; c < d.outputs && c < kTvChannelCount; ++c) out.at(c, j) = o[c];
    }
    m.outputs.push_back(std::move(out));
  }
}

BatchForward::~BatchForward() = default;

const std::vector<TractVariableMatrix>& BatchForward::outputs() const {
  return impl_->outputs;
}

void BatchForward::update_running_stats(InversionModel& model) const {
  const Impl& m = *impl_;
  if (!m.training()) return;
  const std::size_t C1 = model.dims.conv_channels;
  const double mom = InversionModel::kBnMomentum;
  std::size_t count_a = 0, count_b = 0;
  for (const auto& q : m.seqs) {
    count_a += q.T * model.dims.feature_dim;
    count_b += q.a2.size();
  }
  const auto unbiased = [](double var, std::size_t n) {
    return n > 1 ? var * static_cast<double>(n) / static_cast<double>(n - 1) : var;
  };
  for (std::size_t c = 0; c < C1; ++c) {
    model.bn_running[c] = (1 - mom) * model.bn_running[c] + mom * m.mean_a[c];
    model.bn_running[C1 + c] =
        (1 - mom) * model.bn_running[C1 + c] + mom * unbiased(m.var_a[c], count_a);
  }
  model.bn_running[2 * C1] = (1 - mom) * model.bn_running[2 * C1] + mom * m.mean_b;
  model.bn_running[2 * C1 + 1] =
      (1 - mom) * model.bn_running[2 * C1 + 1] + mom * unbiased(m.var_b, count_b);
}

void BatchForward::backward(std::span<const TractVariableMatrix> output_grads,
                            std::span<double> grad) const {
  const Impl& m = *impl_;
  const ModelDims& d = m.model->dims;
  const ParamLayout& L = m.lay;
  if (output_grads.size() != m.seqs.size()) {
    throw Error(ErrorKind::Shape, "output gradient count does not match batch");
  }
  if (grad.size() != L.total) throw Error(ErrorKind::Shape, "gradient buffer size");
  const std::size_t C1 = d.conv_channels, D = d.feature_dim, H1 = d.gru1,
                    H2 = d.gru2, F1 = d.dense1;
  double* gp = grad.data();
  const auto gs = [gp](const ParamLayout::Slice& s) { return gp + s.offset; };

  const GruWeights g1{m.p(L.gru1_wih), m.p(L.gru1_whh), m.p(L.gru1_bih),
                      m.p(L.gru1_bhh), D, H1};
  const GruWeights g2{m.p(L.gru2_wih), m.p(L.gru2_whh), m.p(L.gru2_bih),
                      m.p(L.gru2_bhh), H1, H2};

  // Head and recurrent layers, per utterance: gradient w.r.t. the GRU input g.
  std::vector<std::vector<double>> dy_b(m.seqs.size());
  for (std::size_t s = 0; s < m.seqs.size(); ++s) {
    const auto& q = m.seqs[s];
    const TractVariableMatrix& og = output_grads[s];
    const std::size_t n_out = 2 * q.T;
    if (og.frames != n_out) throw Error(ErrorKind::Shape, "output gradient length");

    std::vector<double> du(n_out * H2, 0.0), dvec(d.outputs), dv(F1);
    for (std::size_t j = 0; j < n_out; ++j) {
      for (std::size_t c = 0; c < d.outputs; ++c) {
        dvec[c] = c < kTvChannelCount ? og.at(c, j) : 0.0;
        gs(L.out_b)[c] += dvec[c];
      }
      std::fill(dv.begin(), dv.end(), 0.0);
      simd::gemv_backward(m.p(L.out_w), d.outputs, F1, q.v.data() + j * F1,
                          dvec.data(), dv.data(), gs(L.out_w));
      for (std::size_t i = 0; i < F1; ++i) {
        if (q.vpre[j * F1 + i] <= 0.0) dv[i] = 0.0;
        gs(L.dense1_b)[i] += dv[i];
      }
      simd::gemv_backward(m.p(L.dense1_w), F1, H2, q.u.data() + j * H2, dv.data(),
                          du.data() + j * H2, gs(L.dense1_w));
    }

    std::vector<double> ds2(q.T * H2, 0.0);
    for (std::size_t t = 0; t < q.T; ++t) {
      const std::size_t prev = t == 0 ? 0 : t - 1;
      const std::size_t nxt = std::min(t + 1, q.T - 1);
      for (std::size_t i = 0; i < H2; ++i) {
        const double ge = du[(2 * t) * H2 + i];
        const double go = du[(2 * t + 1) * H2 + i];
        ds2[t * H2 + i] += 0.75 * (ge + go);
        ds2[prev * H2 + i] += 0.25 * ge;
        ds2[nxt * H2 + i] += 0.25 * go;
      }
    }
    simd::active().mul_inplace(q.mask2.data(), ds2.data(), ds2.size());

    std::vector<double> ds1(q.T * H1, 0.0);
    gru_backward(g2, q.s1d.data(), q.T, q.gru2, ds2.data(), ds1.data(),
                 gs(L.gru2_wih), gs(L.gru2_whh), gs(L.gru2_bih), gs(L.gru2_bhh));
    simd::active().mul_inplace(q.mask1.data(), ds1.data(), ds1.size());

    std::vector<double> dg(q.T * D, 0.0);
    gru_backward(g1, q.g.data(), q.T, q.gru1, ds1.data(), dg.data(),
                 gs(L.gru1_wih), gs(L.gru1_whh), gs(L.gru1_bih), gs(L.gru1_bhh));
    for (std::size_t i = 0; i < dg.size(); ++i) {
      if (q.g[i] <= 0.0) dg[i] = 0.0;
    }
    dy_b[s] = std::move(dg);
  }

  const auto bn_backward = [&](double gamma, double var, bool batch_stats,
                               double sum_dy, double sum_dy_xhat, double count,
                               double dy, double xhat) {
    const double inv = 1.0 / std::sqrt(var + InversionModel::kBnEps);
    if (!batch_stats) return gamma * inv * dy;
    return gamma * inv / count * (count * dy - sum_dy - xhat * sum_dy_xhat);
  };

  // Second normalization (single channel).
  {
    double sum_dy = 0.0, sum_dyx = 0.0, count = 0.0;
    for (std::size_t s = 0; s < m.seqs.size(); ++s) {
      for (std::size_t i = 0; i < dy_b[s].size(); ++i) {
        sum_dy += dy_b[s][i];
        sum_dyx += dy_b[s][i] * m.seqs[s].xhat2[i];
      }
      count += static_cast<double>(dy_b[s].size());
    }
    gs(L.bn_b_gamma)[0] += sum_dyx;
    gs(L.bn_b_beta)[0] += sum_dy;
    const double gamma_b = *m.p(L.bn_b_gamma);
    for (std::size_t s = 0; s < m.seqs.size(); ++s) {
      for (std::size_t i = 0; i < dy_b[s].size(); ++i) {
        dy_b[s][i] = bn_backward(gamma_b, m.var_b, m.training(), sum_dy, sum_dyx,
                                 count, dy_b[s][i], m.seqs[s].xhat2[i]);
      }
    }
  }

  // conv_b backward into the first block's activations, then its ReLU.
  std::vector<std::vector<double>> dy_a(m.seqs.size());
  for (std::size_t s = 0; s < m.seqs.size(); ++s) {
    const auto& q = m.seqs[s];
    dy_a[s].assign(C1 * q.T * D, 0.0);
    conv3x3_backward(q.h1.data(), C1, m.p(L.conv_b_w), 1, q.T, D, dy_b[s].data(),
                     dy_a[s].data(), gs(L.conv_b_w));
    for (std::size_t i = 0; i < dy_a[s].size(); ++i) {
      if (q.h1[i] <= 0.0) dy_a[s][i] = 0.0;
    }
  }

  const double* gamma_a = m.p(L.bn_a_gamma);
  for (std::size_t c = 0; c < C1; ++c) {
    double sum_dy = 0.0, sum_dyx = 0.0, count = 0.0;
    for (std::size_t s = 0; s < m.seqs.size(); ++s) {
      const std::size_t n = m.seqs[s].T * D;
      for (std::size_t i = c * n; i < (c + 1) * n; ++i) {
        sum_dy += dy_a[s][i];
        sum_dyx += dy_a[s][i] * m.seqs[s].xhat1[i];
      }
      count += static_cast<double>(n);
    }
    gs(L.bn_a_gamma)[c] += sum_dyx;
    gs(L.bn_a_beta)[c] += sum_dy;
    for (std::size_t s = 0; s < m.seqs.size(); ++s) {
      const std::size_t n = m.seqs[s].T * D;
      for (std::size_t i = c * n; i < (c + 1) * n; ++i) {
        dy_a[s][i] = bn_backward(gamma_a[c], m.var_a[c], m.training(), sum_dy,
                                 sum_dyx, count, dy_a[s][i], m.seqs[s].xhat1[i]);
      }
    }
  }

  for (std::size_t s = 0; s < m.seqs.size(); ++s) {
    const auto& q = m.seqs[s];
    conv3x3_backward(q.emb->values.data(), d.layers, m.p(L.conv_a_w), C1, q.T, D,
                     dy_a[s].data(), nullptr, gs(L.conv_a_w));
  }
}

TractVariableMatrix forward(const InversionModel& model, const EmbeddingTensor& emb,
                            bool training_mode, Rng* rng) {
  const EmbeddingTensor* ptr = &emb;
  ForwardOptions opt;
  opt.mode = training_mode ? Mode::Training : Mode::Inference;
  opt.dropout = training_mode;
  opt.rng = rng;
  Rng fallback(mix_seed(model.seed, 23));
  if (training_mode && rng == nullptr) opt.rng = &fallback;
  BatchForward fwd(model, std::span<const EmbeddingTensor* const>(&ptr, 1), opt);
  return fwd.outputs().front();
}

}  // namespace vtv::inversion
