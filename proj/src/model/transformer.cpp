// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/model/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tickets/errors.hpp"

namespace tickets::model {
namespace {

using corpus::Category;

// ---------------------------------------------------------------------------
// Parameter views

struct LayerView {
    double *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    double *ln1_g, *ln1_b;
    double *w1, *b1, *w2, *b2;
    double *ln2_g, *ln2_b;
};

struct View {
    double *tok, *pos, *ln_g, *ln_b;
    std::vector<LayerView> layers;
    double *mlm_w, *mlm_b, *tag_w, *tag_b, *cls_w, *cls_b;
};

std::string layer_name(std::size_t l, const char* leaf) { return "layer" + std::to_string(l) + "." + leaf; }

View make_view(const ModelConfig& cfg, const ParamSet& ps) {
    auto& p = const_cast<ParamSet&>(ps);
    auto get = [&](const std::string& name) { return p.at(name).values.data(); };
    View v{};
    v.tok = get("embed.tok");
    v.pos = get("embed.pos");
    v.ln_g = get("embed.ln.gain");
    v.ln_b = get("embed.ln.bias");
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        LayerView lv{};
        lv.wq = get(layer_name(l, "attn.wq"));
        lv.bq = get(layer_name(l, "attn.bq"));
        lv.wk = get(layer_name(l, "attn.wk"));
        lv.bk = get(layer_name(l, "attn.bk"));
        lv.wv = get(layer_name(l, "attn.wv"));
        lv.bv = get(layer_name(l, "attn.bv"));
        lv.wo = get(layer_name(l, "attn.wo"));
        lv.bo = get(layer_name(l, "attn.bo"));
        lv.ln1_g = get(layer_name(l, "ln1.gain"));
        lv.ln1_b = get(layer_name(l, "ln1.bias"));
        lv.w1 = get(layer_name(l, "ffn.w1"));
        lv.b1 = get(layer_name(l, "ffn.b1"));
        lv.w2 = get(layer_name(l, "ffn.w2"));
        lv.b2 = get(layer_name(l, "ffn.b2"));
        lv.ln2_g = get(layer_name(l, "ln2.gain"));
        lv.ln2_b = get(layer_name(l, "ln2.bias"));
        v.layers.push_back(lv);
    }
    v.mlm_w = get("head.mlm.w");
    v.mlm_b = get("head.mlm.b");
    v.tag_w = get("head.tag.w");
    v.tag_b = get("head.tag.b");
    v.cls_w = get("head.cls.w");
    v.cls_b = get("head.cls.b");
    return v;
}

// Transposed copies of the encoder matrices, used for the input-gradient products.
struct Transposed {
    struct Layer {
        std::vector<double> wq, wk, wv, wo, w1, w2;
    };
    std::vector<Layer> layers;
};

std::vector<double> transpose(const double* w, std::size_t rows, std::size_t cols) {
    std::vector<double> t(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = w[r * cols + c];
    return t;
}

Transposed make_transposed(const ModelConfig& cfg, const View& v) {
    const std::size_t d = cfg.embed_dim;
    const std::size_t f = cfg.ffn_dim;
    Transposed t;
    for (const auto& lv : v.layers) {
        t.layers.push_back({transpose(lv.wq, d, d), transpose(lv.wk, d, d), transpose(lv.wv, d, d),
                            transpose(lv.wo, d, d), transpose(lv.w1, d, f), transpose(lv.w2, f, d)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Kernels. Row-major throughout; weights are stored (in x out) so y = x W + b.
// Output columns are processed in register-resident blocks of kBlock.

constexpr std::size_t kBlock = 8;

// c[m x n] = a[m x k] * b[k x n] (+ init row, broadcast over m, when non-null).
void gemm_nn(const double* a, std::size_t m, std::size_t k, const double* b, std::size_t n, const double* init,
             double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ar = a + i * k;
        double* cr = c + i * n;
        std::size_t j0 = 0;
        for (; j0 + kBlock <= n; j0 += kBlock) {
            double acc[kBlock];
            for (std::size_t j = 0; j < kBlock; ++j) acc[j] = init ? init[j0 + j] : 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = ar[p];
                const double* br = b + p * n + j0;
                for (std::size_t j = 0; j < kBlock; ++j) acc[j] += av * br[j];
            }
            for (std::size_t j = 0; j < kBlock; ++j) cr[j0 + j] = acc[j];
        }
        for (std::size_t j = j0; j < n; ++j) {
            double acc = init ? init[j] : 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ar[p] * b[p * n + j];
            cr[j] = acc;
        }
    }
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn_acc(const double* a, std::size_t m, std::size_t k, const double* b, std::size_t n, double* c) {
    for (std::size_t p = 0; p < k; ++p) {
        double* cr = c + p * n;
        std::size_t j0 = 0;
        for (; j0 + kBlock <= n; j0 += kBlock) {
            double acc[kBlock];
            for (std::size_t j = 0; j < kBlock; ++j) acc[j] = cr[j0 + j];
            for (std::size_t i = 0; i < m; ++i) {
                const double av = a[i * k + p];
                const double* br = b + i * n + j0;
                for (std::size_t j = 0; j < kBlock; ++j) acc[j] += av * br[j];
            }
            for (std::size_t j = 0; j < kBlock; ++j) cr[j0 + j] = acc[j];
        }
        for (std::size_t j = j0; j < n; ++j) {
            double acc = cr[j];
            for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * b[i * n + j];
            cr[j] = acc;
        }
    }
}

void linear(const double* x, std::size_t rows, std::size_t in, const double* w, const double* b,
            std::size_t out, double* y) {
    gemm_nn(x, rows, in, w, out, b, y);
}

// dW += x^T dy, db += colsum(dy), dx = dy W^T (w_t is W transposed, out x in).
// dx may be null.
void linear_backward(const double* x, std::size_t rows, std::size_t in, const double* w_t,
                     std::size_t out, const double* dy, double* dw, double* db, double* dx) {
    gemm_tn_acc(x, rows, in, dy, out, dw);
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t o = 0; o < out; ++o) db[o] += dy[t * out + o];
    if (dx) gemm_nn(dy, rows, out, w_t, in, nullptr, dx);
}

void layer_norm(const double* x, std::size_t rows, std::size_t d, const double* g, const double* b, double eps,
                double* y, double* xhat, double* rstd) {
    for (std::size_t t = 0; t < rows; ++t) {
        const double* xr = x + t * d;
        double mean = 0.0;
        for (std::size_t i = 0; i < d; ++i) mean += xr[i];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
        var /= static_cast<double>(d);
        const double rs = 1.0 / std::sqrt(var + eps);
        rstd[t] = rs;
        for (std::size_t i = 0; i < d; ++i) {
            const double h = (xr[i] - mean) * rs;
            xhat[t * d + i] = h;
            y[t * d + i] = g[i] * h + b[i];
        }
    }
}

// dx = rstd * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)), dxhat = dy * g.
void layer_norm_backward(const double* dy, const double* xhat, const double* rstd, std::size_t rows,
                         std::size_t d, const double* g, double* dg, double* db, double* dx) {
    const double inv_d = 1.0 / static_cast<double>(d);
    for (std::size_t t = 0; t < rows; ++t) {
        const double* dyr = dy + t * d;
        const double* xr = xhat + t * d;
        double sum_dxh = 0.0;
        double sum_dxh_x = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double dxh = dyr[i] * g[i];
            sum_dxh += dxh;
            sum_dxh_x += dxh * xr[i];
            dg[i] += dyr[i] * xr[i];
            db[i] += dyr[i];
        }
        const double m1 = sum_dxh * inv_d;
        const double m2 = sum_dxh_x * inv_d;
        for (std::size_t i = 0; i < d; ++i) dx[t * d + i] = rstd[t] * (dyr[i] * g[i] - m1 - xr[i] * m2);
    }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

inline double gelu_tanh(double z) { return std::tanh(kGeluC * (z + kGeluA * z * z * z)); }

inline double gelu(double z, double t) { return 0.5 * z * (1.0 + t); }

// t is gelu_tanh(z), kept from the forward pass.
inline double gelu_grad(double z, double t) {
    return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * z * z);
}

// Softmax in place; returns log-sum-exp.
double softmax_inplace(double* v, std::size_t n) {
    double mx = v[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::exp(v[i] - mx);
        s += v[i];
    }
    const double inv = 1.0 / s;
    for (std::size_t i = 0; i < n; ++i) v[i] *= inv;
    return mx + std::log(s);
}

std::size_t argmax(const double* v, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

// ---------------------------------------------------------------------------
// Per-example activations.

struct LayerCache {
    std::vector<double> x_in, q, k, v, att, o, u, xhat1, rstd1, h1, z, th, f, v2, xhat2, rstd2, out;
};

struct Cache {
    std::size_t len = 0;
    std::vector<double> e, xhat0, rstd0, x0;
    std::vector<LayerCache> layers;
    const std::vector<double>& final_hidden() const { return layers.empty() ? x0 : layers.back().out; }
};

void encode(const ModelConfig& cfg, const View& v, const std::vector<int>& tokens, Cache& c) {
    const std::size_t n = tokens.size();
    const std::size_t d = cfg.embed_dim;
    const std::size_t f = cfg.ffn_dim;
    const std::size_t heads = cfg.heads;
    const std::size_t dh = cfg.head_dim();
    require(n >= 1 && n <= cfg.max_len, "forward: sequence length exceeds max_len");
    c.len = n;
    c.e.assign(n * d, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        const int tok = tokens[t];
        require(tok >= 0 && static_cast<std::size_t>(tok) < cfg.vocab_size, "forward: token id out of range");
        const double* te = v.tok + static_cast<std::size_t>(tok) * d;
        const double* pe = v.pos + t * d;
        for (std::size_t i = 0; i < d; ++i) c.e[t * d + i] = te[i] + pe[i];
    }
    c.xhat0.resize(n * d);
    c.rstd0.resize(n);
    c.x0.resize(n * d);
    layer_norm(c.e.data(), n, d, v.ln_g, v.ln_b, cfg.ln_eps, c.x0.data(), c.xhat0.data(), c.rstd0.data());

    c.layers.resize(cfg.layers);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::vector<double>* input = &c.x0;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const LayerView& w = v.layers[l];
        LayerCache& lc = c.layers[l];
        lc.x_in = *input;
        lc.q.resize(n * d);
        lc.k.resize(n * d);
        lc.v.resize(n * d);
        linear(lc.x_in.data(), n, d, w.wq, w.bq, d, lc.q.data());
        linear(lc.x_in.data(), n, d, w.wk, w.bk, d, lc.k.data());
        linear(lc.x_in.data(), n, d, w.wv, w.bv, d, lc.v.data());

        lc.att.assign(heads * n * n, 0.0);
        lc.o.assign(n * d, 0.0);
        for (std::size_t h = 0; h < heads; ++h) {
            double* a = lc.att.data() + h * n * n;
            for (std::size_t i = 0; i < n; ++i) {
                const double* qi = lc.q.data() + i * d + h * dh;
                for (std::size_t j = 0; j < n; ++j) {
                    const double* kj = lc.k.data() + j * d + h * dh;
                    double s = 0.0;
                    for (std::size_t x = 0; x < dh; ++x) s += qi[x] * kj[x];
                    a[i * n + j] = s * scale;
                }
                softmax_inplace(a + i * n, n);
                double* oi = lc.o.data() + i * d + h * dh;
                for (std::size_t j = 0; j < n; ++j) {
                    const double aij = a[i * n + j];
                    const double* vj = lc.v.data() + j * d + h * dh;
                    for (std::size_t x = 0; x < dh; ++x) oi[x] += aij * vj[x];
                }
            }
        }
        lc.u.resize(n * d);
        linear(lc.o.data(), n, d, w.wo, w.bo, d, lc.u.data());
        for (std::size_t i = 0; i < n * d; ++i) lc.u[i] += lc.x_in[i];
        lc.xhat1.resize(n * d);
        lc.rstd1.resize(n);
        lc.h1.resize(n * d);
        layer_norm(lc.u.data(), n, d, w.ln1_g, w.ln1_b, cfg.ln_eps, lc.h1.data(), lc.xhat1.data(), lc.rstd1.data());

        lc.z.resize(n * f);
        lc.f.resize(n * f);
        linear(lc.h1.data(), n, d, w.w1, w.b1, f, lc.z.data());
        lc.th.resize(n * f);
        for (std::size_t i = 0; i < n * f; ++i) {
            lc.th[i] = gelu_tanh(lc.z[i]);
            lc.f[i] = gelu(lc.z[i], lc.th[i]);
        }
        lc.v2.resize(n * d);
        linear(lc.f.data(), n, f, w.w2, w.b2, d, lc.v2.data());
        for (std::size_t i = 0; i < n * d; ++i) lc.v2[i] += lc.h1[i];
        lc.xhat2.resize(n * d);
        lc.rstd2.resize(n);
        lc.out.resize(n * d);
        layer_norm(lc.v2.data(), n, d, w.ln2_g, w.ln2_b, cfg.ln_eps, lc.out.data(), lc.xhat2.data(), lc.rstd2.data());
        input = &lc.out;
    }
}

// Backpropagates d(final hidden) through the encoder into `g`.
void encode_backward(const ModelConfig& cfg, const View& v, const Transposed& vt, const std::vector<int>& tokens,
                     const Cache& c, std::vector<double> dh_out, View& g) {
    const std::size_t n = c.len;
    const std::size_t d = cfg.embed_dim;
    const std::size_t f = cfg.ffn_dim;
    const std::size_t heads = cfg.heads;
    const std::size_t dh = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<double> dv2(n * d), dh1(n * d), dfv(n * f), du(n * d), dout_attn(n * d);
    std::vector<double> dq(n * d), dk(n * d), dvv(n * d), dx(n * d), tmp(n * d), da(n);
    for (std::size_t l = cfg.layers; l-- > 0;) {
        const LayerView& w = v.layers[l];
        const auto& wt = vt.layers[l];
        LayerView& gw = g.layers[l];
        const LayerCache& lc = c.layers[l];

        layer_norm_backward(dh_out.data(), lc.xhat2.data(), lc.rstd2.data(), n, d, w.ln2_g, gw.ln2_g, gw.ln2_b,
                            dv2.data());
        // v2 = h1 + f W2 + b2
        linear_backward(lc.f.data(), n, f, wt.w2.data(), d, dv2.data(), gw.w2, gw.b2, dfv.data());
        for (std::size_t i = 0; i < n * f; ++i) dfv[i] *= gelu_grad(lc.z[i], lc.th[i]);
        linear_backward(lc.h1.data(), n, d, wt.w1.data(), f, dfv.data(), gw.w1, gw.b1, dh1.data());
        for (std::size_t i = 0; i < n * d; ++i) dh1[i] += dv2[i];

        layer_norm_backward(dh1.data(), lc.xhat1.data(), lc.rstd1.data(), n, d, w.ln1_g, gw.ln1_g, gw.ln1_b,
                            du.data());
        // u = x_in + o Wo + bo
        linear_backward(lc.o.data(), n, d, wt.wo.data(), d, du.data(), gw.wo, gw.bo, dout_attn.data());

        std::fill(dq.begin(), dq.end(), 0.0);
        std::fill(dk.begin(), dk.end(), 0.0);
        std::fill(dvv.begin(), dvv.end(), 0.0);
        for (std::size_t h = 0; h < heads; ++h) {
            const double* a = lc.att.data() + h * n * n;
            for (std::size_t i = 0; i < n; ++i) {
                const double* doi = dout_attn.data() + i * d + h * dh;
                double dot_sum = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double* vj = lc.v.data() + j * d + h * dh;
                    double s = 0.0;
                    for (std::size_t x = 0; x < dh; ++x) s += doi[x] * vj[x];
                    da[j] = s;
                    dot_sum += s * a[i * n + j];
                    double* dvj = dvv.data() + j * d + h * dh;
                    const double aij = a[i * n + j];
                    for (std::size_t x = 0; x < dh; ++x) dvj[x] += aij * doi[x];
                }
                const double* qi = lc.q.data() + i * d + h * dh;
                double* dqi = dq.data() + i * d + h * dh;
                for (std::size_t j = 0; j < n; ++j) {
                    const double ds = a[i * n + j] * (da[j] - dot_sum) * scale;
                    const double* kj = lc.k.data() + j * d + h * dh;
                    double* dkj = dk.data() + j * d + h * dh;
                    for (std::size_t x = 0; x < dh; ++x) {
                        dqi[x] += ds * kj[x];
                        dkj[x] += ds * qi[x];
                    }
                }
            }
        }
        // x_in feeds q, k, v and the residual.
        linear_backward(lc.x_in.data(), n, d, wt.wq.data(), d, dq.data(), gw.wq, gw.bq, dx.data());
        linear_backward(lc.x_in.data(), n, d, wt.wk.data(), d, dk.data(), gw.wk, gw.bk, tmp.data());
        for (std::size_t i = 0; i < n * d; ++i) dx[i] += tmp[i];
        linear_backward(lc.x_in.data(), n, d, wt.wv.data(), d, dvv.data(), gw.wv, gw.bv, tmp.data());
        for (std::size_t i = 0; i < n * d; ++i) dh_out[i] = dx[i] + tmp[i] + du[i];
    }
    std::vector<double> de(n * d);
    layer_norm_backward(dh_out.data(), c.xhat0.data(), c.rstd0.data(), n, d, v.ln_g, g.ln_g, g.ln_b, de.data());
    for (std::size_t t = 0; t < n; ++t) {
        double* gt = g.tok + static_cast<std::size_t>(tokens[t]) * d;
        double* gp = g.pos + t * d;
        for (std::size_t i = 0; i < d; ++i) {
            gt[i] += de[t * d + i];
            gp[i] += de[t * d + i];
        }
    }
}

std::size_t unit_count(const Example& ex, TaskKind task) {
    switch (task) {
        case TaskKind::MLM:
            return static_cast<std::size_t>(std::count_if(ex.labels.begin(), ex.labels.end(), [](int l) { return l >= 0; }));
        case TaskKind::TAG: return ex.tokens.size();
        case TaskKind::CLS: return 1;
    }
    return 0;
}

void check_example(const ModelConfig& cfg, const Example& ex, TaskKind task) {
    require(ex.task == task, "forward: example task does not match task_kind");
    switch (task) {
        case TaskKind::MLM:
            require(ex.labels.size() == ex.tokens.size(), "forward: MLM labels must align with tokens");
            for (int l : ex.labels) require(l < static_cast<int>(cfg.vocab_size), "forward: MLM target out of range");
            break;
        case TaskKind::TAG:
            require(ex.labels.size() == ex.tokens.size(), "forward: TAG labels must align with tokens");
            for (int l : ex.labels)
                require(l >= 0 && static_cast<std::size_t>(l) < cfg.tag_classes, "forward: TAG label out of range");
            break;
        case TaskKind::CLS:
            require(ex.labels.size() == 1 && ex.labels[0] >= 0 &&
                        static_cast<std::size_t>(ex.labels[0]) < cfg.cls_classes,
                    "forward: CLS example needs one label in range");
            break;
    }
}

struct HeadShape {
    const double* w;
    const double* b;
    std::size_t classes;
};

HeadShape head_of(const ModelConfig& cfg, const View& v, TaskKind task) {
    switch (task) {
        case TaskKind::MLM: return {v.mlm_w, v.mlm_b, cfg.vocab_size};
        case TaskKind::TAG: return {v.tag_w, v.tag_b, cfg.tag_classes};
        case TaskKind::CLS: return {v.cls_w, v.cls_b, cfg.cls_classes};
    }
    return {nullptr, nullptr, 0};
}

// Logits for one hidden vector.
void head_logits(const HeadShape& h, const double* hidden, std::size_t d, double* logits) {
    for (std::size_t o = 0; o < h.classes; ++o) logits[o] = h.b[o];
    for (std::size_t k = 0; k < d; ++k) {
        const double a = hidden[k];
        const double* wr = h.w + k * h.classes;
        for (std::size_t o = 0; o < h.classes; ++o) logits[o] += a * wr[o];
    }
}

// The hidden vectors a task's loss reads, as (row offset into final hidden, weight).
// CLS pools the mean of every token.
struct Readout {
    std::vector<double> pooled;  // CLS only
};

// Visits each loss unit: calls fn(hidden_ptr, target, unit_index, position) where
// position == SIZE_MAX for the pooled CLS unit.
template <typename Fn>
void for_each_unit(const ModelConfig& cfg, const Example& ex, TaskKind task, const std::vector<double>& hidden,
                   Readout& ro, Fn&& fn) {
    const std::size_t d = cfg.embed_dim;
    const std::size_t n = ex.tokens.size();
    switch (task) {
        case TaskKind::MLM:
            for (std::size_t t = 0; t < n; ++t)
                if (ex.labels[t] >= 0) fn(hidden.data() + t * d, ex.labels[t], t);
            break;
        case TaskKind::TAG:
            for (std::size_t t = 0; t < n; ++t) fn(hidden.data() + t * d, ex.labels[t], t);
            break;
        case TaskKind::CLS: {
            ro.pooled.assign(d, 0.0);
            for (std::size_t t = 0; t < n; ++t)
                for (std::size_t i = 0; i < d; ++i) ro.pooled[i] += hidden[t * d + i];
            for (double& x : ro.pooled) x /= static_cast<double>(n);
            fn(ro.pooled.data(), ex.labels[0], static_cast<std::size_t>(-1));
            break;
        }
    }
}

// Forward + (optional) backward for one example. Returns summed cross-entropy.
double example_pass(const ModelConfig& cfg, const View& v, const Transposed* vt, const Example& ex, TaskKind task,
                    double grad_scale, View* g, Cache& cache, Predictions* preds) {
    encode(cfg, v, ex.tokens, cache);
    const std::size_t d = cfg.embed_dim;
    const std::size_t n = ex.tokens.size();
    const auto& hidden = cache.final_hidden();
    const HeadShape head = head_of(cfg, v, task);
    std::vector<double> logits(head.classes);
    std::vector<double> dhidden;
    if (g) dhidden.assign(n * d, 0.0);
    Readout ro;
    double loss = 0.0;
    for_each_unit(cfg, ex, task, hidden, ro, [&](const double* h, int target, std::size_t pos) {
        head_logits(head, h, d, logits.data());
        if (preds) {
            preds->predicted.push_back(static_cast<int>(argmax(logits.data(), head.classes)));
            preds->gold.push_back(target);
        }
        const double lse = softmax_inplace(logits.data(), head.classes);
        (void)lse;
        const double p = logits[static_cast<std::size_t>(target)];
        loss += -std::log(std::max(p, 1e-300));
        if (!g) return;
        HeadShape gh = head_of(cfg, *g, task);
        auto* gw = const_cast<double*>(gh.w);
        auto* gb = const_cast<double*>(gh.b);
        logits[static_cast<std::size_t>(target)] -= 1.0;
        for (std::size_t o = 0; o < head.classes; ++o) logits[o] *= grad_scale;
        for (std::size_t o = 0; o < head.classes; ++o) gb[o] += logits[o];
        std::vector<double> dh(d, 0.0);
        for (std::size_t k = 0; k < d; ++k) {
            const double a = h[k];
            double* gwr = gw + k * head.classes;
            const double* wr = head.w + k * head.classes;
            double s = 0.0;
            for (std::size_t o = 0; o < head.classes; ++o) {
                gwr[o] += a * logits[o];
                s += wr[o] * logits[o];
            }
            dh[k] = s;
        }
        if (pos == static_cast<std::size_t>(-1)) {
            const double inv = 1.0 / static_cast<double>(n);
            for (std::size_t t = 0; t < n; ++t)
                for (std::size_t k = 0; k < d; ++k) dhidden[t * d + k] += dh[k] * inv;
        } else {
            for (std::size_t k = 0; k < d; ++k) dhidden[pos * d + k] += dh[k];
        }
    });
    if (g) encode_backward(cfg, v, *vt, ex.tokens, cache, std::move(dhidden), *g);
    return loss;
}

ParamSet masked_copy(const ParamSet& params, const masks::Mask* mask) {
    ParamSet p = params;
    if (mask) mask->apply(p);
    return p;
}

double init_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

void fill_uniform(ParamEntry& e, double bound, std::uint64_t seed) {
    num::Rng rng(num::derive_seed(seed, {num::hash_tag(e.name)}));
    for (double& x : e.values) x = rng.uniform(-bound, bound);
}

}  // namespace

void ModelConfig::validate() const {
    require(vocab_size > 0, "ModelConfig: vocab_size must be positive");
    require(embed_dim > 0 && heads > 0 && embed_dim % heads == 0, "ModelConfig: embed_dim must be divisible by heads");
    require(layers > 0 && ffn_dim > 0 && max_len > 0, "ModelConfig: dimensions must be positive");
    require(tag_classes > 0 && cls_classes > 0, "ModelConfig: head sizes must be positive");
}

ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t d = cfg.embed_dim;
    const std::size_t f = cfg.ffn_dim;
    ParamSet p;
    auto weight = [&](const std::string& name, std::size_t in, std::size_t out, bool prunable) {
        fill_uniform(p.add(name, {in, out}, prunable), init_bound(in), seed);
    };
    auto bias = [&](const std::string& name, std::size_t n) { p.add(name, {n}, cfg.prune_biases); };
    auto gain = [&](const std::string& name) {
        auto& e = p.add(name, {d}, false);
        std::fill(e.values.begin(), e.values.end(), 1.0);
    };

    weight("embed.tok", cfg.vocab_size, d, false);
    fill_uniform(p.at("embed.tok"), init_bound(d), seed);
    weight("embed.pos", cfg.max_len, d, false);
    fill_uniform(p.at("embed.pos"), init_bound(d), seed);
    gain("embed.ln.gain");
    p.add("embed.ln.bias", {d}, false);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        weight(layer_name(l, "attn.wq"), d, d, true);
        bias(layer_name(l, "attn.bq"), d);
        weight(layer_name(l, "attn.wk"), d, d, true);
        bias(layer_name(l, "attn.bk"), d);
        weight(layer_name(l, "attn.wv"), d, d, true);
        bias(layer_name(l, "attn.bv"), d);
        weight(layer_name(l, "attn.wo"), d, d, true);
        bias(layer_name(l, "attn.bo"), d);
        gain(layer_name(l, "ln1.gain"));
        p.add(layer_name(l, "ln1.bias"), {d}, false);
        weight(layer_name(l, "ffn.w1"), d, f, true);
        bias(layer_name(l, "ffn.b1"), f);
        weight(layer_name(l, "ffn.w2"), f, d, true);
        bias(layer_name(l, "ffn.b2"), d);
        gain(layer_name(l, "ln2.gain"));
        p.add(layer_name(l, "ln2.bias"), {d}, false);
    }
    weight("head.mlm.w", d, cfg.vocab_size, false);
    p.add("head.mlm.b", {cfg.vocab_size}, false);
    weight("head.tag.w", d, cfg.tag_classes, false);
    p.add("head.tag.b", {cfg.tag_classes}, false);
    weight("head.cls.w", d, cfg.cls_classes, false);
    p.add("head.cls.b", {cfg.cls_classes}, false);
    return p;
}

void reinit_task_head(const ModelConfig& cfg, ParamSet& params, TaskKind task, std::uint64_t seed) {
    const char* prefix = nullptr;
    switch (task) {
        case TaskKind::MLM: return;
        case TaskKind::TAG: prefix = "head.tag"; break;
        case TaskKind::CLS: prefix = "head.cls"; break;
    }
    auto& w = params.at(std::string(prefix) + ".w");
    fill_uniform(w, init_bound(cfg.embed_dim), seed);
    auto& b = params.at(std::string(prefix) + ".b");
    std::fill(b.values.begin(), b.values.end(), 0.0);
}

ForwardResult forward(const ModelConfig& cfg, const ParamSet& params, const masks::Mask* mask,
                      std::span<const Example> batch, TaskKind task, bool capture_layers) {
    const ParamSet eff = masked_copy(params, mask);
    const View v = make_view(cfg, eff);
    ForwardResult r;
    Cache cache;
    double total = 0.0;
    for (const auto& ex : batch) {
        check_example(cfg, ex, task);
        total += example_pass(cfg, v, nullptr, ex, task, 0.0, nullptr, cache, nullptr);
        r.units += unit_count(ex, task);
        if (capture_layers) {
            const std::size_t n = ex.tokens.size();
            std::vector<num::Matrix> reps;
            reps.emplace_back(n, cfg.embed_dim, cache.x0);
            for (const auto& lc : cache.layers) reps.emplace_back(n, cfg.embed_dim, lc.out);
            r.representations.push_back(std::move(reps));
        }
    }
    r.loss = r.units == 0 ? 0.0 : total / static_cast<double>(r.units);
    return r;
}

double loss_and_grad(const ModelConfig& cfg, const ParamSet& params, std::span<const Example> batch,
                     TaskKind task, ParamSet& grad) {
    require(grad.same_layout(params), "loss_and_grad: gradient layout differs from parameters");
    std::size_t units = 0;
    for (const auto& ex : batch) {
        check_example(cfg, ex, task);
        units += unit_count(ex, task);
    }
    if (units == 0) return 0.0;
    const View v = make_view(cfg, params);
    const Transposed vt = make_transposed(cfg, v);
    View g = make_view(cfg, grad);
    const double scale = 1.0 / static_cast<double>(units);
    Cache cache;
    double total = 0.0;
    for (const auto& ex : batch) total += example_pass(cfg, v, &vt, ex, task, scale, &g, cache, nullptr);
    return total * scale;
}

void log_likelihood_grad(const ModelConfig& cfg, const ParamSet& params, const Example& example, TaskKind task,
                         ParamSet& grad, num::Rng* sample_rng) {
    require(grad.same_layout(params), "log_likelihood_grad: gradient layout differs from parameters");
    check_example(cfg, example, task);
    const View v = make_view(cfg, params);
    const Transposed vt = make_transposed(cfg, v);
    View g = make_view(cfg, grad);
    Cache cache;
    Example ex = example;
    if (sample_rng) {
        encode(cfg, v, ex.tokens, cache);
        const HeadShape head = head_of(cfg, v, task);
        std::vector<double> logits(head.classes);
        Readout ro;
        std::vector<std::pair<std::size_t, int>> drawn;
        for_each_unit(cfg, ex, task, cache.final_hidden(), ro, [&](const double* h, int, std::size_t pos) {
            head_logits(head, h, cfg.embed_dim, logits.data());
            softmax_inplace(logits.data(), head.classes);
            const double u = sample_rng->uniform();
            double acc = 0.0;
            std::size_t pick = head.classes - 1;
            for (std::size_t o = 0; o < head.classes; ++o) {
                acc += logits[o];
                if (u < acc) {
                    pick = o;
                    break;
                }
            }
            drawn.emplace_back(pos, static_cast<int>(pick));
        });
        for (const auto& [pos, label] : drawn) {
            if (pos == static_cast<std::size_t>(-1)) ex.labels[0] = label;
            else ex.labels[pos] = label;
        }
    }
    // The gradient of the log-likelihood is minus the cross-entropy gradient.
    example_pass(cfg, v, &vt, ex, task, -1.0, &g, cache, nullptr);
}

std::vector<num::Matrix> pooled_representations(const ModelConfig& cfg, const ParamSet& params,
                                                const masks::Mask* mask,
                                                std::span<const std::vector<int>> sentences) {
    const ParamSet eff = masked_copy(params, mask);
    const View v = make_view(cfg, eff);
    const std::size_t d = cfg.embed_dim;
    std::vector<num::Matrix> out(cfg.layers + 1, num::Matrix(sentences.size(), d));
    Cache cache;
    for (std::size_t s = 0; s < sentences.size(); ++s) {
        encode(cfg, v, sentences[s], cache);
        const std::size_t n = cache.len;
        auto pool = [&](const std::vector<double>& h, num::Matrix& m) {
            for (std::size_t t = 0; t < n; ++t)
                for (std::size_t i = 0; i < d; ++i) m(s, i) += h[t * d + i];
            for (std::size_t i = 0; i < d; ++i) m(s, i) /= static_cast<double>(n);
        };
        pool(cache.x0, out[0]);
        for (std::size_t l = 0; l < cfg.layers; ++l) pool(cache.layers[l].out, out[l + 1]);
    }
    return out;
}

double perplexity(double mean_cross_entropy) { return std::exp(mean_cross_entropy); }

double tag_micro_f1(std::span<const int> gold, std::span<const int> predicted) {
    require(gold.size() == predicted.size(), "tag_micro_f1: length mismatch");
    const int outside = static_cast<int>(Category::Filler);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool g_in = gold[i] != outside;
        const bool p_in = predicted[i] != outside;
        if (p_in && g_in && predicted[i] == gold[i]) ++tp;
        else {
            if (p_in) ++fp;
            if (g_in) ++fn;
        }
    }
    if (tp + fp + fn == 0) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double accuracy(std::span<const int> gold, std::span<const int> predicted) {
    require(gold.size() == predicted.size(), "accuracy: length mismatch");
    if (gold.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) hit += gold[i] == predicted[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(gold.size());
}

Predictions predict(const ModelConfig& cfg, const ParamSet& params, const masks::Mask* mask,
                    std::span<const Example> examples, TaskKind task) {
    const ParamSet eff = masked_copy(params, mask);
    const View v = make_view(cfg, eff);
    Predictions p;
    Cache cache;
    for (const auto& ex : examples) {
        check_example(cfg, ex, task);
        p.cross_entropy_sum += example_pass(cfg, v, nullptr, ex, task, 0.0, nullptr, cache, &p);
        p.units += unit_count(ex, task);
    }
    return p;
}

}  // namespace tickets::model
