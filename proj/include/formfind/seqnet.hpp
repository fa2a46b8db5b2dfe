#pragma once

// Small transformer encoder for per-point sequence regression
// (x,y,z,u -> curvature + tangent), with hand-written reverse-mode
// gradients and adaptive-moment training.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "formfind/data.hpp"
#include "formfind/util.hpp"

namespace formfind::seqnet {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

struct ModelConfig {
    int d_model = 32;
    int n_heads = 2;
    int n_layers = 2;
    int d_ff = 64;
    int in_channels = 4;
    int out_channels = 4;
    int seq_len = 21;

    void validate() const {
        if (d_model < 1 || n_heads < 1 || n_layers < 1 || d_ff < 1 || seq_len < 1 ||
            in_channels < 1 || out_channels < 1)
            throw std::invalid_argument("model dimensions must be >= 1");
        if (d_model % n_heads != 0)
            throw std::invalid_argument("d_model must be divisible by n_heads");
    }
};

struct TrainConfig {
    int batch_size = 32;
    int epochs = 100;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool plain_sgd = false;  // switch off the moment estimates

    void validate() const {
        if (batch_size < 1 || epochs < 1) throw std::invalid_argument("bad train config");
    }
};

struct LayerParams {
    MatrixXd wq, wk, wv, wo;       // d_model x d_model
    RowVectorXd bq, bk, bv, bo;    // d_model
    MatrixXd w1;                   // d_model x d_ff
    RowVectorXd b1;                // d_ff
    MatrixXd w2;                   // d_ff x d_model
    RowVectorXd b2;                // d_model
    RowVectorXd ln1_gain, ln1_bias, ln2_gain, ln2_bias;  // d_model
};

struct ModelParameters {
    MatrixXd w_in;    // in_channels x d_model
    RowVectorXd b_in;
    std::vector<LayerParams> layers;
    MatrixXd w_out;   // d_model x out_channels
    RowVectorXd b_out;
};

// Flat view of one parameter block, used by the optimizer, the gradient
// checker and serialization. Enumeration order is fixed.
struct ParamRef {
    std::string name;
    double* values;
    Eigen::Index size;
};

inline std::vector<ParamRef> param_refs(ModelParameters& p) {
    std::vector<ParamRef> refs;
    auto add = [&](const std::string& name, auto& m) {
        refs.push_back({name, m.data(), m.size()});
    };
    add("w_in", p.w_in);
    add("b_in", p.b_in);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& L = p.layers[l];
        const std::string pre = "layer" + std::to_string(l) + ".";
        add(pre + "wq", L.wq); add(pre + "bq", L.bq);
        add(pre + "wk", L.wk); add(pre + "bk", L.bk);
        add(pre + "wv", L.wv); add(pre + "bv", L.bv);
        add(pre + "wo", L.wo); add(pre + "bo", L.bo);
        add(pre + "w1", L.w1); add(pre + "b1", L.b1);
        add(pre + "w2", L.w2); add(pre + "b2", L.b2);
        add(pre + "ln1_gain", L.ln1_gain); add(pre + "ln1_bias", L.ln1_bias);
        add(pre + "ln2_gain", L.ln2_gain); add(pre + "ln2_bias", L.ln2_bias);
    }
    add("w_out", p.w_out);
    add("b_out", p.b_out);
    return refs;
}

inline ModelParameters zero_parameters(const ModelConfig& c) {
    ModelParameters p;
    p.w_in = MatrixXd::Zero(c.in_channels, c.d_model);
    p.b_in = RowVectorXd::Zero(c.d_model);
    p.layers.resize(c.n_layers);
    for (auto& L : p.layers) {
        L.wq = L.wk = L.wv = L.wo = MatrixXd::Zero(c.d_model, c.d_model);
        L.bq = L.bk = L.bv = L.bo = RowVectorXd::Zero(c.d_model);
        L.w1 = MatrixXd::Zero(c.d_model, c.d_ff);
        L.b1 = RowVectorXd::Zero(c.d_ff);
        L.w2 = MatrixXd::Zero(c.d_ff, c.d_model);
        L.b2 = RowVectorXd::Zero(c.d_model);
        L.ln1_gain = L.ln2_gain = RowVectorXd::Zero(c.d_model);
        L.ln1_bias = L.ln2_bias = RowVectorXd::Zero(c.d_model);
    }
    p.w_out = MatrixXd::Zero(c.d_model, c.out_channels);
    p.b_out = RowVectorXd::Zero(c.out_channels);
    return p;
}

// Glorot-style uniform init for weight matrices, zero biases, unit
// normalization gains. Deterministic from the seed.
inline ModelParameters init_parameters(const ModelConfig& c, std::uint64_t seed) {
    ModelParameters p = zero_parameters(c);
    util::Rng rng(seed);
    auto glorot = [&](MatrixXd& m) {
        const double lim = std::sqrt(6.0 / (m.rows() + m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-lim, lim);
    };
    glorot(p.w_in);
    for (auto& L : p.layers) {
        glorot(L.wq); glorot(L.wk); glorot(L.wv); glorot(L.wo);
        glorot(L.w1); glorot(L.w2);
        L.ln1_gain.setOnes();
        L.ln2_gain.setOnes();
    }
    glorot(p.w_out);
    return p;
}

inline MatrixXd positional_encoding(int seq_len, int d_model) {
    if (seq_len < 1 || d_model < 1) throw std::invalid_argument("bad encoding dims");
    MatrixXd pe(seq_len, d_model);
    for (int pos = 0; pos < seq_len; ++pos)
        for (int k = 0; k < d_model; ++k) {
            const double angle = pos / std::pow(10000.0, (2.0 * (k / 2)) / d_model);
            pe(pos, k) = (k % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

namespace detail {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
inline double gelu_grad(double x) {
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * phi;
}

constexpr double kLnEps = 1e-9;

struct LayerNormCache {
    MatrixXd xhat;
    Eigen::VectorXd inv_std;
};

inline MatrixXd layer_norm(const MatrixXd& x, const RowVectorXd& gain, const RowVectorXd& bias,
                           LayerNormCache& cache) {
    const Eigen::Index d = x.cols();
    cache.xhat.resize(x.rows(), d);
    cache.inv_std.resize(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        cache.inv_std(r) = inv;
        cache.xhat.row(r) = (x.row(r).array() - mean) * inv;
    }
    return (cache.xhat.array().rowwise() * gain.array()).rowwise() + bias.array();
}

inline MatrixXd layer_norm_backward(const MatrixXd& dy, const RowVectorXd& gain,
                                    const LayerNormCache& cache, RowVectorXd& dgain,
                                    RowVectorXd& dbias) {
    dgain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    dbias += dy.colwise().sum();
    MatrixXd dx(dy.rows(), dy.cols());
    const double d = static_cast<double>(dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const Eigen::ArrayXd dxhat = (dy.row(r).array() * gain.array()).transpose();
        const Eigen::ArrayXd xhat = cache.xhat.row(r).transpose().array();
        const double m1 = dxhat.mean();
        const double m2 = (dxhat * xhat).mean();
        dx.row(r) = (cache.inv_std(r) * (dxhat - m1 - xhat * m2)).transpose();
        (void)d;
    }
    return dx;
}

struct LayerCache {
    MatrixXd x_in;                      // sublayer input
    MatrixXd q, k, v;                   // projected
    std::vector<MatrixXd> attn;         // per-head softmax weights
    MatrixXd heads_concat;              // attention output before Wo
    MatrixXd attn_out;                  // after Wo + bo
    LayerNormCache ln1;
    MatrixXd h1;                        // after first LN
    MatrixXd ff_pre;                    // h1*W1 + b1
    MatrixXd ff_act;                    // gelu(ff_pre)
    LayerNormCache ln2;
};

}  // namespace detail

struct ForwardCache {
    MatrixXd input;      // seq_len x in_channels
    MatrixXd embedded;   // projection + positional encoding
    std::vector<detail::LayerCache> layers;
    MatrixXd encoded;    // final hidden states
    MatrixXd output;
};

inline ForwardCache encoder_forward(const ModelParameters& p, const ModelConfig& c,
                                    const MatrixXd& input) {
    if (input.rows() != c.seq_len || input.cols() != c.in_channels)
        throw std::invalid_argument("input shape mismatch");
    if (!input.allFinite()) throw std::runtime_error("non-finite model input");
    const int dh = c.d_model / c.n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    ForwardCache cache;
    cache.input = input;
    MatrixXd h = (input * p.w_in).rowwise() + p.b_in;
    h += positional_encoding(c.seq_len, c.d_model);
    cache.embedded = h;

    cache.layers.resize(c.n_layers);
    for (int l = 0; l < c.n_layers; ++l) {
        const auto& L = p.layers[l];
        auto& lc = cache.layers[l];
        lc.x_in = h;
        lc.q = (h * L.wq).rowwise() + L.bq;
        lc.k = (h * L.wk).rowwise() + L.bk;
        lc.v = (h * L.wv).rowwise() + L.bv;
        lc.heads_concat.resize(c.seq_len, c.d_model);
        lc.attn.resize(c.n_heads);
        for (int hd = 0; hd < c.n_heads; ++hd) {
            const auto qh = lc.q.middleCols(hd * dh, dh);
            const auto kh = lc.k.middleCols(hd * dh, dh);
            const auto vh = lc.v.middleCols(hd * dh, dh);
            MatrixXd scores = qh * kh.transpose() * scale;
            MatrixXd& attn = lc.attn[hd];
            attn.resize(c.seq_len, c.seq_len);
            for (int r = 0; r < c.seq_len; ++r) {
                const Eigen::ArrayXd e = (scores.row(r).array() - scores.row(r).maxCoeff()).exp();
                attn.row(r) = (e / e.sum()).transpose();
            }
            lc.heads_concat.middleCols(hd * dh, dh) = attn * vh;
        }
        lc.attn_out = (lc.heads_concat * L.wo).rowwise() + L.bo;
        lc.h1 = detail::layer_norm(lc.x_in + lc.attn_out, L.ln1_gain, L.ln1_bias, lc.ln1);
        lc.ff_pre = (lc.h1 * L.w1).rowwise() + L.b1;
        lc.ff_act = lc.ff_pre.unaryExpr([](double x) { return detail::gelu(x); });
        const MatrixXd ff_out = (lc.ff_act * L.w2).rowwise() + L.b2;
        h = detail::layer_norm(lc.h1 + ff_out, L.ln2_gain, L.ln2_bias, lc.ln2);
    }
    cache.encoded = h;
    cache.output = (h * p.w_out).rowwise() + p.b_out;
    if (!cache.output.allFinite()) throw std::runtime_error("non-finite model output");
    return cache;
}

inline double mse_loss(const MatrixXd& pred, const MatrixXd& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("loss shape mismatch");
    return (pred - target).array().square().mean();
}

struct Sample {
    MatrixXd input;   // seq_len x in_channels
    MatrixXd target;  // seq_len x out_channels
};

// Gradient of the mean batch MSE loss with respect to every parameter.
// Accumulates into `grads` (caller zero-initializes); returns the loss.
inline double backward(const ModelParameters& p, const ModelConfig& c,
                       const std::vector<Sample>& batch, ModelParameters& grads) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const int dh = c.d_model / c.n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    double loss = 0.0;

    for (const auto& sample : batch) {
        ForwardCache cache = encoder_forward(p, c, sample.input);
        loss += mse_loss(cache.output, sample.target) / batch.size();

        // dL/d_output for the mean-over-batch loss
        MatrixXd dout = 2.0 * (cache.output - sample.target) /
                        (static_cast<double>(batch.size()) * cache.output.size());

        grads.w_out += cache.encoded.transpose() * dout;
        grads.b_out += dout.colwise().sum();
        MatrixXd dh_state = dout * p.w_out.transpose();

        for (int l = c.n_layers - 1; l >= 0; --l) {
            const auto& L = p.layers[l];
            auto& G = grads.layers[l];
            const auto& lc = cache.layers[l];

            // second sublayer: h_out = LN2(h1 + gelu(h1 W1 + b1) W2 + b2)
            MatrixXd d_res2 = detail::layer_norm_backward(dh_state, L.ln2_gain, lc.ln2,
                                                          G.ln2_gain, G.ln2_bias);
            MatrixXd d_ff_out = d_res2;
            G.w2 += lc.ff_act.transpose() * d_ff_out;
            G.b2 += d_ff_out.colwise().sum();
            MatrixXd d_act = d_ff_out * L.w2.transpose();
            MatrixXd d_pre =
                d_act.array() * lc.ff_pre.unaryExpr([](double x) { return detail::gelu_grad(x); }).array();
            G.w1 += lc.h1.transpose() * d_pre;
            G.b1 += d_pre.colwise().sum();
            MatrixXd dh1 = d_res2 + d_pre * L.w1.transpose();

            // first sublayer: h1 = LN1(x + attention(x))
            MatrixXd d_res1 = detail::layer_norm_backward(dh1, L.ln1_gain, lc.ln1,
                                                          G.ln1_gain, G.ln1_bias);
            MatrixXd d_attn_out = d_res1;
            G.wo += lc.heads_concat.transpose() * d_attn_out;
            G.bo += d_attn_out.colwise().sum();
            MatrixXd d_concat = d_attn_out * L.wo.transpose();

            MatrixXd dq = MatrixXd::Zero(c.seq_len, c.d_model);
            MatrixXd dk = MatrixXd::Zero(c.seq_len, c.d_model);
            MatrixXd dv = MatrixXd::Zero(c.seq_len, c.d_model);
            for (int hd = 0; hd < c.n_heads; ++hd) {
                const auto qh = lc.q.middleCols(hd * dh, dh);
                const auto kh = lc.k.middleCols(hd * dh, dh);
                const auto vh = lc.v.middleCols(hd * dh, dh);
                const MatrixXd& attn = lc.attn[hd];
                const MatrixXd d_head = d_concat.middleCols(hd * dh, dh);
                const MatrixXd d_attn = d_head * vh.transpose();
                dv.middleCols(hd * dh, dh) = attn.transpose() * d_head;
                MatrixXd d_scores(c.seq_len, c.seq_len);
                for (int r = 0; r < c.seq_len; ++r) {
                    const double dot = d_attn.row(r).dot(attn.row(r));
                    d_scores.row(r) = attn.row(r).array() * (d_attn.row(r).array() - dot);
                }
                dq.middleCols(hd * dh, dh) = d_scores * kh * scale;
                dk.middleCols(hd * dh, dh) = d_scores.transpose() * qh * scale;
            }
            G.wq += lc.x_in.transpose() * dq;
            G.bq += dq.colwise().sum();
            G.wk += lc.x_in.transpose() * dk;
            G.bk += dk.colwise().sum();
            G.wv += lc.x_in.transpose() * dv;
            G.bv += dv.colwise().sum();
            dh_state = d_res1 + dq * L.wq.transpose() + dk * L.wk.transpose() + dv * L.wv.transpose();
        }

        grads.w_in += sample.input.transpose() * dh_state;
        grads.b_in += dh_state.colwise().sum();
    }
    return loss;
}

inline Sample record_sequence_to_sample(const std::vector<data::PointRecord>& seq) {
    Sample s;
    const int n = static_cast<int>(seq.size());
    s.input.resize(n, 4);
    s.target.resize(n, 4);
    for (int i = 0; i < n; ++i) {
        const auto& r = seq[i];
        s.input.row(i) << r.x, r.y, r.z, r.u;
        s.target.row(i) << r.curvature, r.tangent_x, r.tangent_y, r.tangent_z;
    }
    return s;
}

struct TrainResult {
    ModelParameters params;
    std::vector<double> loss_history;       // train loss per epoch (returned model's round)
    std::vector<double> val_history;        // held-out loss per epoch (same round)
    std::vector<double> fold_val_losses;    // one per fold, fold held out in turn
};

namespace detail {

struct AdamState {
    std::vector<Eigen::VectorXd> m, v;
    long step = 0;
};

inline void optimizer_step(std::vector<ParamRef>& params, std::vector<ParamRef>& grads,
                           const TrainConfig& tc, AdamState& st) {
    if (st.m.empty()) {
        for (const auto& p : params) {
            st.m.emplace_back(Eigen::VectorXd::Zero(p.size));
            st.v.emplace_back(Eigen::VectorXd::Zero(p.size));
        }
    }
    ++st.step;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Eigen::Map<Eigen::VectorXd> w(params[i].values, params[i].size);
        Eigen::Map<const Eigen::VectorXd> g(grads[i].values, grads[i].size);
        if (tc.plain_sgd) {
            w -= tc.learning_rate * g;
            continue;
        }
        st.m[i] = tc.beta1 * st.m[i] + (1.0 - tc.beta1) * g;
        st.v[i] = tc.beta2 * st.v[i].array().matrix() + (1.0 - tc.beta2) * g.array().square().matrix();
        const double bc1 = 1.0 - std::pow(tc.beta1, st.step);
        const double bc2 = 1.0 - std::pow(tc.beta2, st.step);
        w -= (tc.learning_rate * (st.m[i].array() / bc1) /
              ((st.v[i].array() / bc2).sqrt() + tc.eps))
                 .matrix();
    }
}

struct SingleRun {
    ModelParameters params;
    std::vector<double> train_history;
    std::vector<double> val_history;
};

// One full training run over the given sequence indices; validation loss on
// `val_ids` is recorded after each epoch.
inline SingleRun train_single(const std::vector<Sample>& samples,
                              const std::vector<int>& train_ids, const std::vector<int>& val_ids,
                              const ModelConfig& mc, const TrainConfig& tc) {
    ModelParameters params = init_parameters(mc, tc.seed);
    AdamState adam;
    util::Rng shuffle_rng(tc.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<double> history, val_history;
    std::vector<int> order = train_ids;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const std::size_t stop = std::min(order.size(), start + tc.batch_size);
            std::vector<Sample> batch;
            for (std::size_t i = start; i < stop; ++i) batch.push_back(samples[order[i]]);
            ModelParameters grads = zero_parameters(mc);
            const double loss = backward(params, mc, batch, grads);
            if (!std::isfinite(loss))
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
            epoch_loss += loss * batch.size();
            seen += batch.size();
            auto prefs = param_refs(params);
            auto grefs = param_refs(grads);
            optimizer_step(prefs, grefs, tc, adam);
        }
        history.push_back(epoch_loss / seen);
        double val = 0.0;
        for (int id : val_ids)
            val += mse_loss(encoder_forward(params, mc, samples[id].input).output,
                            samples[id].target);
        val_history.push_back(val_ids.empty() ? 0.0 : val / val_ids.size());
    }
    return {std::move(params), std::move(history), std::move(val_history)};
}

}  // namespace detail

// K-fold training: each fold is held out in turn and its validation loss
// recorded; the returned model is the round with the last fold held out.
inline TrainResult train(const data::SequenceDataset& dataset, const data::FoldSpec& folds,
                         const ModelConfig& mc, const TrainConfig& tc) {
    mc.validate();
    tc.validate();
    folds.validate(dataset.sequences.size());
    std::vector<Sample> samples;
    for (const auto& seq : dataset.sequences) {
        if (static_cast<int>(seq.size()) != mc.seq_len)
            throw std::invalid_argument("sequence length does not match model config");
        samples.push_back(record_sequence_to_sample(seq));
    }

    TrainResult result;
    for (std::size_t k = 0; k < folds.folds.size(); ++k) {
        std::vector<int> train_ids;
        for (std::size_t j = 0; j < folds.folds.size(); ++j)
            if (j != k) train_ids.insert(train_ids.end(), folds.folds[j].begin(),
                                         folds.folds[j].end());
        if (train_ids.empty()) throw std::invalid_argument("training folds empty");
        auto run = detail::train_single(samples, train_ids, folds.folds[k], mc, tc);
        result.fold_val_losses.push_back(run.val_history.empty() ? 0.0
                                                                 : run.val_history.back());
        if (k + 1 == folds.folds.size()) {
            result.params = std::move(run.params);
            result.loss_history = std::move(run.train_history);
            result.val_history = std::move(run.val_history);
        }
    }
    return result;
}

struct CurveProperty {
    double curvature = 0.0;
    Eigen::Vector3d tangent = Eigen::Vector3d::UnitX();
};

// Predict curvature/tangent for raw (unnormalized) points. Curvature is
// clipped at zero; tangents are renormalized to unit length.
inline std::vector<CurveProperty> predict_curve_properties(
    const ModelParameters& params, const ModelConfig& mc, const data::ChannelStats& feature_stats,
    const data::ChannelStats& target_stats,
    const std::vector<std::array<double, 4>>& points_with_u) {
    if (static_cast<int>(points_with_u.size()) != mc.seq_len)
        throw std::invalid_argument("sequence length mismatch");
    MatrixXd input(mc.seq_len, 4);
    for (int i = 0; i < mc.seq_len; ++i) {
        input(i, 0) = (points_with_u[i][0] - feature_stats.mean[0]) / feature_stats.stddev[0];
        input(i, 1) = (points_with_u[i][1] - feature_stats.mean[1]) / feature_stats.stddev[1];
        input(i, 2) = (points_with_u[i][2] - feature_stats.mean[2]) / feature_stats.stddev[2];
        input(i, 3) = points_with_u[i][3];
    }
    const auto cache = encoder_forward(params, mc, input);
    std::vector<CurveProperty> out(mc.seq_len);
    for (int i = 0; i < mc.seq_len; ++i) {
        CurveProperty cp;
        cp.curvature = std::max(
            0.0, cache.output(i, 0) * target_stats.stddev[0] + target_stats.mean[0]);
        Eigen::Vector3d t(cache.output(i, 1) * target_stats.stddev[1] + target_stats.mean[1],
                          cache.output(i, 2) * target_stats.stddev[2] + target_stats.mean[2],
                          cache.output(i, 3) * target_stats.stddev[3] + target_stats.mean[3]);
        const double n = t.norm();
        cp.tangent = (n > 1e-12) ? Eigen::Vector3d(t / n) : Eigen::Vector3d::UnitX();
        out[i] = cp;
    }
    return out;
}

}  // namespace formfind::seqnet
