#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "formfind/seqnet.hpp"

using namespace formfind;
using Eigen::MatrixXd;

namespace {

seqnet::ModelConfig small_config() {
    seqnet::ModelConfig c;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_layers = 2;
    c.d_ff = 16;
    c.seq_len = 5;
    return c;
}

std::vector<seqnet::Sample> random_batch(const seqnet::ModelConfig& c, int n,
                                         std::uint64_t seed) {
    util::Rng rng(seed);
    std::vector<seqnet::Sample> batch(n);
    for (auto& s : batch) {
        s.input.resize(c.seq_len, c.in_channels);
        s.target.resize(c.seq_len, c.out_channels);
        for (int i = 0; i < c.seq_len; ++i) {
            for (int j = 0; j < c.in_channels; ++j) s.input(i, j) = rng.uniform(-1, 1);
            for (int j = 0; j < c.out_channels; ++j) s.target(i, j) = rng.uniform(-1, 1);
        }
    }
    return batch;
}

double batch_loss(const seqnet::ModelParameters& p, const seqnet::ModelConfig& c,
                  const std::vector<seqnet::Sample>& batch) {
    double loss = 0;
    for (const auto& s : batch)
        loss += seqnet::mse_loss(seqnet::encoder_forward(p, c, s.input).output, s.target) /
                batch.size();
    return loss;
}

}  // namespace

TEST_CASE("positional encoding: row zero, range, distinct rows") {
    const auto pe = seqnet::positional_encoding(21, 32);
    for (int k = 0; k < 32; ++k) CHECK(pe(0, k) == (k % 2 == 0 ? 0.0 : 1.0));
    CHECK(pe.maxCoeff() <= 1.0);
    CHECK(pe.minCoeff() >= -1.0);
    double min_dist = 1e300;
    for (int a = 0; a < 21; ++a)
        for (int b = a + 1; b < 21; ++b)
            min_dist = std::min(min_dist, (pe.row(a) - pe.row(b)).norm());
    CHECK(min_dist > 0.0);
}

TEST_CASE("forward: shapes, attention rows, finiteness, PE sensitivity") {
    seqnet::ModelConfig c;  // defaults: 21 x 4 -> 21 x 4
    const auto p = seqnet::init_parameters(c, 3);
    util::Rng rng(17);
    MatrixXd input(c.seq_len, 4);
    for (int i = 0; i < input.size(); ++i) input(i / 4, i % 4) = rng.uniform(-1, 1);

    const auto cache = seqnet::encoder_forward(p, c, input);
    CHECK(cache.output.rows() == 21);
    CHECK(cache.output.cols() == 4);
    CHECK(cache.output.allFinite());
    for (const auto& lc : cache.layers)
        for (const auto& attn : lc.attn)
            for (int r = 0; r < attn.rows(); ++r)
                CHECK(attn.row(r).sum() == Catch::Approx(1.0).margin(1e-9));

    // permuting input rows must change the output (positional encoding)
    MatrixXd permuted = input;
    permuted.row(0).swap(permuted.row(10));
    const auto cache2 = seqnet::encoder_forward(p, c, permuted);
    CHECK((cache2.output - cache.output).cwiseAbs().maxCoeff() > 1e-6);

    MatrixXd bad = input;
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(seqnet::encoder_forward(p, c, bad));
}

TEST_CASE("layer normalization: per-row mean/variance before gain") {
    const auto c = small_config();
    const auto p = seqnet::init_parameters(c, 5);
    const auto batch = random_batch(c, 1, 9);
    const auto cache = seqnet::encoder_forward(p, c, batch[0].input);
    for (const auto& lc : cache.layers)
        for (const auto* ln : {&lc.ln1, &lc.ln2})
            for (int r = 0; r < ln->xhat.rows(); ++r) {
                CHECK(std::abs(ln->xhat.row(r).mean()) < 1e-6);
                const double var = ln->xhat.row(r).array().square().mean();
                CHECK(var == Catch::Approx(1.0).margin(1e-4));
            }
}

TEST_CASE("mse loss: zero, ones, naive summation oracle") {
    MatrixXd a = MatrixXd::Random(6, 4);
    CHECK(seqnet::mse_loss(a, a) == 0.0);
    MatrixXd b = a.array() + 1.0;
    CHECK(seqnet::mse_loss(a, b) == Catch::Approx(1.0).margin(1e-15));

    MatrixXd t = MatrixXd::Random(6, 4);
    double naive = 0;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 4; ++j) naive += (a(i, j) - t(i, j)) * (a(i, j) - t(i, j));
    naive /= 24.0;
    CHECK(seqnet::mse_loss(a, t) == Catch::Approx(naive).margin(1e-12));
    CHECK_THROWS(seqnet::mse_loss(a, MatrixXd::Zero(3, 4)));
}

TEST_CASE("backward: zero-loss batch has zero output-bias gradient") {
    const auto c = small_config();
    const auto p = seqnet::init_parameters(c, 1);
    auto batch = random_batch(c, 2, 2);
    for (auto& s : batch) s.target = seqnet::encoder_forward(p, c, s.input).output;
    auto grads = seqnet::zero_parameters(c);
    const double loss = seqnet::backward(p, c, batch, grads);
    CHECK(loss < 1e-24);
    CHECK(grads.b_out.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward: duplicated batch leaves gradients unchanged") {
    const auto c = small_config();
    auto p = seqnet::init_parameters(c, 4);
    const auto batch = random_batch(c, 3, 8);
    std::vector<seqnet::Sample> doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());

    auto g1 = seqnet::zero_parameters(c);
    auto g2 = seqnet::zero_parameters(c);
    seqnet::backward(p, c, batch, g1);
    seqnet::backward(p, c, doubled, g2);
    auto r1 = seqnet::param_refs(g1);
    auto r2 = seqnet::param_refs(g2);
    for (std::size_t i = 0; i < r1.size(); ++i)
        for (Eigen::Index k = 0; k < r1[i].size; ++k)
            CHECK(r1[i].values[k] == Catch::Approx(r2[i].values[k]).margin(1e-12));
}

TEST_CASE("gradient check: analytic vs central differences, every block") {
    const auto c = small_config();
    auto p = seqnet::init_parameters(c, 12);
    // Targets near the model output keep the loss small, so the finite
    // difference of a truly-zero gradient (e.g. the redundant key bias) stays
    // below the relative-error floor instead of drowning in cancellation noise.
    auto batch = random_batch(c, 2, 21);
    util::Rng tnoise(77);
    for (auto& s : batch) {
        s.target = seqnet::encoder_forward(p, c, s.input).output;
        for (Eigen::Index i = 0; i < s.target.size(); ++i)
            s.target(i / s.target.cols(), i % s.target.cols()) += tnoise.uniform(-0.05, 0.05);
    }
    auto grads = seqnet::zero_parameters(c);
    seqnet::backward(p, c, batch, grads);

    auto prefs = seqnet::param_refs(p);
    auto grefs = seqnet::param_refs(grads);
    util::Rng pick(33);
    const double h = 1e-5;
    double max_rel = 0;
    for (std::size_t b = 0; b < prefs.size(); ++b) {
        // sample a handful of entries per block; cover every block
        const int n_check = static_cast<int>(std::min<Eigen::Index>(prefs[b].size, 6));
        for (int t = 0; t < n_check; ++t) {
            const Eigen::Index idx = static_cast<Eigen::Index>(pick.index(prefs[b].size));
            const double orig = prefs[b].values[idx];
            prefs[b].values[idx] = orig + h;
            const double lp = batch_loss(p, c, batch);
            prefs[b].values[idx] = orig - h;
            const double lm = batch_loss(p, c, batch);
            prefs[b].values[idx] = orig;
            const double fd = (lp - lm) / (2 * h);
            const double an = grefs[b].values[idx];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
            INFO(prefs[b].name << "[" << idx << "] fd=" << fd << " an=" << an);
            CHECK(rel < 1e-4);
            max_rel = std::max(max_rel, rel);
        }
    }
    INFO("max relative error " << max_rel);
}

TEST_CASE("training: epochs, zero learning rate, determinism") {
    const auto curves = data::synth_corpus(4, 8);
    auto ds = data::curves_to_dataset(curves, 20);
    const auto folds = data::kfold_split(ds, {4, 4}, 3);
    const auto norm = data::normalize(ds, folds, {0});

    seqnet::ModelConfig mc;
    seqnet::TrainConfig tc;
    tc.epochs = 5;
    tc.seed = 7;

    const auto r1 = seqnet::train(norm, folds, mc, tc);
    CHECK(r1.loss_history.size() == 5);
    CHECK(r1.val_history.size() == 5);
    CHECK(r1.fold_val_losses.size() == 2);

    const auto r2 = seqnet::train(norm, folds, mc, tc);
    CHECK(r1.loss_history == r2.loss_history);  // bitwise determinism

    seqnet::TrainConfig frozen = tc;
    frozen.learning_rate = 0.0;
    const auto r3 = seqnet::train(norm, folds, mc, frozen);
    for (double l : r3.loss_history) CHECK(l == r3.loss_history.front());
    const auto init = seqnet::init_parameters(mc, frozen.seed);
    auto pi = seqnet::param_refs(const_cast<seqnet::ModelParameters&>(init));
    auto pf = seqnet::param_refs(const_cast<seqnet::ModelParameters&>(r3.params));
    for (std::size_t b = 0; b < pi.size(); ++b)
        for (Eigen::Index k = 0; k < pi[b].size; ++k)
            CHECK(pi[b].values[k] == pf[b].values[k]);
}

TEST_CASE("training: loss halves on the synthetic corpus") {
    const auto curves = data::synth_corpus(11, 16);
    auto ds = data::curves_to_dataset(curves, 20);
    const auto folds = data::kfold_split(ds, {3, 3, 3, 3, 4}, 11);
    const auto norm = data::normalize(ds, folds, {0, 1, 2, 3});

    seqnet::ModelConfig mc;
    seqnet::TrainConfig tc;
    tc.seed = 11;
    const auto r = seqnet::train(norm, folds, mc, tc);
    REQUIRE(r.loss_history.size() == 100);
    CHECK(r.loss_history.back() <= 0.5 * r.loss_history.front());
}

TEST_CASE("prediction: unit tangents, clipped curvature, beats the mean") {
    const auto curves = data::synth_corpus(13, 16);
    auto ds = data::curves_to_dataset(curves, 20);
    const auto folds = data::kfold_split(ds, {3, 3, 3, 3, 4}, 13);
    const auto norm = data::normalize(ds, folds, {0, 1, 2, 3});

    seqnet::ModelConfig mc;
    seqnet::TrainConfig tc;
    tc.seed = 13;
    const auto r = seqnet::train(norm, folds, mc, tc);

    double abs_err_sum = 0;
    int n_pts = 0;
    for (int curve_id : folds.folds.back()) {
        std::vector<std::array<double, 4>> pts;
        for (const auto& rec : ds.sequences[curve_id])
            pts.push_back({rec.x, rec.y, rec.z, rec.u});
        const auto pred = seqnet::predict_curve_properties(r.params, mc, norm.feature_stats,
                                                           norm.target_stats, pts);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            CHECK(pred[i].tangent.norm() == Catch::Approx(1.0).margin(1e-9));
            CHECK(pred[i].curvature >= 0.0);
            abs_err_sum += std::abs(pred[i].curvature - ds.sequences[curve_id][i].curvature);
            ++n_pts;
        }
    }
    // better than predicting the mean: MAE below the curvature std deviation
    CHECK(abs_err_sum / n_pts < norm.target_stats.stddev[0]);
}
