#include "qasir/errors.hpp"
#include "qasir/finetune.hpp"
#include "qasir/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace qasir;

namespace {

ModelConfig small_config(Eigen::Index d = 8, Eigen::Index h = 6, int heads = 2) {
    ModelConfig cfg;
    cfg.dim = d;
    cfg.hidden = h;
    cfg.heads = heads;
    cfg.ff_width = 10;
    return cfg;
}

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
            m(i, j) = g(rng);
        }
    }
    return m;
}

// Perturb layer-norm parameters away from their 1/0 initialisation.
void perturb(FineTuneParams& p, std::mt19937_64& rng) {
    const auto d = p.dim();
    p.temporal.ln1_gain += gaussian(rng, d, 1, 0.2);
    p.temporal.ln1_bias += gaussian(rng, d, 1, 0.2);
    p.temporal.ln2_gain += gaussian(rng, d, 1, 0.2);
    p.temporal.ln2_bias += gaussian(rng, d, 1, 0.2);
}

bool same_params(FineTuneParams a, FineTuneParams b) {
    const auto ta = tensors(a);
    const auto tb = tensors(b);
    if (ta.size() != tb.size()) {
        return false;
    }
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].name != tb[i].name || ta[i].size() != tb[i].size()) {
            return false;
        }
        for (Eigen::Index j = 0; j < ta[i].size(); ++j) {
            if (ta[i].data[j] != tb[i].data[j]) {
                return false;
            }
        }
    }
    return a.vision.beta == b.vision.beta && a.text.beta == b.text.beta && a.use == b.use &&
           a.temporal.heads == b.temporal.heads;
}

Eigen::VectorXd oracle_adapter(const AdapterParams& p, const Eigen::VectorXd& z) {
    Eigen::VectorXd x = z;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& L = p.layers[l];
        Eigen::VectorXd y(L.weight.rows());
        for (Eigen::Index i = 0; i < L.weight.rows(); ++i) {
            double s = L.bias[i];
            for (Eigen::Index j = 0; j < L.weight.cols(); ++j) {
                s += L.weight(i, j) * x[j];
            }
            y[i] = (l + 1 < p.layers.size()) ? std::max(s, 0.0) : s;
        }
        x = y;
    }
    return p.beta * x + (1.0 - p.beta) * z;
}

std::vector<double> oracle_ln(const std::vector<double>& x, const Eigen::VectorXd& g, const Eigen::VectorXd& b,
                              double eps) {
    double mean = 0.0;
    for (double v : x) {
        mean += v;
    }
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) {
        var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = (x[i] - mean) / std::sqrt(var + eps) * g[static_cast<Eigen::Index>(i)] +
                 b[static_cast<Eigen::Index>(i)];
    }
    return out;
}

std::vector<double> oracle_affine(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const std::vector<double>& x) {
    std::vector<double> y(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        double s = b[i];
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            s += w(i, j) * x[static_cast<std::size_t>(j)];
        }
        y[static_cast<std::size_t>(i)] = s;
    }
    return y;
}

// Step-by-step transformer layer on std::vector rows.
Eigen::MatrixXd oracle_temporal(const TemporalEncoderParams& p, const Eigen::MatrixXd& seq) {
    const auto K = static_cast<std::size_t>(seq.rows());
    const auto d = static_cast<std::size_t>(seq.cols());
    const std::size_t H = static_cast<std::size_t>(p.heads);
    const std::size_t dh = d / H;
    std::vector<std::vector<double>> x(K, std::vector<double>(d)), q(K), k(K), v(K);
    for (std::size_t r = 0; r < K; ++r) {
        for (std::size_t i = 0; i < d; i += 2) {
            const double f = static_cast<double>(r) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            x[r][i] = seq(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) + std::sin(f);
            x[r][i + 1] = seq(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i + 1)) + std::cos(f);
        }
        q[r] = oracle_affine(p.wq, p.bq, x[r]);
        k[r] = oracle_affine(p.wk, p.bk, x[r]);
        v[r] = oracle_affine(p.wv, p.bv, x[r]);
    }
    Eigen::MatrixXd out(seq.rows(), seq.cols());
    for (std::size_t r = 0; r < K; ++r) {
        std::vector<double> o(d, 0.0);
        for (std::size_t h = 0; h < H; ++h) {
            std::vector<double> logits(K);
            double mx = -1e300;
            for (std::size_t s = 0; s < K; ++s) {
                double dot = 0.0;
                for (std::size_t i = h * dh; i < (h + 1) * dh; ++i) {
                    dot += q[r][i] * k[s][i];
                }
                logits[s] = dot / std::sqrt(static_cast<double>(dh));
                mx = std::max(mx, logits[s]);
            }
            double z = 0.0;
            for (auto& l : logits) {
                l = std::exp(l - mx);
                z += l;
            }
            for (std::size_t s = 0; s < K; ++s) {
                for (std::size_t i = h * dh; i < (h + 1) * dh; ++i) {
                    o[i] += logits[s] / z * v[s][i];
                }
            }
        }
        auto attn = oracle_affine(p.wo, p.bo, o);
        for (std::size_t i = 0; i < d; ++i) {
            attn[i] += x[r][i];
        }
        const auto y = oracle_ln(attn, p.ln1_gain, p.ln1_bias, p.ln_eps);
        auto hid = oracle_affine(p.ff1_weight, p.ff1_bias, y);
        for (auto& hv : hid) {
            hv = std::max(hv, 0.0);
        }
        auto ff = oracle_affine(p.ff2_weight, p.ff2_bias, hid);
        for (std::size_t i = 0; i < d; ++i) {
            ff[i] += y[i];
        }
        const auto res = oracle_ln(ff, p.ln2_gain, p.ln2_bias, p.ln_eps);
        for (std::size_t i = 0; i < d; ++i) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = res[i];
        }
    }
    return out;
}

Batch random_batch(std::mt19937_64& rng, int b, int k, Eigen::Index d, double offset = 0.0) {
    Batch batch;
    for (int i = 0; i < b; ++i) {
        batch.videos.push_back(gaussian(rng, k, d, 0.5).array() + offset);
        batch.queries.push_back(gaussian(rng, d, 1, 0.5).array() + offset);
    }
    return batch;
}

double objective(const FineTuneParams& p, const Batch& b, const LossConfig& cfg) {
    return symmetric_loss(batch_scores(p, b), cfg).objective();
}

SynthCorpus training_corpus(std::uint64_t seed, std::size_t videos) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.num_videos = videos;
    cfg.k_min = 4;
    cfg.k_max = 4;
    cfg.d = 16;
    cfg.noise_sigma = 0.3;
    cfg.moment_fraction = 0.25;
    return cfg.num_videos ? generate(cfg) : SynthCorpus{};
}

} // namespace

TEST_CASE("adapter forward") {
    std::mt19937_64 rng(1);
    auto p = init_params(small_config(4, 3), 7);
    const Eigen::VectorXd z = gaussian(rng, 4, 1);

    p.vision.beta = 0.0;
    CHECK(adapter_forward(p.vision, z) == z);

    p.vision.beta = 1.0;
    for (auto& l : p.vision.layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
    CHECK(adapter_forward(p.vision, z) == Eigen::VectorXd::Zero(4));

    auto q = init_params(small_config(4, 3), 8);
    q.text.beta = 0.37;
    for (int it = 0; it < 20; ++it) {
        const Eigen::VectorXd x = gaussian(rng, 4, 1);
        CHECK((adapter_forward(q.text, x) - oracle_adapter(q.text, x)).cwiseAbs().maxCoeff() <= 1e-12);
    }
    const Eigen::MatrixXd rows = gaussian(rng, 3, 4);
    const auto out = adapter_forward_rows(q.text, rows);
    for (int r = 0; r < 3; ++r) {
        CHECK((out.row(r).transpose() - adapter_forward(q.text, rows.row(r).transpose())).cwiseAbs().maxCoeff() <=
              1e-12);
    }

    auto deep = small_config(4, 3);
    deep.adapter_depth = 3;
    const auto p3 = init_params(deep, 9);
    CHECK(p3.vision.layers.size() == 3);
    CHECK((adapter_forward(p3.vision, z) - oracle_adapter(p3.vision, z)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("positional encoding") {
    const auto pe0 = positional_encoding(0, 6);
    for (int i = 0; i < 6; ++i) {
        CHECK(pe0[i] == (i % 2 == 0 ? 0.0 : 1.0));
    }
    const auto pe1 = positional_encoding(1, 4);
    CHECK(pe1[0] == doctest::Approx(0.8414710).epsilon(1e-7));
    CHECK(pe1[2] == doctest::Approx(std::sin(0.01)));
    for (int k = 0; k < 50; ++k) {
        const auto pe = positional_encoding(k, 16);
        CHECK(pe.cwiseAbs().maxCoeff() <= 1.0);
    }
    CHECK_THROWS_AS(positional_encoding(1, 5), InvalidInput);
}

TEST_CASE("temporal encoder") {
    std::mt19937_64 rng(2);
    auto p = init_params(small_config(8, 6, 2), 3);
    perturb(p, rng);
    for (int k = 1; k <= 5; ++k) {
        const Eigen::MatrixXd seq = gaussian(rng, k, 8);
        CHECK((temporal_forward(p.temporal, seq) - oracle_temporal(p.temporal, seq)).cwiseAbs().maxCoeff() <= 1e-10);
    }

    // Zero output projections leave only the residual path.
    auto id = init_params(small_config(8, 6, 2), 4);
    id.temporal.wo.setZero();
    id.temporal.bo.setZero();
    id.temporal.ff2_weight.setZero();
    id.temporal.ff2_bias.setZero();
    const Eigen::MatrixXd seq = gaussian(rng, 4, 8);
    const auto out = temporal_forward(id.temporal, seq);
    for (int r = 0; r < 4; ++r) {
        std::vector<double> x(8);
        const auto pe = positional_encoding(r, 8);
        for (int i = 0; i < 8; ++i) {
            x[static_cast<std::size_t>(i)] = seq(r, i) + pe[i];
        }
        const auto once = oracle_ln(x, id.temporal.ln1_gain, id.temporal.ln1_bias, id.temporal.ln_eps);
        const auto twice = oracle_ln(once, id.temporal.ln2_gain, id.temporal.ln2_bias, id.temporal.ln_eps);
        for (int i = 0; i < 8; ++i) {
            CHECK(out(r, i) == doctest::Approx(twice[static_cast<std::size_t>(i)]).epsilon(1e-12));
        }
    }

    // Row order matters once positions are encoded.
    Eigen::MatrixXd swapped = seq;
    swapped.row(0).swap(swapped.row(2));
    const auto a = temporal_forward(p.temporal, seq);
    auto b = temporal_forward(p.temporal, swapped);
    b.row(0).swap(b.row(2));
    CHECK((a - b).cwiseAbs().maxCoeff() > 1e-6);

    auto bad = p;
    bad.temporal.heads = 3;
    CHECK_THROWS_AS(temporal_forward(bad.temporal, seq), InvalidInput);
    CHECK_THROWS_AS(temporal_forward(p.temporal, Eigen::MatrixXd(0, 8)), InvalidInput);
}

TEST_CASE("full forward") {
    std::mt19937_64 rng(3);
    auto p = init_params(small_config(), 5);
    for (int it = 0; it < 30; ++it) {
        const int k = 1 + static_cast<int>(rng() % 5);
        const auto r = full_forward(p, gaussian(rng, k, 8), gaussian(rng, 8, 1));
        CHECK(r.score <= 1.0 + 1e-12);
        CHECK(r.score >= -1.0 - 1e-12);
        CHECK(std::abs(r.weights.sum() - 1.0) <= 1e-12);
        if (k == 1) {
            CHECK(r.weights[0] == 1.0);
        }
    }

    // Identity adapters: the pipeline reduces to zero-shot scoring on the encoder output.
    p.vision.beta = 0.0;
    p.text.beta = 0.0;
    const Eigen::MatrixXd rows = gaussian(rng, 3, 8);
    const Eigen::VectorXd q = gaussian(rng, 8, 1);
    const auto r = full_forward(p, rows, q);
    CHECK(r.adapted_query == q);
    CHECK(r.score == doctest::Approx(score_zero_shot(temporal_forward(p.temporal, rows), q)).epsilon(1e-12));

    p.use = HeadOptions{false, false, false};
    CHECK(full_forward(p, rows, q).score == doctest::Approx(score_zero_shot(rows, q)).epsilon(1e-12));

    FineTunedScorer scorer(init_params(small_config(), 6));
    const auto direct = full_forward(scorer.params(), rows, q).score;
    CHECK(scorer.score(rows, q) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("symmetric loss values") {
    for (auto mode : {LossMode::infonce, LossMode::literal}) {
        LossConfig cfg;
        cfg.mode = mode;
        const auto one = symmetric_loss(Eigen::MatrixXd::Constant(1, 1, 0.4), cfg);
        CHECK(one.query_to_image == doctest::Approx(0.0));
        CHECK(one.image_to_query == doctest::Approx(0.0));
    }

    LossConfig cfg;
    cfg.temperature = 1.0;
    const auto l = symmetric_loss(Eigen::MatrixXd::Identity(2, 2), cfg);
    const double term = std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
    CHECK(term == doctest::Approx(-0.3133).epsilon(1e-4));
    CHECK(l.query_to_image == doctest::Approx(term).epsilon(1e-12));
    CHECK(l.image_to_query == doctest::Approx(term).epsilon(1e-12));
    CHECK(l.total() == doctest::Approx(2.0 * term).epsilon(1e-12));

    LossConfig lit;
    lit.mode = LossMode::literal;
    Eigen::MatrixXd s(2, 2);
    s << 0.8, 0.2, 0.4, 0.6;
    const auto ll = symmetric_loss(s, lit);
    CHECK(ll.query_to_image == doctest::Approx((std::log(0.8 / 1.0) + std::log(0.6 / 1.0)) / 2.0));
    CHECK(ll.image_to_query == doctest::Approx((std::log(0.8 / 1.2) + std::log(0.6 / 0.8)) / 2.0));

    // Transpose swaps the two directions.
    std::mt19937_64 rng(4);
    for (auto mode : {LossMode::infonce, LossMode::literal}) {
        LossConfig c;
        c.mode = mode;
        const Eigen::MatrixXd m = (gaussian(rng, 5, 5, 0.2).array() + 0.5).matrix();
        const auto a = symmetric_loss(m, c);
        const auto b = symmetric_loss(m.transpose(), c);
        CHECK(a.query_to_image == doctest::Approx(b.image_to_query).epsilon(1e-12));
        CHECK(a.image_to_query == doctest::Approx(b.query_to_image).epsilon(1e-12));
        CHECK(a.total() == doctest::Approx(b.total()).epsilon(1e-12));

        // Raising a diagonal entry lowers the objective.
        Eigen::MatrixXd up = m;
        up(2, 2) += 0.05;
        CHECK(symmetric_loss(up, c).objective() < a.objective());

        // Gradient of the objective against finite differences.
        const auto g = symmetric_loss_gradient(m, c);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) {
                Eigen::MatrixXd hi = m, lo = m;
                hi(i, j) += 1e-6;
                lo(i, j) -= 1e-6;
                const double fd = (symmetric_loss(hi, c).objective() - symmetric_loss(lo, c).objective()) / 2e-6;
                CHECK(g(i, j) == doctest::Approx(fd).epsilon(1e-5));
            }
        }
    }
    CHECK_THROWS_AS(symmetric_loss(Eigen::MatrixXd::Zero(2, 3), cfg), InvalidInput);
    CHECK(parse_loss_mode("literal") == LossMode::literal);
    CHECK_THROWS_AS(parse_loss_mode("hinge"), ConfigError);
}

TEST_CASE("analytic gradients match finite differences") {
    for (auto mode : {LossMode::infonce, LossMode::literal}) {
        std::mt19937_64 rng(5);
        auto p = init_params(small_config(8, 6, 2), 12);
        perturb(p, rng);
        LossConfig cfg;
        cfg.mode = mode;
        cfg.temperature = 0.5;
        Batch batch = random_batch(rng, 4, 3, 8, mode == LossMode::literal ? 1.0 : 0.0);
        if (mode == LossMode::literal) {
            p.temporal.ln2_bias.array() += 3.0;
        }
        const auto scores = batch_scores(p, batch);
        if (mode == LossMode::literal) {
            REQUIRE(scores.minCoeff() > cfg.clamp_eps);
        }
        auto result = forward_backward(p, batch, cfg);
        CHECK(result.loss.objective() == doctest::Approx(objective(p, batch, cfg)).epsilon(1e-12));
        auto grads = tensors(result.gradient);
        auto views = tensors(p);
        REQUIRE(grads.size() == views.size());
        double worst = 0.0;
        std::string worst_name;
        for (std::size_t t = 0; t < views.size(); ++t) {
            for (Eigen::Index i = 0; i < views[t].size(); ++i) {
                double& x = views[t].data[i];
                const double saved = x;
                x = saved + 1e-5;
                const double hi = objective(p, batch, cfg);
                x = saved - 1e-5;
                const double lo = objective(p, batch, cfg);
                x = saved;
                const double fd = (hi - lo) / 2e-5;
                const double an = grads[t].data[i];
                const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
                if (rel > worst) {
                    worst = rel;
                    worst_name = views[t].name;
                }
            }
        }
        INFO("worst tensor " << worst_name);
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("gradient structure") {
    std::mt19937_64 rng(6);
    LossConfig cfg;

    // Identical videos and identical queries: every score is equal, the objective is flat.
    auto p = init_params(small_config(8, 6, 2), 13);
    Batch flat;
    const Eigen::MatrixXd v = gaussian(rng, 3, 8);
    const Eigen::VectorXd q = gaussian(rng, 8, 1);
    for (int i = 0; i < 4; ++i) {
        flat.videos.push_back(v);
        flat.queries.push_back(q);
    }
    auto r = forward_backward(p, flat, cfg);
    for (const auto& t : tensors(r.gradient)) {
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            CHECK(std::abs(t.data[i]) <= 1e-10);
        }
    }

    // beta_t = 0: the text MLP receives no gradient.
    p.text.beta = 0.0;
    const Batch batch = random_batch(rng, 4, 3, 8);
    auto g = forward_backward(p, batch, cfg).gradient;
    for (const auto& l : g.text.layers) {
        CHECK(l.weight.cwiseAbs().maxCoeff() == 0.0);
        CHECK(l.bias.cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(g.vision.layers[0].weight.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("training loop") {
    const auto corpus = training_corpus(21, 64);
    ModelConfig mc = small_config(16, 16, 2);
    const auto init = init_params(mc, 1);

    TrainConfig tc;
    tc.batch_size = 8;
    tc.learning_rate = 1e-3;
    tc.epochs = 7;
    tc.seed = 3;
    const auto run = train(corpus.store, init, tc);
    REQUIRE(run.loss_history.size() == 56);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 8; ++i) {
        first += run.loss_history[static_cast<std::size_t>(i)];
        last += run.loss_history[run.loss_history.size() - 1 - static_cast<std::size_t>(i)];
    }
    CHECK(last < first);

    const auto replay = train(corpus.store, init, tc);
    CHECK(replay.loss_history == run.loss_history);
    CHECK(same_params(replay.params, run.params));

    TrainConfig capped = tc;
    capped.max_steps = 5;
    CHECK(train(corpus.store, init, capped).loss_history.size() == 5);

    TrainConfig none = tc;
    none.epochs = 0;
    const auto idle = train(corpus.store, init, none);
    CHECK(idle.loss_history.empty());
    CHECK(same_params(idle.params, init));

    TrainConfig frozen = tc;
    frozen.learning_rate = 0.0;
    frozen.epochs = 1;
    const auto still = train(corpus.store, init, frozen);
    CHECK(still.loss_history.size() == 8);
    CHECK(same_params(still.params, init));

    // Disabled modules stay untouched.
    auto partial = init;
    partial.use.temporal_encoder = false;
    const auto adapters_only = train(corpus.store, partial, capped);
    CHECK(adapters_only.params.temporal.wq == partial.temporal.wq);
    CHECK(adapters_only.params.vision.layers[0].weight != partial.vision.layers[0].weight);

    TrainConfig huge = tc;
    huge.batch_size = 65;
    CHECK_THROWS_AS(train(corpus.store, init, huge), InvalidInput);
    CHECK_THROWS_AS(train(corpus.store, init_params(small_config(8, 6, 2), 1), tc), InvalidInput);

    const auto path = std::filesystem::temp_directory_path() / "qasir_loss.csv";
    write_loss_csv(path, run.loss_history);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "step,loss");
    std::getline(in, line);
    const auto comma = line.find(',');
    CHECK(std::stod(line.substr(comma + 1)) == run.loss_history[0]);
    std::filesystem::remove(path);
}

TEST_CASE("AdamW update") {
    auto p = init_params(small_config(4, 2, 1), 2);
    auto g = zeros_like(p);
    g.vision.layers[0].weight(0, 0) = 0.5;
    TrainConfig tc;
    tc.learning_rate = 0.1;
    tc.weight_decay = 0.01;
    AdamW opt(p, tc);
    const double w0 = p.vision.layers[0].weight(0, 0);
    const double w1 = p.vision.layers[0].weight(0, 1);
    opt.step(p, g);
    // First step: bias-corrected moments give m/sqrt(v) = sign(g).
    const double decayed = w0 - 0.1 * 0.01 * w0;
    CHECK(p.vision.layers[0].weight(0, 0) == doctest::Approx(decayed - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
    CHECK(p.vision.layers[0].weight(0, 1) == doctest::Approx(w1 - 0.1 * 0.01 * w1).epsilon(1e-12));
}

TEST_CASE("checkpoint roundtrip and errors") {
    std::mt19937_64 rng(7);
    auto cfg = small_config(8, 6, 2);
    cfg.beta_vision = 0.3;
    cfg.use.text_adapter = false;
    auto p = init_params(cfg, 99);
    perturb(p, rng);
    const auto bytes = encode_checkpoint(p);
    CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "QCKPT");
    auto back = decode_checkpoint(bytes);
    CHECK(back.vision.beta == doctest::Approx(0.3).epsilon(1e-7));
    CHECK(back.use == p.use);
    CHECK(back.temporal.heads == 2);
    auto tp = tensors(p);
    auto tb = tensors(back);
    REQUIRE(tp.size() == tb.size());
    for (std::size_t t = 0; t < tp.size(); ++t) {
        CHECK(tp[t].name == tb[t].name);
        for (Eigen::Index i = 0; i < tp[t].size(); ++i) {
            CHECK(tb[t].data[i] == static_cast<double>(static_cast<float>(tp[t].data[i])));
        }
    }
    CHECK(encode_checkpoint(back) == bytes);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
    auto truncated = std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 3);
    CHECK_THROWS_AS(decode_checkpoint(truncated), FormatError);
    auto trailing = bytes;
    trailing.push_back(1);
    CHECK_THROWS_AS(decode_checkpoint(trailing), FormatError);

    const auto path = std::filesystem::temp_directory_path() / "qasir_head.qckpt";
    save_checkpoint(path, p);
    CHECK(encode_checkpoint(load_checkpoint(path)) == bytes);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("parameter initialisation") {
    const auto a = init_params(small_config(), 1);
    const auto b = init_params(small_config(), 1);
    CHECK(same_params(a, b));
    CHECK_FALSE(same_params(a, init_params(small_config(), 2)));
    CHECK(a.vision.layers[0].weight.rows() == 6);
    CHECK(a.vision.layers[0].weight.cols() == 8);
    CHECK(a.vision.layers[0].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
    CHECK(a.temporal.ff1_weight.rows() == 10);
    CHECK(a.temporal.ln1_gain == Eigen::VectorXd::Ones(8));
    auto z = zeros_like(a);
    for (const auto& t : tensors(z)) {
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            CHECK(t.data[i] == 0.0);
        }
    }
    CHECK_THROWS(init_params(small_config(8, 6, 3), 1));
    ModelConfig zero;
    CHECK_THROWS(init_params(zero, 1));
}
