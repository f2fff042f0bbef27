#include "qasir/finetune.hpp"

#include "qasir/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>

namespace qasir {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// ---- adapter ----

struct AdapterCache {
    std::vector<MatrixXd> inputs;
    std::vector<MatrixXd> pre;
};

MatrixXd adapter_apply(const AdapterParams& p, const MatrixXd& x, AdapterCache* cache) {
    if (p.layers.empty()) {
        throw InvalidInput("adapter needs at least one linear layer");
    }
    MatrixXd a = x;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        if (layer.weight.cols() != a.cols()) {
            throw InvalidInput("adapter layer input width mismatch");
        }
        MatrixXd pre = a * layer.weight.transpose();
        pre.rowwise() += layer.bias.transpose();
        if (cache) {
            cache->inputs.push_back(a);
            cache->pre.push_back(pre);
        }
        a = l + 1 < p.layers.size() ? MatrixXd(pre.cwiseMax(0.0)) : pre;
    }
    if (a.cols() != x.cols()) {
        throw InvalidInput("adapter output width must equal its input width");
    }
    return p.beta * a + (1.0 - p.beta) * x;
}

MatrixXd adapter_backward(const AdapterParams& p, const AdapterCache& c, const MatrixXd& dout, AdapterParams& grad) {
    MatrixXd dx = (1.0 - p.beta) * dout;
    MatrixXd g = p.beta * dout;
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        if (l + 1 < p.layers.size()) {
            g = g.cwiseProduct((c.pre[l].array() > 0.0).cast<double>().matrix());
        }
        grad.layers[l].weight += g.transpose() * c.inputs[l];
        grad.layers[l].bias += g.colwise().sum().transpose();
        g = g * p.layers[l].weight;
    }
    return dx + g;
}

// ---- layer norm over rows ----

struct NormCache {
    MatrixXd xhat;
    VectorXd inv_std;
};

MatrixXd layer_norm(const MatrixXd& x, const VectorXd& gain, const VectorXd& bias, double eps, NormCache& c) {
    const VectorXd mean = x.rowwise().mean();
    MatrixXd centered = x.colwise() - mean;
    const VectorXd var = centered.array().square().rowwise().mean();
    c.inv_std = (var.array() + eps).rsqrt();
    c.xhat = centered.array().colwise() * c.inv_std.array();
    MatrixXd y = c.xhat.array().rowwise() * gain.transpose().array();
    y.rowwise() += bias.transpose();
    return y;
}

MatrixXd layer_norm_backward(const NormCache& c, const VectorXd& gain, const MatrixXd& dy, VectorXd& dgain,
                             VectorXd& dbias) {
    dgain += dy.cwiseProduct(c.xhat).colwise().sum().transpose();
    dbias += dy.colwise().sum().transpose();
    const MatrixXd dxhat = dy.array().rowwise() * gain.transpose().array();
    const double d = static_cast<double>(dy.cols());
    const VectorXd sum_dxhat = dxhat.rowwise().sum();
    const VectorXd sum_dxhat_xhat = dxhat.cwiseProduct(c.xhat).rowwise().sum();
    MatrixXd dx = d * dxhat;
    dx.colwise() -= sum_dxhat;
    dx.array() -= c.xhat.array().colwise() * sum_dxhat_xhat.array();
    return (dx.array().colwise() * (c.inv_std.array() / d)).matrix();
}

// ---- temporal encoder ----

struct TemporalCache {
    MatrixXd x0, q, k, v, o;
    std::vector<MatrixXd> probs;
    NormCache ln1, ln2;
    MatrixXd y, hidden, relu;
};

MatrixXd affine_rows(const MatrixXd& x, const MatrixXd& w, const VectorXd& b) {
    MatrixXd out = x * w.transpose();
    out.rowwise() += b.transpose();
    return out;
}

void row_softmax(MatrixXd& m) {
    for (Index r = 0; r < m.rows(); ++r) {
        const double mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
}

MatrixXd temporal_apply(const TemporalEncoderParams& p, const MatrixXd& seq, TemporalCache& c) {
    const Index kk = seq.rows();
    const Index d = seq.cols();
    if (kk < 1) {
        throw InvalidInput("temporal encoder needs at least one super image");
    }
    if (p.heads < 1 || d % p.heads != 0) {
        throw InvalidInput("head count must divide the embedding dimension");
    }
    if (p.wq.cols() != d) {
        throw InvalidInput("temporal encoder width does not match the embedding dimension");
    }
    const Index dh = d / p.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    c.x0 = seq;
    for (Index r = 0; r < kk; ++r) {
        c.x0.row(r) += positional_encoding(r, d).transpose();
    }
    c.q = affine_rows(c.x0, p.wq, p.bq);
    c.k = affine_rows(c.x0, p.wk, p.bk);
    c.v = affine_rows(c.x0, p.wv, p.bv);
    c.o.resize(kk, d);
    c.probs.assign(static_cast<std::size_t>(p.heads), MatrixXd());
    for (int h = 0; h < p.heads; ++h) {
        MatrixXd s = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
        row_softmax(s);
        c.o.middleCols(h * dh, dh) = s * c.v.middleCols(h * dh, dh);
        c.probs[static_cast<std::size_t>(h)] = std::move(s);
    }
    const MatrixXd attn = affine_rows(c.o, p.wo, p.bo);
    c.y = layer_norm(c.x0 + attn, p.ln1_gain, p.ln1_bias, p.ln_eps, c.ln1);
    c.hidden = affine_rows(c.y, p.ff1_weight, p.ff1_bias);
    c.relu = c.hidden.cwiseMax(0.0);
    const MatrixXd ff = affine_rows(c.relu, p.ff2_weight, p.ff2_bias);
    return layer_norm(c.y + ff, p.ln2_gain, p.ln2_bias, p.ln_eps, c.ln2);
}

MatrixXd temporal_backward(const TemporalEncoderParams& p, const TemporalCache& c, const MatrixXd& dout,
                           TemporalEncoderParams& g) {
    const Index d = dout.cols();
    const Index dh = d / p.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const MatrixXd dr2 = layer_norm_backward(c.ln2, p.ln2_gain, dout, g.ln2_gain, g.ln2_bias);
    MatrixXd dy = dr2;
    g.ff2_weight += dr2.transpose() * c.relu;
    g.ff2_bias += dr2.colwise().sum().transpose();
    const MatrixXd dhidden = (dr2 * p.ff2_weight).cwiseProduct((c.hidden.array() > 0.0).cast<double>().matrix());
    g.ff1_weight += dhidden.transpose() * c.y;
    g.ff1_bias += dhidden.colwise().sum().transpose();
    dy += dhidden * p.ff1_weight;

    const MatrixXd dr1 = layer_norm_backward(c.ln1, p.ln1_gain, dy, g.ln1_gain, g.ln1_bias);
    MatrixXd dx0 = dr1;
    g.wo += dr1.transpose() * c.o;
    g.bo += dr1.colwise().sum().transpose();
    const MatrixXd dO = dr1 * p.wo;

    MatrixXd dq(c.q.rows(), d), dk(c.k.rows(), d), dv(c.v.rows(), d);
    for (int h = 0; h < p.heads; ++h) {
        const MatrixXd& prob = c.probs[static_cast<std::size_t>(h)];
        const auto dOh = dO.middleCols(h * dh, dh);
        const MatrixXd dprob = dOh * c.v.middleCols(h * dh, dh).transpose();
        dv.middleCols(h * dh, dh) = prob.transpose() * dOh;
        const VectorXd rowdot = dprob.cwiseProduct(prob).rowwise().sum();
        MatrixXd ds = prob.cwiseProduct(MatrixXd(dprob.colwise() - rowdot)) * scale;
        dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
        dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
    }
    g.wq += dq.transpose() * c.x0;
    g.wk += dk.transpose() * c.x0;
    g.wv += dv.transpose() * c.x0;
    g.bq += dq.colwise().sum().transpose();
    g.bk += dk.colwise().sum().transpose();
    g.bv += dv.colwise().sum().transpose();
    dx0 += dq * p.wq + dk * p.wk + dv * p.wv;
    return dx0;
}

// ---- query-attentive cosine for one (video, query) pair ----

double raw_cosine(const VectorXd& a, const VectorXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw DegenerateInput("cosine similarity with a zero vector");
    }
    return a.dot(b) / (na * nb);
}

double pair_score(const MatrixXd& z, const VectorXd& q) {
    const VectorXd alpha = attention_weights(z, q);
    return raw_cosine(z.transpose() * alpha, q);
}

void pair_backward(const MatrixXd& z, const VectorXd& q, double dscore, MatrixXd& dz, VectorXd& dq) {
    const VectorXd alpha = attention_weights(z, q);
    const VectorXd zhat = z.transpose() * alpha;
    const double nz = zhat.norm();
    const double nq = q.norm();
    const double c = zhat.dot(q) / (nz * nq);
    const VectorXd dzhat = dscore * (q / (nz * nq) - c * zhat / (nz * nz));
    dq += dscore * (zhat / (nz * nq) - c * q / (nq * nq));
    const VectorXd dalpha = z * dzhat;
    const VectorXd dlogit = alpha.cwiseProduct((dalpha.array() - alpha.dot(dalpha)).matrix());
    dz += alpha * dzhat.transpose() + dlogit * q.transpose();
    dq += z.transpose() * dlogit;
}

// ---- parameter plumbing ----

void add_matrix(std::vector<TensorView>& out, const std::string& name, MatrixXd& m) {
    out.push_back({name, m.data(), m.rows(), m.cols()});
}

void add_vector(std::vector<TensorView>& out, const std::string& name, VectorXd& v) {
    out.push_back({name, v.data(), v.size(), 1});
}

void add_adapter(std::vector<TensorView>& out, const std::string& prefix, AdapterParams& a) {
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        const std::string base = prefix + ".layers." + std::to_string(l);
        add_matrix(out, base + ".weight", a.layers[l].weight);
        add_vector(out, base + ".bias", a.layers[l].bias);
    }
}

Linear make_linear(Index in, Index out, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Linear l;
    l.weight = MatrixXd::NullaryExpr(out, in, [&] { return dist(rng); });
    l.bias = VectorXd::NullaryExpr(out, [&] { return dist(rng); });
    return l;
}

} // namespace

Index FineTuneParams::dim() const {
    if (!vision.layers.empty()) {
        return vision.layers.front().weight.cols();
    }
    return temporal.wq.cols();
}

FineTuneParams init_params(const ModelConfig& config, std::uint64_t seed) {
    const Index d = config.dim;
    if (d < 2 || d % 2 != 0) {
        throw InvalidInput("embedding dimension must be even and at least 2");
    }
    if (config.hidden < 1 || config.adapter_depth < 1) {
        throw InvalidInput("adapter needs a positive hidden width and depth");
    }
    if (config.heads < 1 || d % config.heads != 0) {
        throw InvalidInput("head count must divide the embedding dimension");
    }
    if (config.beta_vision < 0.0 || config.beta_vision > 1.0 || config.beta_text < 0.0 || config.beta_text > 1.0) {
        throw InvalidInput("adapter interpolation coefficients must lie in [0, 1]");
    }
    std::mt19937_64 rng(seed);
    auto make_adapter = [&](double beta) {
        AdapterParams a;
        a.beta = beta;
        Index in = d;
        for (int l = 0; l < config.adapter_depth; ++l) {
            const Index out = l + 1 == config.adapter_depth ? d : config.hidden;
            a.layers.push_back(make_linear(in, out, rng));
            in = out;
        }
        return a;
    };
    FineTuneParams p;
    p.use = config.use;
    p.vision = make_adapter(config.beta_vision);
    p.text = make_adapter(config.beta_text);

    auto& t = p.temporal;
    t.heads = config.heads;
    const Index f = config.ff_width > 0 ? config.ff_width : 4 * d;
    auto proj = [&](MatrixXd& w, VectorXd& b, Index in, Index out) {
        Linear l = make_linear(in, out, rng);
        w = std::move(l.weight);
        b = std::move(l.bias);
    };
    proj(t.wq, t.bq, d, d);
    proj(t.wk, t.bk, d, d);
    proj(t.wv, t.bv, d, d);
    proj(t.wo, t.bo, d, d);
    proj(t.ff1_weight, t.ff1_bias, d, f);
    proj(t.ff2_weight, t.ff2_bias, f, d);
    t.ln1_gain = VectorXd::Ones(d);
    t.ln1_bias = VectorXd::Zero(d);
    t.ln2_gain = VectorXd::Ones(d);
    t.ln2_bias = VectorXd::Zero(d);
    return p;
}

std::vector<TensorView> tensors(FineTuneParams& p, bool active_only) {
    std::vector<TensorView> out;
    if (!active_only || p.use.vision_adapter) {
        add_adapter(out, "vision", p.vision);
    }
    if (!active_only || p.use.text_adapter) {
        add_adapter(out, "text", p.text);
    }
    if (!active_only || p.use.temporal_encoder) {
        auto& t = p.temporal;
        add_matrix(out, "temporal.wq", t.wq);
        add_vector(out, "temporal.bq", t.bq);
        add_matrix(out, "temporal.wk", t.wk);
        add_vector(out, "temporal.bk", t.bk);
        add_matrix(out, "temporal.wv", t.wv);
        add_vector(out, "temporal.bv", t.bv);
        add_matrix(out, "temporal.wo", t.wo);
        add_vector(out, "temporal.bo", t.bo);
        add_matrix(out, "temporal.ff1_weight", t.ff1_weight);
        add_vector(out, "temporal.ff1_bias", t.ff1_bias);
        add_matrix(out, "temporal.ff2_weight", t.ff2_weight);
        add_vector(out, "temporal.ff2_bias", t.ff2_bias);
        add_vector(out, "temporal.ln1_gain", t.ln1_gain);
        add_vector(out, "temporal.ln1_bias", t.ln1_bias);
        add_vector(out, "temporal.ln2_gain", t.ln2_gain);
        add_vector(out, "temporal.ln2_bias", t.ln2_bias);
    }
    return out;
}

FineTuneParams zeros_like(const FineTuneParams& params) {
    FineTuneParams z = params;
    for (auto& t : tensors(z)) {
        std::fill(t.data, t.data + t.size(), 0.0);
    }
    return z;
}

Eigen::VectorXd adapter_forward(const AdapterParams& params, const Eigen::VectorXd& z) {
    if (!z.allFinite()) {
        throw InvalidInput("adapter input must be finite");
    }
    return adapter_apply(params, z.transpose(), nullptr).transpose();
}

Eigen::MatrixXd adapter_forward_rows(const AdapterParams& params, const Eigen::MatrixXd& rows) {
    return adapter_apply(params, rows, nullptr);
}

Eigen::VectorXd positional_encoding(Index k, Index d) {
    if (k < 0) {
        throw InvalidInput("position must be non-negative");
    }
    if (d < 2 || d % 2 != 0) {
        throw InvalidInput("positional encoding needs an even dimension");
    }
    VectorXd pe(d);
    for (Index i = 0; i < d / 2; ++i) {
        const double angle = static_cast<double>(k) / std::pow(10000.0, 2.0 * static_cast<double>(i) / d);
        pe(2 * i) = std::sin(angle);
        pe(2 * i + 1) = std::cos(angle);
    }
    return pe;
}

Eigen::MatrixXd temporal_forward(const TemporalEncoderParams& params, const Eigen::MatrixXd& sequence) {
    TemporalCache cache;
    return temporal_apply(params, sequence, cache);
}

ForwardResult full_forward(const FineTuneParams& params, const Eigen::MatrixXd& rows, const Eigen::VectorXd& query) {
    MatrixXd z = params.use.vision_adapter ? adapter_forward_rows(params.vision, rows) : rows;
    if (params.use.temporal_encoder) {
        z = temporal_forward(params.temporal, z);
    }
    ForwardResult r;
    r.adapted_query = params.use.text_adapter ? adapter_forward(params.text, query) : query;
    r.weights = attention_weights(z, r.adapted_query);
    r.attended = aggregate(z, r.weights);
    r.score = raw_cosine(r.attended, r.adapted_query);
    return r;
}

LossMode parse_loss_mode(const std::string& name) {
    if (name == "literal") {
        return LossMode::literal;
    }
    if (name == "infonce") {
        return LossMode::infonce;
    }
    throw ConfigError("unknown loss mode: " + name);
}

namespace {

void check_square(const MatrixXd& s) {
    if (s.rows() != s.cols() || s.rows() == 0) {
        throw InvalidInput("loss needs a non-empty square score matrix");
    }
}

// Positive-valued transform of a cosine used inside the log-ratio.
MatrixXd loss_terms(const MatrixXd& s, const LossConfig& cfg) {
    if (cfg.mode == LossMode::infonce) {
        if (!(cfg.temperature > 0.0)) {
            throw InvalidInput("temperature must be positive");
        }
        return s / cfg.temperature;  // log-domain
    }
    return s.cwiseMax(cfg.clamp_eps);
}

} // namespace

LossValue symmetric_loss(const Eigen::MatrixXd& scores, const LossConfig& config) {
    check_square(scores);
    const Index b = scores.rows();
    const MatrixXd t = loss_terms(scores, config);
    LossValue out;
    for (Index i = 0; i < b; ++i) {
        if (config.mode == LossMode::infonce) {
            const double rmax = t.row(i).maxCoeff();
            const double cmax = t.col(i).maxCoeff();
            const double row_lse = rmax + std::log((t.row(i).array() - rmax).exp().sum());
            const double col_lse = cmax + std::log((t.col(i).array() - cmax).exp().sum());
            out.query_to_image += t(i, i) - row_lse;
            out.image_to_query += t(i, i) - col_lse;
        } else {
            out.query_to_image += std::log(t(i, i) / t.row(i).sum());
            out.image_to_query += std::log(t(i, i) / t.col(i).sum());
        }
    }
    out.query_to_image /= static_cast<double>(b);
    out.image_to_query /= static_cast<double>(b);
    return out;
}

Eigen::MatrixXd symmetric_loss_gradient(const Eigen::MatrixXd& scores, const LossConfig& config) {
    check_square(scores);
    const Index b = scores.rows();
    const double inv_b = 1.0 / static_cast<double>(b);
    const MatrixXd t = loss_terms(scores, config);
    MatrixXd dl = MatrixXd::Zero(b, b);  // d L / d scores
    if (config.mode == LossMode::infonce) {
        MatrixXd row_p = t;
        row_softmax(row_p);
        MatrixXd col_p = t.transpose();
        row_softmax(col_p);
        col_p.transposeInPlace();
        dl = -(row_p + col_p);
        dl.diagonal().array() += 2.0;
        dl *= inv_b / config.temperature;
    } else {
        const VectorXd row_sum = t.rowwise().sum();
        const VectorXd col_sum = t.colwise().sum().transpose();
        for (Index i = 0; i < b; ++i) {
            for (Index j = 0; j < b; ++j) {
                if (!(scores(i, j) > config.clamp_eps)) {
                    continue;
                }
                double g = -1.0 / row_sum(i) - 1.0 / col_sum(j);
                if (i == j) {
                    g += 2.0 / t(i, i);
                }
                dl(i, j) = g * inv_b;
            }
        }
    }
    return -dl;
}

Eigen::MatrixXd batch_scores(const FineTuneParams& params, const Batch& batch) {
    FineTunedScorer scorer(params);
    const Index b = static_cast<Index>(batch.queries.size());
    std::vector<MatrixXd> videos;
    for (const auto& v : batch.videos) {
        videos.push_back(scorer.encode_video(v));
    }
    MatrixXd s(b, static_cast<Index>(videos.size()));
    for (Index i = 0; i < b; ++i) {
        const VectorXd q = scorer.encode_query(batch.queries[static_cast<std::size_t>(i)]);
        for (Index j = 0; j < s.cols(); ++j) {
            s(i, j) = pair_score(videos[static_cast<std::size_t>(j)], q);
        }
    }
    return s;
}

BatchResult forward_backward(const FineTuneParams& params, const Batch& batch, const LossConfig& config) {
    const std::size_t b = batch.videos.size();
    if (b == 0 || batch.queries.size() != b) {
        throw InvalidInput("batch needs one query per video");
    }
    std::vector<AdapterCache> vision_cache(b), text_cache(b);
    std::vector<TemporalCache> temporal_cache(b);
    std::vector<MatrixXd> z(b);
    std::vector<VectorXd> q(b);
    for (std::size_t j = 0; j < b; ++j) {
        MatrixXd x = params.use.vision_adapter ? adapter_apply(params.vision, batch.videos[j], &vision_cache[j])
                                               : batch.videos[j];
        z[j] = params.use.temporal_encoder ? temporal_apply(params.temporal, x, temporal_cache[j]) : x;
    }
    for (std::size_t i = 0; i < b; ++i) {
        const MatrixXd row = batch.queries[i].transpose();
        q[i] = params.use.text_adapter ? VectorXd(adapter_apply(params.text, row, &text_cache[i]).transpose())
                                       : batch.queries[i];
    }

    BatchResult out;
    const Index bi = static_cast<Index>(b);
    out.scores.resize(bi, bi);
    for (Index i = 0; i < bi; ++i) {
        for (Index j = 0; j < bi; ++j) {
            out.scores(i, j) = pair_score(z[static_cast<std::size_t>(j)], q[static_cast<std::size_t>(i)]);
        }
    }
    out.loss = symmetric_loss(out.scores, config);
    const MatrixXd ds = symmetric_loss_gradient(out.scores, config);

    std::vector<MatrixXd> dz(b);
    std::vector<VectorXd> dq(b);
    for (std::size_t j = 0; j < b; ++j) {
        dz[j] = MatrixXd::Zero(z[j].rows(), z[j].cols());
        dq[j] = VectorXd::Zero(q[j].size());
    }
    for (Index i = 0; i < bi; ++i) {
        for (Index j = 0; j < bi; ++j) {
            if (ds(i, j) != 0.0) {
                pair_backward(z[static_cast<std::size_t>(j)], q[static_cast<std::size_t>(i)], ds(i, j),
                              dz[static_cast<std::size_t>(j)], dq[static_cast<std::size_t>(i)]);
            }
        }
    }

    out.gradient = zeros_like(params);
    for (std::size_t j = 0; j < b; ++j) {
        MatrixXd dx = params.use.temporal_encoder
                          ? temporal_backward(params.temporal, temporal_cache[j], dz[j], out.gradient.temporal)
                          : dz[j];
        if (params.use.vision_adapter) {
            adapter_backward(params.vision, vision_cache[j], dx, out.gradient.vision);
        }
    }
    if (params.use.text_adapter) {
        for (std::size_t i = 0; i < b; ++i) {
            adapter_backward(params.text, text_cache[i], dq[i].transpose(), out.gradient.text);
        }
    }
    return out;
}

AdamW::AdamW(const FineTuneParams& shape, const TrainConfig& config)
    : first_(zeros_like(shape)),
      second_(zeros_like(shape)),
      lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.adam_eps),
      decay_(config.weight_decay) {}

void AdamW::step(FineTuneParams& params, FineTuneParams& gradient) {
    ++t_;
    auto p = tensors(params, true);
    auto g = tensors(gradient, true);
    auto m = tensors(first_, true);
    auto v = tensors(second_, true);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < p.size(); ++k) {
        for (Index e = 0; e < p[k].size(); ++e) {
            const double grad = g[k].data[e];
            double& mk = m[k].data[e];
            double& vk = v[k].data[e];
            double& pk = p[k].data[e];
            mk = beta1_ * mk + (1.0 - beta1_) * grad;
            vk = beta2_ * vk + (1.0 - beta2_) * grad * grad;
            pk -= lr_ * decay_ * pk;
            pk -= lr_ * (mk / c1) / (std::sqrt(vk / c2) + eps_);
        }
    }
}

TrainResult train(const EmbeddingStore& store, const FineTuneParams& init, const TrainConfig& config) {
    if (config.batch_size < 1 || config.epochs < 0 || !(config.learning_rate >= 0.0)) {
        throw InvalidInput("batch size must be positive, epochs and learning rate non-negative");
    }
    struct Pair {
        std::size_t video;
        std::size_t query;
    };
    std::vector<Pair> pairs;
    std::set<std::size_t> distinct;
    for (std::size_t qi = 0; qi < store.queries().size(); ++qi) {
        const auto& q = store.queries()[qi];
        const auto vi = store.video_index(q.video_id);
        if (!vi) {
            throw InvalidInput("query " + q.query_id + " targets unknown video " + q.video_id);
        }
        pairs.push_back({*vi, qi});
        distinct.insert(*vi);
    }
    if (pairs.size() < config.batch_size || distinct.size() < config.batch_size) {
        throw InvalidInput("need at least batch_size query-video pairs with distinct videos, have " +
                           std::to_string(distinct.size()));
    }
    if (init.dim() != store.dim()) {
        throw InvalidInput("model dimension does not match the embeddings");
    }

    TrainResult result{init, {}};
    AdamW optimizer(init, config);
    std::mt19937_64 rng(config.seed);
    std::size_t steps = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::size_t> order(pairs.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng() % i]);
        }
        std::deque<std::size_t> pending(order.begin(), order.end());
        while (pending.size() >= config.batch_size) {
            if (config.max_steps > 0 && steps >= config.max_steps) {
                return result;
            }
            Batch batch;
            std::set<std::size_t> seen;
            std::deque<std::size_t> rest;
            while (!pending.empty()) {
                const std::size_t idx = pending.front();
                pending.pop_front();
                if (batch.videos.size() < config.batch_size && seen.insert(pairs[idx].video).second) {
                    batch.videos.push_back(store.videos()[pairs[idx].video].matrix);
                    batch.queries.push_back(store.queries()[pairs[idx].query].vector);
                } else {
                    rest.push_back(idx);
                }
            }
            pending = std::move(rest);
            if (batch.videos.size() < config.batch_size) {
                break;
            }
            auto fb = forward_backward(result.params, batch, config.loss);
            result.loss_history.push_back(fb.loss.objective());
            optimizer.step(result.params, fb.gradient);
            ++steps;
        }
    }
    return result;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const double> history) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.precision(17);
    out << "step,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        out << i << ',' << history[i] << '\n';
    }
}

Eigen::MatrixXd FineTunedScorer::encode_video(const Eigen::MatrixXd& rows) const {
    MatrixXd z = params_.use.vision_adapter ? adapter_forward_rows(params_.vision, rows) : rows;
    return params_.use.temporal_encoder ? temporal_forward(params_.temporal, z) : z;
}

Eigen::VectorXd FineTunedScorer::encode_query(const Eigen::VectorXd& query) const {
    return params_.use.text_adapter ? adapter_forward(params_.text, query) : query;
}

double FineTunedScorer::similarity(const Eigen::MatrixXd& video, const Eigen::VectorXd& query) const {
    if (mode_ == Pooling::attention) {
        return score_zero_shot(video, query);
    }
    return score_pooled(video, query, mode_);
}

} // namespace qasir
