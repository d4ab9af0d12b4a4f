#include "tureis/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "json.hpp"

namespace tureis {

namespace {

Mat shaped_mat(int r, int c) { return Mat(r, c); }

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / M_SQRT2)); }

double gelu_grad(double x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return 0.5 * (1.0 + std::erf(x / M_SQRT2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

void layer_norm_row(const double* x, int n, double* xhat, double& inv_std) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += x[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= n;
    inv_std = 1.0 / std::sqrt(var + kLnEps);
    for (int i = 0; i < n; ++i) xhat[i] = (x[i] - mean) * inv_std;
}

// dx for one row given dxhat, using the cached normalized row.
void layer_norm_row_backward(const double* dxhat, const double* xhat, double inv_std,
                             int n, double* dx) {
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
        mean_dxhat += dxhat[i];
        mean_dxhat_xhat += dxhat[i] * xhat[i];
    }
    mean_dxhat /= n;
    mean_dxhat_xhat /= n;
    for (int i = 0; i < n; ++i)
        dx[i] = inv_std * (dxhat[i] - mean_dxhat - xhat[i] * mean_dxhat_xhat);
}

Mat dropout_mask(int rows, int cols, double rate, Rng* rng) {
    Mat m(rows, cols);
    if (rng == nullptr || rate <= 0.0) {
        for (auto& v : m.a) v = 1.0;
        return m;
    }
    double keep = 1.0 - rate;
    for (auto& v : m.a) v = rng->uniform() < keep ? 1.0 / keep : 0.0;
    return m;
}

} // namespace

ModelParams ModelParams::shaped(int bit_dim, ModelDims dims) {
    if (dims.embed_dim % dims.num_heads != 0)
        throw std::invalid_argument("embed dim must divide evenly into heads");
    ModelParams p;
    p.bit_dim = bit_dim;
    p.dims = dims;
    int d = dims.embed_dim;
    p.w_in = shaped_mat(d, bit_dim);
    p.b_in.assign(d, 0.0);
    p.pos = shaped_mat(kSeqLen, d);
    p.mask_value = 0.0;
    p.layers.resize(dims.num_layers);
    for (auto& l : p.layers) {
        l.wq = shaped_mat(d, d);
        l.wk = shaped_mat(d, d);
        l.wv = shaped_mat(d, d);
        l.wo = shaped_mat(d, d);
        l.ln1_gain.assign(d, 0.0);
        l.ln1_bias.assign(d, 0.0);
        l.w1 = shaped_mat(2 * d, d);
        l.b1.assign(2 * d, 0.0);
        l.w2 = shaped_mat(d, 2 * d);
        l.b2.assign(d, 0.0);
        l.ln2_gain.assign(d, 0.0);
        l.ln2_bias.assign(d, 0.0);
    }
    p.w_out = shaped_mat(bit_dim, d);
    p.b_out.assign(bit_dim, 0.0);
    return p;
}

std::vector<TensorRef> tensor_refs(ModelParams& p) {
    std::vector<TensorRef> refs;
    auto add_mat = [&](const std::string& name, Mat& m) {
        refs.push_back({name, m.a.data(), m.a.size()});
    };
    auto add_vec = [&](const std::string& name, Vec& v) {
        refs.push_back({name, v.data(), v.size()});
    };
    add_mat("w_in", p.w_in);
    add_vec("b_in", p.b_in);
    add_mat("pos", p.pos);
    refs.push_back({"mask_value", &p.mask_value, 1});
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        auto& l = p.layers[i];
        std::string pre = "layer" + std::to_string(i) + ".";
        add_mat(pre + "wq", l.wq);
        add_mat(pre + "wk", l.wk);
        add_mat(pre + "wv", l.wv);
        add_mat(pre + "wo", l.wo);
        add_vec(pre + "ln1_gain", l.ln1_gain);
        add_vec(pre + "ln1_bias", l.ln1_bias);
        add_mat(pre + "w1", l.w1);
        add_vec(pre + "b1", l.b1);
        add_mat(pre + "w2", l.w2);
        add_vec(pre + "b2", l.b2);
        add_vec(pre + "ln2_gain", l.ln2_gain);
        add_vec(pre + "ln2_bias", l.ln2_bias);
    }
    add_mat("w_out", p.w_out);
    add_vec("b_out", p.b_out);
    return refs;
}

std::size_t ModelParams::param_count() const {
    std::size_t n = 0;
    for (const auto& r : tensor_refs(const_cast<ModelParams&>(*this))) n += r.n;
    return n;
}

ModelParams init_params(const HomeSchema& schema, uint64_t seed, ModelDims dims) {
    if (schema.total_bits() < 2)
        throw std::invalid_argument("schema too small for the encoder");
    ModelParams p = ModelParams::shaped(schema.total_bits(), dims);
    Rng rng(seed);
    for (auto& ref : tensor_refs(p)) {
        bool is_weight = ref.name == "w_in" || ref.name == "pos" ||
                         ref.name == "w_out" || ref.name.find(".w") != std::string::npos;
        bool is_gain = ref.name.find("gain") != std::string::npos;
        for (std::size_t i = 0; i < ref.n; ++i) {
            if (is_weight)
                ref.data[i] = rng.normal(0.0, 0.02);
            else if (is_gain)
                ref.data[i] = 1.0;
            else
                ref.data[i] = 0.0;
        }
    }
    p.mask_value = 0.5;
    return p;
}

Mat apply_mask(const SequenceWindow& window, const MaskSet& mask,
               const ModelParams& params, const HomeSchema& schema) {
    Mat input(kSeqLen, schema.total_bits());
    for (int r = 0; r < kSeqLen; ++r)
        for (int c = 0; c < schema.total_bits(); ++c)
            input(r, c) = window.at(r, c);
    apply_mask_inplace(input, mask, params, schema);
    return input;
}

void apply_mask_inplace(Mat& input, const MaskSet& mask, const ModelParams& params,
                        const HomeSchema& schema) {
    for (int s : mask) {
        const auto& sensor = schema.at(s);
        for (int r = 0; r < input.rows; ++r)
            for (int c = sensor.bit_offset; c < sensor.bit_offset + sensor.bit_width; ++c)
                input(r, c) = params.mask_value;
    }
}

Mat forward(const ModelParams& params, const Mat& input, ForwardCache* cache,
            double dropout_rate, Rng* dropout_rng) {
    const int L = kSeqLen, d = params.dims.embed_dim, hw = params.dims.head_width();
    const int n_layers = params.dims.num_layers, n_heads = params.dims.num_heads;
    if (input.rows != L || input.cols != params.bit_dim)
        throw std::invalid_argument("input shape mismatch");
    for (double v : input.a)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite model input");

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.input = input;
    c.layers.assign(n_layers, LayerCache{});

    // token embeddings + positional vectors
    c.tokens = matmul_nt(input, params.w_in);  // L x d
    for (int r = 0; r < L; ++r)
        for (int j = 0; j < d; ++j)
            c.tokens(r, j) += params.b_in[j] + params.pos(r, j);

    Mat h = c.tokens;
    for (int li = 0; li < n_layers; ++li) {
        const auto& lp = params.layers[li];
        auto& lc = c.layers[li];
        lc.input = h;

        lc.q = matmul_nt(h, lp.wq);
        lc.k = matmul_nt(h, lp.wk);
        lc.v = matmul_nt(h, lp.wv);

        lc.attn_concat = Mat(L, d);
        lc.attn.assign(n_heads, Mat());
        for (int head = 0; head < n_heads; ++head) {
            int off = head * hw;
            Mat scores(L, L);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < L; ++j) {
                    double s = 0.0;
                    for (int t = 0; t < hw; ++t)
                        s += lc.q(i, off + t) * lc.k(j, off + t);
                    scores(i, j) = s / std::sqrt(static_cast<double>(hw));
                }
            Mat& A = lc.attn[head];
            A = Mat(L, L);
            for (int i = 0; i < L; ++i) {
                double mx = scores(i, 0);
                for (int j = 1; j < L; ++j) mx = std::max(mx, scores(i, j));
                double z = 0.0;
                for (int j = 0; j < L; ++j) {
                    A(i, j) = std::exp(scores(i, j) - mx);
                    z += A(i, j);
                }
                for (int j = 0; j < L; ++j) A(i, j) /= z;
            }
            for (int i = 0; i < L; ++i)
                for (int t = 0; t < hw; ++t) {
                    double s = 0.0;
                    for (int j = 0; j < L; ++j) s += A(i, j) * lc.v(j, off + t);
                    lc.attn_concat(i, off + t) = s;
                }
        }

        lc.attn_out = matmul_nt(lc.attn_concat, lp.wo);
        lc.drop1 = dropout_mask(L, d, dropout_rate, dropout_rng);

        // residual + post-norm
        Mat res1(L, d);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < d; ++j)
                res1(i, j) = h(i, j) + lc.attn_out(i, j) * lc.drop1(i, j);
        lc.ln1_xhat = Mat(L, d);
        lc.ln1_inv_std.assign(L, 0.0);
        lc.ln1_out = Mat(L, d);
        for (int i = 0; i < L; ++i) {
            layer_norm_row(&res1.a[static_cast<std::size_t>(i) * d], d,
                           &lc.ln1_xhat.a[static_cast<std::size_t>(i) * d],
                           lc.ln1_inv_std[i]);
            for (int j = 0; j < d; ++j)
                lc.ln1_out(i, j) = lp.ln1_gain[j] * lc.ln1_xhat(i, j) + lp.ln1_bias[j];
        }

        // position-wise FFN d -> 2d -> d with GELU
        lc.ffn_z1 = matmul_nt(lc.ln1_out, lp.w1);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < 2 * d; ++j) lc.ffn_z1(i, j) += lp.b1[j];
        lc.ffn_g = Mat(L, 2 * d);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < 2 * d; ++j) lc.ffn_g(i, j) = gelu(lc.ffn_z1(i, j));
        lc.ffn_out = matmul_nt(lc.ffn_g, lp.w2);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < d; ++j) lc.ffn_out(i, j) += lp.b2[j];
        lc.drop2 = dropout_mask(L, d, dropout_rate, dropout_rng);

        Mat res2(L, d);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < d; ++j)
                res2(i, j) = lc.ln1_out(i, j) + lc.ffn_out(i, j) * lc.drop2(i, j);
        lc.ln2_xhat = Mat(L, d);
        lc.ln2_inv_std.assign(L, 0.0);
        lc.ln2_out = Mat(L, d);
        for (int i = 0; i < L; ++i) {
            layer_norm_row(&res2.a[static_cast<std::size_t>(i) * d], d,
                           &lc.ln2_xhat.a[static_cast<std::size_t>(i) * d],
                           lc.ln2_inv_std[i]);
            for (int j = 0; j < d; ++j)
                lc.ln2_out(i, j) = lp.ln2_gain[j] * lc.ln2_xhat(i, j) + lp.ln2_bias[j];
        }
        h = lc.ln2_out;
    }

    c.logits = matmul_nt(h, params.w_out);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < params.bit_dim; ++j) c.logits(i, j) += params.b_out[j];
    return c.logits;
}

FocalResult focal_loss(const Mat& logits, const Mat& target_bits,
                       const Mat& masked_positions, double gamma) {
    FocalResult out;
    out.dlogits = Mat(logits.rows, logits.cols);
    double total = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < logits.a.size(); ++i)
        if (masked_positions.a[i] != 0.0) ++n;
    if (n == 0) throw std::invalid_argument("focal_loss: empty mask set");

    for (std::size_t i = 0; i < logits.a.size(); ++i) {
        if (masked_positions.a[i] == 0.0) continue;
        double z = logits.a[i];
        double y = target_bits.a[i];
        double p = 1.0 / (1.0 + std::exp(-z));
        double pt = y != 0.0 ? p : 1.0 - p;
        bool clamped = pt < kProbClamp || pt > 1.0 - kProbClamp;
        double ptc = std::clamp(pt, kProbClamp, 1.0 - kProbClamp);
        double one_minus = 1.0 - ptc;
        double w = gamma == 0.0 ? 1.0 : std::pow(one_minus, gamma);
        total += -w * std::log(ptc);
        if (!clamped) {
            double dldpt;
            if (gamma == 0.0)
                dldpt = -1.0 / ptc;
            else
                dldpt = gamma * std::pow(one_minus, gamma - 1.0) * std::log(ptc) -
                        w / ptc;
            double dptdz = (y != 0.0 ? 1.0 : -1.0) * p * (1.0 - p);
            out.dlogits.a[i] = dldpt * dptdz / n;
        }
    }
    out.loss = total / n;
    return out;
}

BackwardResult backward(const ModelParams& params, const ForwardCache& cache,
                        const Mat& dlogits) {
    const int L = kSeqLen, d = params.dims.embed_dim, hw = params.dims.head_width();
    const int n_layers = params.dims.num_layers, n_heads = params.dims.num_heads;
    if (cache.layers.size() != static_cast<std::size_t>(n_layers))
        throw std::invalid_argument("stale forward cache");

    BackwardResult out{ModelParams::shaped(params.bit_dim, params.dims),
                       Mat(L, params.bit_dim)};
    ModelParams& g = out.grads;

    // output head
    const Mat& h_last = cache.layers.back().ln2_out;
    add_matmul_tn(g.w_out, dlogits, h_last);
    for (int j = 0; j < params.bit_dim; ++j)
        for (int i = 0; i < L; ++i) g.b_out[j] += dlogits(i, j);
    Mat dh = matmul_nn(dlogits, params.w_out);  // L x d

    for (int li = n_layers - 1; li >= 0; --li) {
        const auto& lp = params.layers[li];
        const auto& lc = cache.layers[li];
        auto& lg = g.layers[li];

        // LN2 backward
        Mat dres2(L, d);
        {
            Mat dxhat(L, d);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < d; ++j) {
                    lg.ln2_gain[j] += dh(i, j) * lc.ln2_xhat(i, j);
                    lg.ln2_bias[j] += dh(i, j);
                    dxhat(i, j) = dh(i, j) * lp.ln2_gain[j];
                }
            for (int i = 0; i < L; ++i)
                layer_norm_row_backward(&dxhat.a[static_cast<std::size_t>(i) * d],
                                        &lc.ln2_xhat.a[static_cast<std::size_t>(i) * d],
                                        lc.ln2_inv_std[i], d,
                                        &dres2.a[static_cast<std::size_t>(i) * d]);
        }

        // residual: res2 = ln1_out + drop2 * ffn_out
        Mat dln1_out = dres2;  // direct path
        Mat dffn_out(L, d);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < d; ++j)
                dffn_out(i, j) = dres2(i, j) * lc.drop2(i, j);

        // FFN backward
        add_matmul_tn(lg.w2, dffn_out, lc.ffn_g);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < L; ++i) lg.b2[j] += dffn_out(i, j);
        Mat dg_act = matmul_nn(dffn_out, lp.w2);  // L x 2d
        Mat dz1(L, 2 * d);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < 2 * d; ++j)
                dz1(i, j) = dg_act(i, j) * gelu_grad(lc.ffn_z1(i, j));
        add_matmul_tn(lg.w1, dz1, lc.ln1_out);
        for (int j = 0; j < 2 * d; ++j)
            for (int i = 0; i < L; ++i) lg.b1[j] += dz1(i, j);
        {
            Mat more = matmul_nn(dz1, lp.w1);  // L x d
            for (std::size_t i = 0; i < dln1_out.a.size(); ++i)
                dln1_out.a[i] += more.a[i];
        }

        // LN1 backward
        Mat dres1(L, d);
        {
            Mat dxhat(L, d);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < d; ++j) {
                    lg.ln1_gain[j] += dln1_out(i, j) * lc.ln1_xhat(i, j);
                    lg.ln1_bias[j] += dln1_out(i, j);
                    dxhat(i, j) = dln1_out(i, j) * lp.ln1_gain[j];
                }
            for (int i = 0; i < L; ++i)
                layer_norm_row_backward(&dxhat.a[static_cast<std::size_t>(i) * d],
                                        &lc.ln1_xhat.a[static_cast<std::size_t>(i) * d],
                                        lc.ln1_inv_std[i], d,
                                        &dres1.a[static_cast<std::size_t>(i) * d]);
        }

        // residual: res1 = input + drop1 * attn_out
        Mat dx = dres1;  // gradient w.r.t. layer input (accumulates below)
        Mat dattn_out(L, d);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < d; ++j)
                dattn_out(i, j) = dres1(i, j) * lc.drop1(i, j);

        // attention output projection
        add_matmul_tn(lg.wo, dattn_out, lc.attn_concat);
        Mat dconcat = matmul_nn(dattn_out, lp.wo);  // L x d

        // per-head attention backward
        Mat dq(L, d), dk(L, d), dv(L, d);
        double scale = 1.0 / std::sqrt(static_cast<double>(hw));
        for (int head = 0; head < n_heads; ++head) {
            int off = head * hw;
            const Mat& A = lc.attn[head];
            // dA and dV
            Mat dA(L, L);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < L; ++j) {
                    double s = 0.0;
                    for (int t = 0; t < hw; ++t)
                        s += dconcat(i, off + t) * lc.v(j, off + t);
                    dA(i, j) = s;
                }
            for (int j = 0; j < L; ++j)
                for (int t = 0; t < hw; ++t) {
                    double s = 0.0;
                    for (int i = 0; i < L; ++i) s += A(i, j) * dconcat(i, off + t);
                    dv(j, off + t) = s;
                }
            // softmax backward: dS = A .* (dA - rowsum(dA .* A))
            Mat dS(L, L);
            for (int i = 0; i < L; ++i) {
                double dot = 0.0;
                for (int j = 0; j < L; ++j) dot += dA(i, j) * A(i, j);
                for (int j = 0; j < L; ++j) dS(i, j) = A(i, j) * (dA(i, j) - dot);
            }
            for (int i = 0; i < L; ++i)
                for (int t = 0; t < hw; ++t) {
                    double sq = 0.0;
                    for (int j = 0; j < L; ++j) sq += dS(i, j) * lc.k(j, off + t);
                    dq(i, off + t) = sq * scale;
                }
            for (int j = 0; j < L; ++j)
                for (int t = 0; t < hw; ++t) {
                    double sk = 0.0;
                    for (int i = 0; i < L; ++i) sk += dS(i, j) * lc.q(i, off + t);
                    dk(j, off + t) = sk * scale;
                }
        }

        add_matmul_tn(lg.wq, dq, lc.input);
        add_matmul_tn(lg.wk, dk, lc.input);
        add_matmul_tn(lg.wv, dv, lc.input);
        {
            Mat t1 = matmul_nn(dq, lp.wq);
            Mat t2 = matmul_nn(dk, lp.wk);
            Mat t3 = matmul_nn(dv, lp.wv);
            for (std::size_t i = 0; i < dx.a.size(); ++i)
                dx.a[i] += t1.a[i] + t2.a[i] + t3.a[i];
        }
        dh = dx;
    }

    // token embedding backward: tokens = W_in x + b_in + pos
    for (std::size_t i = 0; i < g.pos.a.size(); ++i) g.pos.a[i] += dh.a[i];
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < L; ++i) g.b_in[j] += dh(i, j);
    add_matmul_tn(g.w_in, dh, cache.input);
    out.dinput = matmul_nn(dh, params.w_in);
    return out;
}

void adam_step(ModelParams& params, ModelParams& grads, AdamState& state,
               const TrainConfig& config, int t) {
    if (t < 1) throw std::invalid_argument("adam step index must be >= 1");
    auto pr = tensor_refs(params);
    auto gr = tensor_refs(grads);
    auto mr = tensor_refs(state.m);
    auto vr = tensor_refs(state.v);
    double b1 = config.adam_beta1, b2 = config.adam_beta2;
    double bc1 = 1.0 - std::pow(b1, t);
    double bc2 = 1.0 - std::pow(b2, t);
    for (std::size_t r = 0; r < pr.size(); ++r) {
        for (std::size_t i = 0; i < pr[r].n; ++i) {
            double gval = gr[r].data[i];
            double& m = mr[r].data[i];
            double& v = vr[r].data[i];
            m = b1 * m + (1.0 - b1) * gval;
            v = b2 * v + (1.0 - b2) * gval * gval;
            double mhat = m / bc1;
            double vhat = v / bc2;
            pr[r].data[i] -= config.learning_rate * mhat /
                             (std::sqrt(vhat) + config.adam_epsilon);
        }
    }
}

namespace {

MaskSet sample_mask_set(const HomeSchema& schema, double p_mask, Rng& rng) {
    MaskSet mask;
    do {
        mask.clear();
        for (std::size_t s = 0; s < schema.sensor_count(); ++s)
            if (rng.bernoulli(p_mask)) mask.insert(static_cast<int>(s));
    } while (mask.empty());
    return mask;
}

Mat mask_positions_for(const MaskSet& mask, const HomeSchema& schema) {
    Mat m(kSeqLen, schema.total_bits());
    for (int s : mask) {
        const auto& sensor = schema.at(s);
        for (int r = 0; r < kSeqLen; ++r)
            for (int c = sensor.bit_offset; c < sensor.bit_offset + sensor.bit_width; ++c)
                m(r, c) = 1.0;
    }
    return m;
}

Mat window_targets(const SequenceWindow& w) {
    Mat t(kSeqLen, w.cols);
    for (std::size_t i = 0; i < w.bits.size(); ++i) t.a[i] = w.bits[i];
    return t;
}

void accumulate(ModelParams& into, ModelParams& from) {
    auto a = tensor_refs(into);
    auto b = tensor_refs(from);
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t i = 0; i < a[r].n; ++i) a[r].data[i] += b[r].data[i];
}

void scale(ModelParams& p, double f) {
    for (auto& r : tensor_refs(p))
        for (std::size_t i = 0; i < r.n; ++i) r.data[i] *= f;
}

} // namespace

TrainResult train(const std::vector<SequenceWindow>& windows, const HomeSchema& schema,
                  const TrainConfig& config) {
    if (windows.empty()) throw std::invalid_argument("no training windows");
    TrainResult result;
    result.params = init_params(schema, config.seed);
    AdamState adam(schema.total_bits());
    Rng root(config.seed ^ 0xA5A5A5A5ULL);
    Rng shuffle_rng = root.fork(1);
    Rng mask_rng = root.fork(2);
    Rng drop_rng = root.fork(3);

    std::vector<std::size_t> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    int step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

        double epoch_sum = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            std::size_t batch_end =
                std::min(done + static_cast<std::size_t>(config.batch_size), order.size());
            ModelParams grads = ModelParams::shaped(schema.total_bits(),
                                                    result.params.dims);
            int in_batch = 0;
            for (std::size_t bi = done; bi < batch_end; ++bi) {
                const SequenceWindow& w = windows[order[bi]];
                MaskSet mask = sample_mask_set(schema, config.p_mask, mask_rng);
                Mat input = apply_mask(w, mask, result.params, schema);
                ForwardCache cache;
                Mat logits = forward(result.params, input, &cache, config.dropout_rate,
                                     config.dropout_rate > 0.0 ? &drop_rng : nullptr);
                Mat targets = window_targets(w);
                Mat mpos = mask_positions_for(mask, schema);
                FocalResult fr = focal_loss(logits, targets, mpos, config.focal_gamma);
                if (!std::isfinite(fr.loss))
                    throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                             std::to_string(epoch));
                epoch_sum += fr.loss;
                BackwardResult br = backward(result.params, cache, fr.dlogits);
                // masked input positions feed the learnable mask value
                for (std::size_t i = 0; i < mpos.a.size(); ++i)
                    if (mpos.a[i] != 0.0) br.grads.mask_value += br.dinput.a[i];
                accumulate(grads, br.grads);
                ++in_batch;
            }
            scale(grads, 1.0 / in_batch);
            adam_step(result.params, grads, adam, config, ++step);
            done = batch_end;
        }
        result.epoch_loss.push_back(epoch_sum / order.size());
    }
    return result;
}

// ---------------------------------------------------------------------------
// checkpoint io

std::string save_checkpoint(const ModelParams& params, const HomeSchema& schema,
                            const StatsMap& stats) {
    nlohmann::json header;
    header["schema"] = nlohmann::json::parse(schema.to_json());
    header["L"] = kSeqLen;
    header["d"] = params.dims.embed_dim;
    header["layers"] = params.dims.num_layers;
    header["heads"] = params.dims.num_heads;
    header["stats"] = nlohmann::json::parse(stats_to_json(stats));
    std::string hj = header.dump();

    std::string out;
    out += "TURS";
    uint16_t version = 1;
    out.append(reinterpret_cast<const char*>(&version), 2);
    uint32_t hlen = static_cast<uint32_t>(hj.size());
    out.append(reinterpret_cast<const char*>(&hlen), 4);
    out += hj;
    for (const auto& ref : tensor_refs(const_cast<ModelParams&>(params))) {
        for (std::size_t i = 0; i < ref.n; ++i) {
            float f = static_cast<float>(ref.data[i]);
            out.append(reinterpret_cast<const char*>(&f), 4);
        }
    }
    return out;
}

Checkpoint load_checkpoint(const std::string& bytes) {
    if (bytes.size() < 10 || bytes.compare(0, 4, "TURS") != 0)
        throw CheckpointError("corrupt checkpoint: bad magic");
    uint16_t version;
    std::memcpy(&version, bytes.data() + 4, 2);
    if (version != 1)
        throw CheckpointError("unsupported checkpoint version");
    uint32_t hlen;
    std::memcpy(&hlen, bytes.data() + 6, 4);
    if (bytes.size() < 10 + static_cast<std::size_t>(hlen))
        throw CheckpointError("corrupt checkpoint: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(10, hlen));
    } catch (const nlohmann::json::exception&) {
        throw CheckpointError("corrupt checkpoint: bad header");
    }
    ModelDims dims;
    dims.embed_dim = header.value("d", 0);
    dims.num_layers = header.value("layers", 0);
    dims.num_heads = header.value("heads", 0);
    if (header.value("L", 0) != kSeqLen || dims.embed_dim < 1 || dims.num_layers < 1 ||
        dims.num_heads < 1 || dims.embed_dim % dims.num_heads != 0)
        throw CheckpointError("checkpoint architecture mismatch");

    Checkpoint ck;
    ck.schema = HomeSchema::from_json(header["schema"].dump());
    ck.stats = stats_from_json(header["stats"].dump());
    ck.params = ModelParams::shaped(ck.schema.total_bits(), dims);

    std::size_t offset = 10 + hlen;
    auto refs = tensor_refs(ck.params);
    std::size_t total = 0;
    for (const auto& r : refs) total += r.n;
    if (bytes.size() != offset + total * 4)
        throw CheckpointError("corrupt checkpoint: tensor payload size mismatch");
    for (auto& ref : refs) {
        for (std::size_t i = 0; i < ref.n; ++i) {
            float f;
            std::memcpy(&f, bytes.data() + offset, 4);
            offset += 4;
            ref.data[i] = f;
        }
    }
    return ck;
}

// ---------------------------------------------------------------------------
// gradient check

double gradient_check_max_rel_err(int bit_dim, uint64_t seed, double h, ModelDims dims) {
    // synthetic schema with the requested fused width (pairs of binary +
    // numeric sensors: D = 6k)
    std::vector<std::string> bin, num;
    int dleft = bit_dim;
    int i = 0;
    while (dleft >= 6) {
        bin.push_back("b" + std::to_string(i));
        num.push_back("n" + std::to_string(i));
        dleft -= 6;
        ++i;
    }
    while (dleft >= 2) {
        bin.push_back("bx" + std::to_string(i++));
        dleft -= 2;
    }
    HomeSchema schema = HomeSchema::build(bin, num);

    Rng rng(seed);
    ModelParams params = init_params(schema, rng.next_u64(), dims);
    SequenceWindow w;
    w.cols = schema.total_bits();
    w.bits.resize(kSeqLen * schema.total_bits());
    for (auto& b : w.bits) b = rng.bernoulli(0.5) ? 1 : 0;
    MaskSet mask;
    mask.insert(static_cast<int>(rng.uniform_int(schema.sensor_count())));
    Mat targets = Mat(kSeqLen, w.cols);
    for (std::size_t j = 0; j < w.bits.size(); ++j) targets.a[j] = w.bits[j];
    Mat mpos(kSeqLen, w.cols);
    for (int s : mask) {
        const auto& sensor = schema.at(s);
        for (int r = 0; r < kSeqLen; ++r)
            for (int c = sensor.bit_offset; c < sensor.bit_offset + sensor.bit_width; ++c)
                mpos(r, c) = 1.0;
    }
    const double gamma = 2.0;

    auto loss_of = [&](ModelParams& p) {
        Mat input = apply_mask(w, mask, p, schema);
        Mat logits = forward(p, input, nullptr);
        return focal_loss(logits, targets, mpos, gamma).loss;
    };

    // analytic gradients
    Mat input = apply_mask(w, mask, params, schema);
    ForwardCache cache;
    Mat logits = forward(params, input, &cache);
    FocalResult fr = focal_loss(logits, targets, mpos, gamma);
    BackwardResult br = backward(params, cache, fr.dlogits);
    for (std::size_t j = 0; j < mpos.a.size(); ++j)
        if (mpos.a[j] != 0.0) br.grads.mask_value += br.dinput.a[j];

    auto prefs = tensor_refs(params);
    auto grefs = tensor_refs(br.grads);
    double max_rel = 0.0;
    for (std::size_t r = 0; r < prefs.size(); ++r) {
        for (std::size_t j = 0; j < prefs[r].n; ++j) {
            double saved = prefs[r].data[j];
            prefs[r].data[j] = saved + h;
            double lp = loss_of(params);
            prefs[r].data[j] = saved - h;
            double lm = loss_of(params);
            prefs[r].data[j] = saved;
            double fd = (lp - lm) / (2.0 * h);
            double an = grefs[r].data[j];
            double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            max_rel = std::max(max_rel, std::abs(fd - an) / denom);
        }
    }
    return max_rel;
}

} // namespace tureis
