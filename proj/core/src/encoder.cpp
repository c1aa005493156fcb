#include "subgroupte/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "subgroupte/layers.hpp"

namespace subgroupte {

namespace {

Matrix head_block(const Matrix& m, std::size_t head, std::size_t dh) {
    Matrix b(m.rows(), dh);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < dh; ++j) b(i, j) = m(i, head * dh + j);
    return b;
}

void add_head_block(Matrix& m, std::size_t head, std::size_t dh, const Matrix& b) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < dh; ++j) m(i, head * dh + j) += b(i, j);
}

void softmax_rows_inplace(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
}

// dS for S -> softmax_rows(S) = A given dA
Matrix softmax_rows_backward(const Matrix& a, const Matrix& da) {
    Matrix ds(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) dot += da(i, j) * a(i, j);
        for (std::size_t j = 0; j < a.cols(); ++j) ds(i, j) = a(i, j) * (da(i, j) - dot);
    }
    return ds;
}

Matrix project(const ParameterStore& params, const Matrix& x, const std::string& w,
               const std::string& b) {
    Matrix out = matmul(x, params.value(w));
    add_row_broadcast(out, params.value(b));
    return out;
}

void require_encoder(const NetSpec& spec) {
    if (!spec.encoder.use_encoder)
        throw std::invalid_argument("encoder: disabled in NetSpec (use_encoder=false)");
}

}  // namespace

void add_encoder(ParameterStore& params, const NetSpec& spec, Rng& rng) {
    require_encoder(spec);
    const std::size_t d = spec.encoder.token_dim;
    const std::size_t dff = spec.ffn_dim();
    auto xavier = [&](const std::string& name, std::size_t in, std::size_t out) {
        Matrix& w = params.add(name, in, out);
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        for (std::size_t i = 0; i < w.size(); ++i) w.at_flat(i) = uniform_in(rng, -bound, bound);
    };

    xavier("enc.wq", d, d);
    params.add("enc.bq", 1, d);
    xavier("enc.wk", d, d);
    params.add("enc.bk", 1, d);
    xavier("enc.wv", d, d);
    params.add("enc.bv", 1, d);
    xavier("enc.wo", d, d);
    params.add("enc.bo", 1, d);

    Matrix& w1 = params.add("enc.ffn1.w", d, dff);
    const double kaiming = std::sqrt(6.0 / static_cast<double>(d));
    for (std::size_t i = 0; i < w1.size(); ++i) w1.at_flat(i) = uniform_in(rng, -kaiming, kaiming);
    params.add("enc.ffn1.b", 1, dff);
    xavier("enc.ffn2.w", dff, d);
    params.add("enc.ffn2.b", 1, d);
}

TokenBatch encoder_forward(const ParameterStore& params, const NetSpec& spec,
                           const TokenBatch& tokens, EncoderCache& cache) {
    require_encoder(spec);
    const std::size_t d = spec.encoder.token_dim;
    const std::size_t heads = spec.encoder.n_heads;
    const std::size_t dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::size_t batch = tokens.size();

    cache.x = tokens;
    cache.q.resize(batch);
    cache.k.resize(batch);
    cache.v.resize(batch);
    cache.attn.assign(batch, {});
    cache.attn_out.resize(batch);
    cache.x1.resize(batch);
    cache.ffn_pre.resize(batch);

    TokenBatch out(batch);
    for (std::size_t s = 0; s < batch; ++s) {
        const Matrix& x = tokens[s];
        if (x.cols() != d)
            throw std::invalid_argument("encoder_forward: token width " +
                                        std::to_string(x.cols()) + " != token_dim " +
                                        std::to_string(d));
        const std::size_t p = x.rows();

        Matrix q = project(params, x, "enc.wq", "enc.bq");
        Matrix k = project(params, x, "enc.wk", "enc.bk");
        Matrix v = project(params, x, "enc.wv", "enc.bv");

        Matrix attn_out(p, d);
        cache.attn[s].reserve(heads);
        for (std::size_t h = 0; h < heads; ++h) {
            Matrix qh = head_block(q, h, dh);
            Matrix kh = head_block(k, h, dh);
            Matrix vh = head_block(v, h, dh);
            Matrix scores = matmul_a_bt(qh, kh);
            scale_inplace(scores, inv_sqrt_dh);
            softmax_rows_inplace(scores);
            add_head_block(attn_out, h, dh, matmul(scores, vh));
            cache.attn[s].push_back(std::move(scores));
        }

        Matrix x1 = project(params, attn_out, "enc.wo", "enc.bo");
        add_inplace(x1, x);

        Matrix ffn_pre = matmul(x1, params.value("enc.ffn1.w"));
        add_row_broadcast(ffn_pre, params.value("enc.ffn1.b"));
        Matrix ffn_act = ffn_pre;
        for (std::size_t i = 0; i < ffn_act.size(); ++i)
            ffn_act.at_flat(i) = std::max(0.0, ffn_act.at_flat(i));
        Matrix y = matmul(ffn_act, params.value("enc.ffn2.w"));
        add_row_broadcast(y, params.value("enc.ffn2.b"));
        add_inplace(y, x1);

        cache.q[s] = std::move(q);
        cache.k[s] = std::move(k);
        cache.v[s] = std::move(v);
        cache.attn_out[s] = std::move(attn_out);
        cache.x1[s] = std::move(x1);
        cache.ffn_pre[s] = std::move(ffn_pre);
        out[s] = std::move(y);
    }
    return out;
}

TokenBatch encoder_backward(ParameterStore& params, const NetSpec& spec, const EncoderCache& cache,
                            const TokenBatch& grad_out) {
    require_encoder(spec);
    const std::size_t d = spec.encoder.token_dim;
    const std::size_t heads = spec.encoder.n_heads;
    const std::size_t dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::size_t batch = cache.x.size();
    if (grad_out.size() != batch)
        throw std::runtime_error("encoder_backward: grad batch size does not match cache");

    const Matrix& wo = params.value("enc.wo");
    const Matrix& w1 = params.value("enc.ffn1.w");
    const Matrix& w2 = params.value("enc.ffn2.w");
    const Matrix& wq = params.value("enc.wq");
    const Matrix& wk = params.value("enc.wk");
    const Matrix& wv = params.value("enc.wv");

    TokenBatch dtokens(batch);
    for (std::size_t s = 0; s < batch; ++s) {
        const Matrix& dy = grad_out[s];
        const Matrix& x = cache.x[s];
        const Matrix& x1 = cache.x1[s];
        const Matrix& ffn_pre = cache.ffn_pre[s];

        // feedforward sublayer: y = x1 + relu(x1*W1 + b1)*W2 + b2
        Matrix ffn_act = ffn_pre;
        for (std::size_t i = 0; i < ffn_act.size(); ++i)
            ffn_act.at_flat(i) = std::max(0.0, ffn_act.at_flat(i));
        add_inplace(params.grad("enc.ffn2.w"), matmul_at_b(ffn_act, dy));
        add_inplace(params.grad("enc.ffn2.b"), column_sums(dy));
        Matrix dffn_pre = matmul_a_bt(dy, w2);
        for (std::size_t i = 0; i < dffn_pre.size(); ++i)
            if (ffn_pre.at_flat(i) <= 0.0) dffn_pre.at_flat(i) = 0.0;
        add_inplace(params.grad("enc.ffn1.w"), matmul_at_b(x1, dffn_pre));
        add_inplace(params.grad("enc.ffn1.b"), column_sums(dffn_pre));

        Matrix dx1 = dy;
        add_inplace(dx1, matmul_a_bt(dffn_pre, w1));

        // attention sublayer: x1 = x + attn_out*Wo + bo
        add_inplace(params.grad("enc.wo"), matmul_at_b(cache.attn_out[s], dx1));
        add_inplace(params.grad("enc.bo"), column_sums(dx1));
        Matrix dattn_out = matmul_a_bt(dx1, wo);

        Matrix dq(x.rows(), d), dk(x.rows(), d), dv(x.rows(), d);
        for (std::size_t h = 0; h < heads; ++h) {
            const Matrix& a = cache.attn[s][h];
            Matrix doh = head_block(dattn_out, h, dh);
            Matrix vh = head_block(cache.v[s], h, dh);
            Matrix qh = head_block(cache.q[s], h, dh);
            Matrix kh = head_block(cache.k[s], h, dh);

            Matrix da = matmul_a_bt(doh, vh);
            Matrix dvh = matmul_at_b(a, doh);
            Matrix ds = softmax_rows_backward(a, da);
            scale_inplace(ds, inv_sqrt_dh);
            Matrix dqh = matmul(ds, kh);
            Matrix dkh = matmul_at_b(ds, qh);

            add_head_block(dq, h, dh, dqh);
            add_head_block(dk, h, dh, dkh);
            add_head_block(dv, h, dh, dvh);
        }

        add_inplace(params.grad("enc.wq"), matmul_at_b(x, dq));
        add_inplace(params.grad("enc.bq"), column_sums(dq));
        add_inplace(params.grad("enc.wk"), matmul_at_b(x, dk));
        add_inplace(params.grad("enc.bk"), column_sums(dk));
        add_inplace(params.grad("enc.wv"), matmul_at_b(x, dv));
        add_inplace(params.grad("enc.bv"), column_sums(dv));

        Matrix dx = dx1;  // residual
        add_inplace(dx, matmul_a_bt(dq, wq));
        add_inplace(dx, matmul_a_bt(dk, wk));
        add_inplace(dx, matmul_a_bt(dv, wv));
        dtokens[s] = std::move(dx);
    }
    return dtokens;
}

}  // namespace subgroupte
