#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sedw/losses.hpp"
#include "sedw/model.hpp"
#include "sedw/rng.hpp"

using namespace sedw;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (double& x : m.values()) x = rng.uniform(lo, hi);
    return m;
}

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

// independent oracles, written with plain loops
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    return out;
}

Matrix oracle_layer_norm(const Matrix& x, const LayerNormParams& p) {
    Matrix y(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) mean += x(r, c);
        mean /= static_cast<double>(x.cols());
        double var = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
        var /= static_cast<double>(x.cols());
        for (std::size_t c = 0; c < x.cols(); ++c)
            y(r, c) = (x(r, c) - mean) / std::sqrt(var + 1e-5) * p.gain[c] + p.bias[c];
    }
    return y;
}

Matrix oracle_pff(const Matrix& x, const PffParams& p) {
    Matrix h = naive_matmul(x, p.fc1.w);
    for (std::size_t r = 0; r < h.rows(); ++r)
        for (std::size_t c = 0; c < h.cols(); ++c) {
            const double z = h(r, c) + p.fc1.b[c];
            h(r, c) = z * std::tanh(std::log1p(std::exp(z)));
        }
    Matrix y = naive_matmul(h, p.fc2.w);
    for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += p.fc2.b[c];
    return y;
}

Matrix oracle_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    Matrix scores = naive_matmul(q, transpose(k));
    for (double& s : scores.values()) s /= std::sqrt(static_cast<double>(q.cols()));
    for (std::size_t r = 0; r < scores.rows(); ++r) {
        double peak = scores(r, 0);
        for (std::size_t c = 1; c < scores.cols(); ++c) peak = std::max(peak, scores(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < scores.cols(); ++c) {
            scores(r, c) = std::exp(scores(r, c) - peak);
            sum += scores(r, c);
        }
        for (std::size_t c = 0; c < scores.cols(); ++c) scores(r, c) /= sum;
    }
    return naive_matmul(scores, v);
}

Matrix oracle_mha(const Matrix& x, const AttentionParams& p) {
    const std::size_t d_k = p.w_q[0].cols();
    Matrix concat(x.rows(), p.heads() * d_k);
    for (std::size_t h = 0; h < p.heads(); ++h) {
        const Matrix head = oracle_attention(naive_matmul(x, p.w_q[h]), naive_matmul(x, p.w_k[h]),
                                             naive_matmul(x, p.w_v[h]));
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < d_k; ++c) concat(r, h * d_k + c) = head(r, c);
    }
    return naive_matmul(concat, p.w_o);
}

// step-by-step composition of the encoder layer equations
Matrix oracle_macaron(const Matrix& x, const MacaronLayerParams& p, double half) {
    Matrix s1 = x;
    const Matrix p1 = oracle_pff(x, p.pff1);
    for (std::size_t i = 0; i < s1.size(); ++i) s1.values()[i] += half * p1.values()[i];
    const Matrix xp = oracle_layer_norm(s1, p.ln1);
    Matrix s2 = xp;
    const Matrix att = oracle_mha(xp, p.att);
    for (std::size_t i = 0; i < s2.size(); ++i) s2.values()[i] += att.values()[i];
    const Matrix xt = oracle_layer_norm(s2, p.ln2);
    Matrix s3 = xt;
    const Matrix p2 = oracle_pff(xt, p.pff2);
    for (std::size_t i = 0; i < s3.size(); ++i) s3.values()[i] += half * p2.values()[i];
    return oracle_layer_norm(s3, p.ln3);
}

CmnConfig tiny_flm(bool pe = true) {
    CmnConfig c;
    c.variant = CmnVariant::kFlm;
    c.input_frames = 32;
    c.input_bins = 16;
    c.conv_filters = {4, 8};
    c.conv_pools = {{1, 4}, {1, 4}};
    c.encoder_layers = 1;
    c.heads = 2;
    c.n_classes = 3;
    c.positional_encoding = pe;
    return c;
}

CmnConfig tiny_clm(bool pe = true) {
    CmnConfig c;
    c.variant = CmnVariant::kClm;
    c.input_frames = 32;
    c.input_bins = 16;
    c.conv_filters = {4, 8};
    c.conv_pools = {{2, 4}, {2, 4}};
    c.encoder_layers = 1;
    c.heads = 2;
    c.n_classes = 3;
    c.positional_encoding = pe;
    return c;
}

MelSpectrogram random_input(const CmnConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    MelSpectrogram m;
    m.is_log = true;
    m.values = random_matrix(cfg.input_frames, cfg.input_bins, rng);
    return m;
}

// finite differences over a sample of entries from every parameter block
template <typename LossFn>
void check_gradients_sampled(CmnParameters params, const CmnParameters& analytic,
                             const LossFn& loss_of, int per_block, double tol) {
    const double h = 1e-5;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> plan;
    Rng pick(12345);
    visit_params(params, [&](const std::string& name, double*, std::size_t len) {
        std::vector<std::size_t> idx = {0, len / 2, len - 1};
        for (int i = 0; i < per_block; ++i) idx.push_back(pick.index(len));
        plan.emplace_back(name, idx);
    });

    std::vector<std::pair<const double*, std::size_t>> ga;
    visit_params(analytic, [&](const std::string&, const double* d, std::size_t n) {
        ga.emplace_back(d, n);
    });

    std::size_t block = 0;
    visit_params(params, [&](const std::string& name, double* data, std::size_t len) {
        const auto& [plan_name, idx] = plan[block];
        REQUIRE(plan_name == name);
        for (std::size_t i : idx) {
            if (i >= len) continue;
            const double saved = data[i];
            data[i] = saved + h;
            const double up = loss_of(params);
            data[i] = saved - h;
            const double down = loss_of(params);
            data[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = ga[block].first[i];
            INFO("block ", name, " index ", i, " fd ", fd, " analytic ", an);
            CHECK(rel_err(fd, an) <= tol);
        }
        ++block;
    });
}

} // namespace

TEST_CASE("mish values and asymptotes") {
    CHECK(mish(0.0) == 0.0);
    const double direct = 1.0 * std::tanh(std::log1p(std::exp(1.0)));
    CHECK(mish(1.0) == doctest::Approx(direct).epsilon(1e-14));
    CHECK(mish(1.0) == doctest::Approx(0.865098).epsilon(1e-6));
    CHECK(std::fabs(mish(40.0) - 40.0) < 1e-9);
    CHECK(std::fabs(mish(-40.0)) < 1e-9);
    CHECK(std::isfinite(mish(700.0)));
    CHECK(std::isfinite(mish(-700.0)));

    // derivative against central differences
    for (double x : {-3.0, -0.5, 0.0, 0.7, 2.0, 15.0}) {
        const double fd = (mish(x + 1e-6) - mish(x - 1e-6)) / 2e-6;
        CHECK(rel_err(fd, mish_grad(x)) < 1e-7);
    }
}

TEST_CASE("conv block: identity kernel, zero kernel, and a naive oracle") {
    ConvBlockParams p;
    p.in_ch = 1;
    p.out_ch = 1;
    p.kernel.assign(9, 0.0);
    p.k(0, 0, 1, 1) = 1.0; // center tap
    p.bias.assign(1, 0.0);
    p.pool_t = 1;
    p.pool_f = 1;

    Rng rng(3);
    Tensor3 x(1, 5, 6);
    for (double& v : x.v) v = rng.uniform(0.1, 2.0);
    const Tensor3 y = conv_block_forward(x, p);
    for (std::size_t i = 0; i < x.v.size(); ++i)
        CHECK(y.v[i] == doctest::Approx(mish(x.v[i])).epsilon(1e-14));

    ConvBlockParams zero = p;
    zero.kernel.assign(9, 0.0);
    const Tensor3 z = conv_block_forward(x, zero);
    for (double v : z.v) CHECK(v == 0.0);

    // random 1x8x8 against the 9-term dot product
    ConvBlockParams rp;
    rp.in_ch = 1;
    rp.out_ch = 2;
    rp.kernel.resize(18);
    for (double& v : rp.kernel) v = rng.uniform(-1, 1);
    rp.bias = {0.3, -0.2};
    rp.pool_t = 1;
    rp.pool_f = 1;
    Tensor3 xi(1, 8, 8);
    for (double& v : xi.v) v = rng.uniform(-1, 1);
    const Tensor3 yo = conv_block_forward(xi, rp);
    for (std::size_t o = 0; o < 2; ++o)
        for (long t = 0; t < 8; ++t)
            for (long f = 0; f < 8; ++f) {
                double acc = rp.bias[o];
                for (long u = 0; u < 3; ++u)
                    for (long v = 0; v < 3; ++v) {
                        const long tt = t + u - 1, ff = f + v - 1;
                        if (tt < 0 || tt >= 8 || ff < 0 || ff >= 8) continue;
                        acc += rp.k(o, 0, static_cast<std::size_t>(u), static_cast<std::size_t>(v)) *
                               xi.at(0, static_cast<std::size_t>(tt), static_cast<std::size_t>(ff));
                    }
                CHECK(std::fabs(yo.at(o, static_cast<std::size_t>(t), static_cast<std::size_t>(f)) -
                                mish(acc)) < 1e-12);
            }

    // pooling must divide the spatial dims
    ConvBlockParams bad = p;
    bad.pool_t = 3;
    CHECK_THROWS(conv_block_forward(x, bad));
}

TEST_CASE("layer_norm closed forms") {
    LayerNormParams p;
    p.gain.assign(4, 1.0);
    p.bias.assign(4, 0.0);
    const Matrix constant(1, 4, 2.5);
    const Matrix y = layer_norm(constant, p);
    for (double v : y.values()) CHECK(std::fabs(v) < 1e-12);

    LayerNormParams p2;
    p2.gain.assign(2, 1.0);
    p2.bias.assign(2, 0.0);
    const Matrix pm = Matrix::from_rows({{1.0, -1.0}});
    const Matrix y2 = layer_norm(pm, p2);
    const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(y2(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(y2(0, 1) == doctest::Approx(-expected).epsilon(1e-12));

    LayerNormParams p3;
    p3.gain.assign(4, 0.0);
    p3.bias.assign(4, 0.7);
    Rng rng(9);
    const Matrix y3 = layer_norm(random_matrix(3, 4, rng), p3);
    for (double v : y3.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));

    // random instance against the oracle
    LayerNormParams p4;
    for (int i = 0; i < 6; ++i) {
        p4.gain.push_back(rng.uniform(0.5, 1.5));
        p4.bias.push_back(rng.uniform(-0.5, 0.5));
    }
    const Matrix x = random_matrix(5, 6, rng);
    CHECK(max_abs_diff(layer_norm(x, p4), oracle_layer_norm(x, p4)) < 1e-12);
}

TEST_CASE("position-wise feedforward") {
    Rng rng(13);
    PffParams zero;
    zero.fc1.w = Matrix(4, 6);
    zero.fc1.b.assign(6, 0.0);
    zero.fc2.w = Matrix(6, 4);
    zero.fc2.b.assign(4, 0.0);
    const Matrix x = random_matrix(3, 4, rng);
    CHECK(max_entry(pff(x, zero)) == 0.0);

    // identity weights with large positive input approach the identity map
    PffParams ident;
    ident.fc1.w = Matrix(3, 3);
    ident.fc2.w = Matrix(3, 3);
    for (int i = 0; i < 3; ++i) {
        ident.fc1.w(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = 1.0;
        ident.fc2.w(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = 1.0;
    }
    ident.fc1.b.assign(3, 0.0);
    ident.fc2.b.assign(3, 0.0);
    const Matrix big(2, 3, 50.0);
    const Matrix y = pff(big, ident);
    for (double v : y.values()) CHECK(v == doctest::Approx(50.0).epsilon(1e-9));

    PffParams p;
    p.fc1.w = random_matrix(4, 6, rng);
    p.fc1.b = {0.1, -0.2, 0.3, 0.0, 0.5, -0.1};
    p.fc2.w = random_matrix(6, 4, rng);
    p.fc2.b = {0.2, 0.1, -0.3, 0.0};
    CHECK(max_abs_diff(pff(x, p), oracle_pff(x, p)) < 1e-12);
}

TEST_CASE("attention closed forms and oracle") {
    Rng rng(17);
    // n=1: softmax of a scalar is 1, output equals V
    const Matrix q1 = random_matrix(1, 4, rng), k1 = random_matrix(1, 4, rng),
                 v1 = random_matrix(1, 4, rng);
    CHECK(max_abs_diff(attention(q1, k1, v1), v1) < 1e-15);

    // zero queries give uniform attention: the column mean of V
    const Matrix q0(3, 4), k0 = random_matrix(3, 4, rng), v0 = random_matrix(3, 4, rng);
    const Matrix u = attention(q0, k0, v0);
    for (std::size_t c = 0; c < 4; ++c) {
        const double mean = (v0(0, c) + v0(1, c) + v0(2, c)) / 3.0;
        for (std::size_t r = 0; r < 3; ++r) CHECK(u(r, c) == doctest::Approx(mean).epsilon(1e-12));
    }

    const Matrix q = random_matrix(3, 4, rng), k = random_matrix(3, 4, rng),
                 v = random_matrix(3, 4, rng);
    CHECK(max_abs_diff(attention(q, k, v), oracle_attention(q, k, v)) < 1e-12);

    // attention rows sum to one: with V = ones the output must be ones
    const Matrix ones(3, 4, 1.0);
    const Matrix o = attention(q, k, ones);
    for (double x : o.values()) CHECK(std::fabs(x - 1.0) <= 1e-12);
}

TEST_CASE("multi-head attention") {
    Rng rng(19);
    // single head with identity projections reduces to plain attention
    AttentionParams ident;
    Matrix eye(4, 4);
    for (int i = 0; i < 4; ++i) eye(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = 1.0;
    ident.w_q = {eye};
    ident.w_k = {eye};
    ident.w_v = {eye};
    ident.w_o = eye;
    const Matrix x = random_matrix(5, 4, rng);
    CHECK(max_abs_diff(multi_head_attention(x, ident), attention(x, x, x)) < 1e-13);

    AttentionParams p;
    for (int h = 0; h < 2; ++h) {
        p.w_q.push_back(random_matrix(4, 2, rng));
        p.w_k.push_back(random_matrix(4, 2, rng));
        p.w_v.push_back(random_matrix(4, 2, rng));
    }
    p.w_o = random_matrix(4, 4, rng);
    CHECK(max_abs_diff(multi_head_attention(x, p), oracle_mha(x, p)) < 1e-12);

    AttentionParams zero_out = p;
    zero_out.w_o = Matrix(4, 4);
    CHECK(max_entry(multi_head_attention(x, zero_out)) == 0.0);
}

TEST_CASE("macaron layer matches the step-by-step oracle") {
    Rng rng(23);
    const std::size_t d = 6, n = 7;
    MacaronLayerParams p;
    p.pff1.fc1.w = random_matrix(d, d, rng);
    p.pff1.fc1.b.assign(d, 0.1);
    p.pff1.fc2.w = random_matrix(d, d, rng);
    p.pff1.fc2.b.assign(d, -0.05);
    p.pff2 = p.pff1;
    p.pff2.fc1.w = random_matrix(d, d, rng);
    for (int h = 0; h < 2; ++h) {
        p.att.w_q.push_back(random_matrix(d, 3, rng));
        p.att.w_k.push_back(random_matrix(d, 3, rng));
        p.att.w_v.push_back(random_matrix(d, 3, rng));
    }
    p.att.w_o = random_matrix(d, d, rng);
    for (std::size_t i = 0; i < d; ++i) {
        p.ln1.gain.push_back(rng.uniform(0.8, 1.2));
        p.ln1.bias.push_back(rng.uniform(-0.1, 0.1));
        p.ln2.gain.push_back(rng.uniform(0.8, 1.2));
        p.ln2.bias.push_back(rng.uniform(-0.1, 0.1));
        p.ln3.gain.push_back(rng.uniform(0.8, 1.2));
        p.ln3.bias.push_back(rng.uniform(-0.1, 0.1));
    }

    const Matrix x = random_matrix(n, d, rng);
    CHECK(max_abs_diff(macaron_layer(x, p, 0.5), oracle_macaron(x, p, 0.5)) < 1e-12);

    // residual-only path: all sublayer weights zero, LN gain 1 bias 0
    MacaronLayerParams zp = p;
    zp.pff1.fc1.w.fill(0.0);
    zp.pff1.fc1.b.assign(d, 0.0);
    zp.pff1.fc2.w.fill(0.0);
    zp.pff1.fc2.b.assign(d, 0.0);
    zp.pff2 = zp.pff1;
    for (int h = 0; h < 2; ++h) {
        zp.att.w_q[static_cast<std::size_t>(h)].fill(0.0);
        zp.att.w_k[static_cast<std::size_t>(h)].fill(0.0);
        zp.att.w_v[static_cast<std::size_t>(h)].fill(0.0);
    }
    zp.att.w_o.fill(0.0);
    zp.ln1.gain.assign(d, 1.0);
    zp.ln1.bias.assign(d, 0.0);
    zp.ln2 = zp.ln1;
    zp.ln3 = zp.ln1;
    LayerNormParams unit = zp.ln1;
    const Matrix expected = layer_norm(layer_norm(layer_norm(x, unit), unit), unit);
    CHECK(max_abs_diff(macaron_layer(x, zp, 0.5), expected) < 1e-13);
}

TEST_CASE("macaron half-step identity: doubled PFF output with halved factors") {
    Rng rng(29);
    const std::size_t d = 4;
    MacaronLayerParams p;
    p.pff1.fc1.w = random_matrix(d, d, rng);
    p.pff1.fc1.b.assign(d, 0.2);
    p.pff1.fc2.w = random_matrix(d, d, rng);
    p.pff1.fc2.b.assign(d, -0.1);
    p.pff2.fc1.w = random_matrix(d, d, rng);
    p.pff2.fc1.b.assign(d, 0.0);
    p.pff2.fc2.w = random_matrix(d, d, rng);
    p.pff2.fc2.b.assign(d, 0.3);
    p.att.w_q = {random_matrix(d, d, rng)};
    p.att.w_k = {random_matrix(d, d, rng)};
    p.att.w_v = {random_matrix(d, d, rng)};
    p.att.w_o = random_matrix(d, d, rng);
    p.ln1.gain.assign(d, 1.0);
    p.ln1.bias.assign(d, 0.0);
    p.ln2 = p.ln1;
    p.ln3 = p.ln1;

    MacaronLayerParams doubled = p;
    for (Matrix* w : {&doubled.pff1.fc2.w, &doubled.pff2.fc2.w})
        for (double& v : w->values()) v *= 2.0;
    for (std::vector<double>* b : {&doubled.pff1.fc2.b, &doubled.pff2.fc2.b})
        for (double& v : *b) v *= 2.0;

    const Matrix x = random_matrix(5, d, rng);
    CHECK(max_abs_diff(macaron_layer(x, p, 0.5), macaron_layer(x, doubled, 0.25)) < 1e-12);
}

TEST_CASE("positional encoding") {
    const Matrix pe = positional_encoding(3, 4);
    CHECK(pe(0, 0) == 0.0);
    CHECK(pe(0, 1) == 1.0);
    CHECK(pe(0, 2) == 0.0);
    CHECK(pe(0, 3) == 1.0);
    CHECK(pe(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
    CHECK(pe(1, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-12));
    for (double v : pe.values()) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("flm forward shape, sigmoid range and determinism") {
    const CmnConfig cfg = CmnConfig::flm_default();
    CmnParameters p = init_params(cfg, 7);
    Rng rng(31);
    MelSpectrogram m;
    m.values = random_matrix(640, 64, rng);
    const Matrix probs = flm_forward(m, p);
    CHECK(probs.rows() == 640);
    CHECK(probs.cols() == 10);
    for (double v : probs.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    const Matrix again = flm_forward(m, p);
    CHECK(max_abs_diff(probs, again) == 0.0);

    // zero classifier gives 0.5 everywhere
    CmnParameters zc = p;
    zc.classifier.w.fill(0.0);
    zc.classifier.b.assign(10, 0.0);
    const Matrix half = flm_forward(m, zc);
    for (double v : half.values()) CHECK(v == 0.5);

    MelSpectrogram wrong;
    wrong.values = Matrix(100, 64);
    CHECK_THROWS(flm_forward(wrong, p));
    CHECK_THROWS(clm_forward(m, p)); // wrong variant
}

TEST_CASE("clm forward produces 10 clip probabilities") {
    const CmnConfig cfg = CmnConfig::clm_default();
    CmnParameters p = init_params(cfg, 11);
    Rng rng(37);
    MelSpectrogram m;
    m.values = random_matrix(640, 64, rng);
    const auto probs = clm_forward(m, p);
    CHECK(probs.size() == 10);
    for (double v : probs) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    CmnParameters zc = p;
    zc.classifier.w.fill(0.0);
    zc.classifier.b.assign(10, 0.0);
    for (double v : clm_forward(m, zc)) CHECK(v == 0.5);

    // constant-in-time input: prediction invariant to circular time shifts
    MelSpectrogram constant;
    constant.values = Matrix(640, 64);
    for (std::size_t f = 0; f < 64; ++f) {
        const double v = rng.uniform(0.0, 1.0);
        for (std::size_t t = 0; t < 640; ++t) constant.values(t, f) = v;
    }
    const auto base = clm_forward(constant, p);
    MelSpectrogram shifted = constant; // any circular shift of constant rows is itself
    const auto moved = clm_forward(shifted, p);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(base[i] == moved[i]);
}

TEST_CASE("temporal max pool") {
    Matrix constant(5, 3, 0.3);
    const auto c = temporal_max_pool(constant);
    for (double v : c) CHECK(v == 0.3);

    Matrix spike(4, 2, 0.1);
    spike(2, 1) = 0.9;
    std::vector<std::size_t> argmax;
    const auto s = temporal_max_pool(spike, &argmax);
    CHECK(s[1] == 0.9);
    CHECK(argmax[1] == 2);

    Rng rng(41);
    const Matrix r = random_matrix(20, 6, rng, 0.0, 1.0);
    const auto m = temporal_max_pool(r);
    for (std::size_t c2 = 0; c2 < 6; ++c2) {
        double expected = 0.0;
        for (std::size_t t = 0; t < 20; ++t) expected = std::max(expected, r(t, c2));
        CHECK(m[c2] == expected);
    }
}

TEST_CASE("init_params is seeded, bounded, and LN-neutral") {
    const CmnConfig cfg = tiny_flm();
    const CmnParameters a = init_params(cfg, 5);
    const CmnParameters b = init_params(cfg, 5);
    bool identical = true;
    visit_params(a, [&](const std::string& name, const double* data, std::size_t n) {
        visit_params(b, [&](const std::string& name2, const double* data2, std::size_t n2) {
            if (name == name2 && n == n2)
                for (std::size_t i = 0; i < n; ++i) identical &= data[i] == data2[i];
        });
    });
    CHECK(identical);

    for (const MacaronLayerParams& ml : a.encoder) {
        for (double g : ml.ln1.gain) CHECK(g == 1.0);
        for (double g : ml.ln2.gain) CHECK(g == 1.0);
        for (double g : ml.ln3.gain) CHECK(g == 1.0);
        for (double bi : ml.ln1.bias) CHECK(bi == 0.0);
    }
    for (const ConvBlockParams& cb : a.conv) {
        const double bound = std::sqrt(6.0 / static_cast<double>(cb.in_ch * 9));
        for (double k : cb.kernel) CHECK(std::fabs(k) <= bound);
        for (double bi : cb.bias) CHECK(bi == 0.0);
    }

    CmnConfig bad = cfg;
    bad.heads = 3; // d_model 8 not divisible
    CHECK_THROWS(init_params(bad, 1));
}

TEST_CASE("gradient check: FLM with BCE, positional encoding on") {
    const CmnConfig cfg = tiny_flm(true);
    CmnParameters p = init_params(cfg, 21);
    const MelSpectrogram x = random_input(cfg, 99);
    Rng rng(43);
    Matrix y(cfg.input_frames, cfg.n_classes);
    for (double& v : y.values()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;

    auto loss_of = [&](const CmnParameters& q) { return bce(flm_forward(x, q), y); };

    ForwardTrace tr;
    const Matrix probs = flm_forward(x, p, &tr);
    const CmnParameters analytic = backward(bce_grad(probs, y), tr, p);
    check_gradients_sampled(p, analytic, loss_of, 4, 1e-4);
}

TEST_CASE("gradient check: CLM with BCE, positional encoding off") {
    const CmnConfig cfg = tiny_clm(false);
    CmnParameters p = init_params(cfg, 27);
    const MelSpectrogram x = random_input(cfg, 101);
    Matrix y(1, cfg.n_classes);
    y(0, 1) = 1.0;

    auto loss_of = [&](const CmnParameters& q) {
        Matrix probs(1, cfg.n_classes);
        probs.values() = clm_forward(x, q);
        return bce(probs, y);
    };

    ForwardTrace tr;
    clm_forward(x, p, &tr);
    const CmnParameters analytic = backward(bce_grad(tr.probs, y), tr, p);
    check_gradients_sampled(p, analytic, loss_of, 4, 1e-4);
}

TEST_CASE("gradient check: consistency path through the temporal max pool") {
    const CmnConfig cfg = tiny_flm(true);
    CmnParameters p = init_params(cfg, 33);
    const MelSpectrogram x = random_input(cfg, 103);
    const std::vector<double> target = {0.9, 0.2, 0.6};

    auto loss_of = [&](const CmnParameters& q) {
        const auto clip = temporal_max_pool(flm_forward(x, q));
        return mse(clip, target);
    };

    ForwardTrace tr;
    const Matrix probs = flm_forward(x, p, &tr);
    std::vector<std::size_t> argmax;
    const auto clip = temporal_max_pool(probs, &argmax);
    Matrix dp(probs.rows(), probs.cols());
    for (std::size_t k = 0; k < clip.size(); ++k)
        dp(argmax[k], k) = 2.0 * (clip[k] - target[k]) / static_cast<double>(clip.size());
    const CmnParameters analytic = backward(dp, tr, p);
    check_gradients_sampled(p, analytic, loss_of, 3, 1e-4);
}

TEST_CASE("backward edge cases") {
    const CmnConfig cfg = tiny_flm();
    CmnParameters p = init_params(cfg, 3);
    const MelSpectrogram x = random_input(cfg, 5);

    ForwardTrace tr;
    const Matrix probs = flm_forward(x, p, &tr);

    // zero upstream gradient -> all-zero gradients
    const CmnParameters g = backward(Matrix(probs.rows(), probs.cols()), tr, p);
    visit_params(g, [&](const std::string&, const double* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) CHECK(data[i] == 0.0);
    });

    // p = y makes the sigmoid+BCE composite gradient vanish
    const Matrix zero_grad = bce_grad(probs, probs);
    CHECK(max_entry(zero_grad) == 0.0);
    CHECK(min_entry(zero_grad) == 0.0);

    // missing trace is rejected
    ForwardTrace empty;
    CHECK_THROWS(backward(Matrix(probs.rows(), probs.cols()), empty, p));
}

TEST_CASE("checkpoint round trip") {
    const CmnConfig cfg = tiny_clm();
    CmnParameters p = init_params(cfg, 17);
    save_checkpoint("test_ckpt.sedw", p, {{"epoch", "3"}});
    const CmnParameters r = load_checkpoint("test_ckpt.sedw");
    CHECK(r.config.variant == CmnVariant::kClm);
    CHECK(r.config.conv_filters == cfg.conv_filters);
    CHECK(r.config.n_classes == cfg.n_classes);
    const MelSpectrogram x = random_input(cfg, 19);
    const auto a = clm_forward(x, p);
    const auto b = clm_forward(x, r);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    std::filesystem::remove("test_ckpt.sedw");
}
