#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "intra/binio.hpp"
#include "intra/error.hpp"
#include "intra/model.hpp"
#include "intra/rqwk.hpp"

using namespace intra;
using testing_util::random_mat;

TEST_CASE("rms_norm examples") {
    Vec ones = Vec::Ones(4);
    CHECK((rms_norm(ones, 0.0) - ones).cwiseAbs().maxCoeff() == 0.0);
    Vec zero = Vec::Zero(2);
    CHECK(rms_norm(zero, 1e-6).cwiseAbs().maxCoeff() == 0.0);
    Vec x(2);
    x << 3, 4;
    Vec y = rms_norm(x, 0.0);
    CHECK(y[0] == doctest::Approx(0.848528137423857).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(1.131370849898476).epsilon(1e-14));
}

TEST_CASE("rope rotation") {
    const ModelConfig cfg = toy_config();
    Mat q = random_mat(cfg.n_h, cfg.d_h, 1);
    CHECK((rope_apply(q, 0, cfg) - q).cwiseAbs().maxCoeff() == 0.0);
    for (int p : {1, 7, 300}) {
        Mat r = rope_apply(q, p, cfg);
        for (int h = 0; h < cfg.n_h; ++h) CHECK(r.row(h).norm() == doctest::Approx(q.row(h).norm()).epsilon(1e-13));
    }
    double row[2] = {1.0, 0.0};
    const double c = std::cos(std::numbers::pi / 2), s = std::sin(std::numbers::pi / 2);
    rope_rotate(row, &c, &s, 2);
    CHECK(std::abs(row[0]) < 1e-15);
    CHECK(row[1] == doctest::Approx(1.0));
    rope_rotate(row, &c, &s, 2, true);
    CHECK(row[0] == doctest::Approx(1.0));
}

TEST_CASE("encoder shape, determinism and golden row") {
    const ModelWeights w = init_random(toy_config(), 7);
    const Mat a = encode(w, {5, 6, 7, 8, 9});
    CHECK(a.rows() == 5);
    CHECK(a.cols() == w.cfg.d);
    const Mat b = encode(w, {5, 6, 7, 8, 9});
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    // Generated once by this implementation (libstdc++ normal_distribution) and frozen.
    const double golden[8] = {-0.79554769221414579, -0.56736303402110189, -1.5169287069327164,
                              -0.26987545446024325, 0.016044133795362417,  0.052967069686053039,
                              -1.5942890862320842,  0.15160970689148898};
    for (int i = 0; i < 8; ++i) CHECK(a(2, i) == doctest::Approx(golden[i]).epsilon(1e-12));
    CHECK_THROWS_AS(encode(w, {5, 9999}), Error);
}

TEST_CASE("reverse-QWK hand examples") {
    VecT<double> q(1), g(1);
    q << 2;
    g << 3;
    MatT<double> W(1, 1);
    W << 4;
    const auto qt = reverse_qwk_transform<double>(q, g, W);
    CHECK(qt[0] == 24.0);
    MatT<double> kbar(1, 1);
    kbar << 0.5;
    CHECK((kbar * qt)(0, 0) == 12.0);
    const auto keys = standard_keys<double>(kbar, g, {W});
    CHECK(keys[0](0, 0) == 6.0);
    CHECK((keys[0] * q)(0, 0) == 12.0);

    const int dh = 4;
    VecT<double> qi = random_mat(dh, 1, 3);
    VecT<double> ones = VecT<double>::Ones(dh);
    MatT<double> I = MatT<double>::Identity(dh, dh);
    CHECK((reverse_qwk_transform<double>(qi, ones, I) - qi).cwiseAbs().maxCoeff() == 0.0);
    MatT<double> kb = random_mat(3, dh, 4);
    CHECK((standard_keys<double>(kb, ones, {I})[0] - kb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reverse-QWK logits match standard keys over random draws") {
    std::mt19937_64 rng(11);
    for (int draw = 0; draw < 100; ++draw) {
        const int n_kv = 1 + static_cast<int>(rng() % 3), n_rep = 1 << (rng() % 3);
        const int dh = 2 + static_cast<int>(rng() % 7), d = dh * (1 + static_cast<int>(rng() % 4));
        MatT<double> q = random_mat(n_kv * n_rep, dh, rng());
        VecT<double> g = random_mat(dh, 1, rng());
        std::vector<MatT<double>> W;
        for (int k = 0; k < n_kv; ++k) W.push_back(random_mat(d, dh, rng()));
        MatT<double> kbar = random_mat(5, d, rng());
        const auto a = rqwk_logits<double>(q, g, W, kbar), b = standard_logits<double>(q, g, W, kbar);
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * b.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("cross-attention sub-block") {
    const ModelWeights w = init_random(toy_config(), 2);
    const Mat hidden = random_mat(3, w.cfg.d, 5);
    const std::vector<int> pos{0, 1, 2};
    const Mat empty(0, w.cfg.d);
    CHECK((cross_attention_rqwk(w, 0, hidden, empty, pos) - hidden).cwiseAbs().maxCoeff() == 0.0);

    const Mat ctx = rms_norm_rows(random_mat(6, w.cfg.d, 6), w.cfg.rmsnorm_eps);
    for (int l = 0; l < w.cfg.L_dec; ++l) {
        const Mat a = cross_attention_rqwk(w, l, hidden, ctx, pos);
        const Mat b = cross_attention_standard(w, l, hidden, ctx, pos);
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * b.cwiseAbs().maxCoeff());
    }

    // One context token: softmax weight is 1 whatever the logit, so the output is
    // hidden + W_O·v for that token in every head.
    ModelWeights big = w;
    for (auto& blk : big.dec[0].cross.wk) blk *= 1e3;
    const Mat one = ctx.topRows(1);
    const Mat a = cross_attention_rqwk(w, 0, hidden, one, pos);
    const Mat b = cross_attention_rqwk(big, 0, hidden, one, pos);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("decoder expose mode") {
    const ModelWeights w = init_random(toy_config(), 3);
    const Mat input = embed_tokens(w, {4, 5, 6, 7, 8});
    const Mat ctx = rms_norm_rows(random_mat(7, w.cfg.d, 8), w.cfg.rmsnorm_eps);

    DecoderOptions plain;
    plain.hidden_checksum = true;
    const DecoderResult r1 = decoder_forward(w, input, ctx, plain);

    DecoderOptions ex = plain;
    ex.expose = {3, 4};
    const DecoderResult r2 = decoder_forward(w, input, ctx, ex);
    CHECK(r2.exposed.L_dec == w.cfg.L_dec);
    CHECK(r2.exposed.n_h == w.cfg.n_h);
    CHECK(r2.exposed.P == 2);
    CHECK(r2.exposed.d == w.cfg.d);
    CHECK(r2.exposed.rows.rows() == w.cfg.L_dec * w.cfg.n_h * 2);
    CHECK(r1.hidden_checksum == r2.hidden_checksum);
    CHECK((r1.logits - r2.logits).cwiseAbs().maxCoeff() == 0.0);

    const DecoderResult r3 = decoder_forward(w, input, ctx, plain);
    CHECK((r1.logits - r3.logits).cwiseAbs().maxCoeff() == 0.0);

    DecoderOptions last;
    last.last_logits_only = true;
    const DecoderResult r4 = decoder_forward(w, input, ctx, last);
    CHECK((r4.logits.row(r4.logits.rows() - 1) - r1.logits.row(4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("greedy decode") {
    ModelWeights w = init_random(toy_config(), 4);
    const Mat ctx = rms_norm_rows(random_mat(4, w.cfg.d, 9), w.cfg.rmsnorm_eps);
    const auto a = greedy_decode(w, {5, 6, 7}, ctx, 6);
    const auto b = greedy_decode(w, {5, 6, 7}, ctx, 6);
    CHECK(a == b);
    CHECK(a.size() <= 6);
    CHECK(greedy_decode(w, {5, 6, 7}, ctx, 2).size() <= 2);

    // Read the final hidden state through an identity head, then point the EOS row at it.
    w.out_head.setZero();
    w.out_head.topRows(w.cfg.d).setIdentity();
    DecoderOptions last;
    last.last_logits_only = true;
    const Mat lg = decoder_forward(w, embed_tokens(w, {5, 6, 7}), ctx, last).logits;
    const Eigen::RowVectorXd h = lg.row(lg.rows() - 1).head(w.cfg.d);
    w.out_head.setZero();
    w.out_head.row(2) = h;
    CHECK(greedy_decode(w, {5, 6, 7}, ctx, 5).empty());
}

TEST_CASE("weights file round trip and errors") {
    const std::string dir = testing_util::scratch_dir("weights");
    const ModelWeights w = init_random(toy_config(), 5);
    save_weights(w, dir + "/w.bin");
    const ModelWeights r = load_weights(dir + "/w.bin");
    CHECK(r.cfg == w.cfg);
    CHECK(weights_checksum(r) == weights_checksum(w));

    auto bytes = read_file(dir + "/w.bin");
    bytes[0] = 'X';
    write_file_atomic(dir + "/bad.bin", bytes.data(), bytes.size());
    try {
        load_weights(dir + "/bad.bin");
        FAIL("expected bad magic");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::bad_magic);
    }
    auto cut = read_file(dir + "/w.bin");
    cut.resize(cut.size() / 2);
    write_file_atomic(dir + "/cut.bin", cut.data(), cut.size());
    try {
        load_weights(dir + "/cut.bin");
        FAIL("expected truncation");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::truncated);
    }
}

TEST_CASE("config validation") {
    ModelConfig c = toy_config();
    c.n_kv = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK_THROWS_AS(preset_config("huge"), Error);
    CHECK(synthetic_config().d == 128);
}
