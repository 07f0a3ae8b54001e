#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"
#include "vitenc/blockcodec.hpp"
#include "vitenc/errors.hpp"
#include "vitenc/tinyvit.hpp"

using vitenc::ArchiveError;
using vitenc::BlockGrid;
using vitenc::DType;
using vitenc::ImageTensor;
using vitenc::InvalidGeometry;
using vitenc::ModelArchive;
using vitenc::Permutation;
using vitenc::RowMatrix;
using vitenc::ViTConfig;
using vitenc::ViTWeights;

namespace {

Permutation random_perm(std::mt19937_64& rng, Eigen::Index n) {
    Permutation p = Permutation::identity(n);
    std::shuffle(p.map.begin(), p.map.end(), rng);
    return p;
}

template <class Scalar>
RowMatrix<Scalar> random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    RowMatrix<Scalar> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<Scalar>(dist(rng));
    }
    return m;
}

}  // namespace

TEST_CASE("sorted accumulation is invariant to term order") {
    std::vector<double> terms = {1e8, 1.0, -1e8, 3.25, -7.5, 0.125, 2e-9, -0.25};
    std::vector<double> forward = terms;
    std::vector<double> backward(terms.rbegin(), terms.rend());
    std::mt19937_64 rng(3);
    std::vector<double> shuffled = terms;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);

    double a = vitenc::exchange_invariant_sum(forward);
    double b = vitenc::exchange_invariant_sum(backward);
    double c = vitenc::exchange_invariant_sum(shuffled);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(a == doctest::Approx(1.0 + 3.25 - 7.5 + 0.125 + 2e-9 - 0.25).epsilon(1e-7));
}

TEST_CASE("zero embeddings produce an all-zero sequence") {
    std::mt19937_64 rng(5);
    ViTConfig cfg = testsupport::tiny_config(DType::f64);
    ViTWeights<double> w;
    w.config = cfg;
    w.cls_token = Eigen::RowVectorXd::Zero(cfg.dim);
    w.pos_embed = RowMatrix<double>::Zero(cfg.seq_len(), cfg.dim);
    w.patch_embed = RowMatrix<double>::Zero(cfg.patch_len(), cfg.dim);
    BlockGrid grid = vitenc::image_blocks(testsupport::random_image(rng, 16, 16, 3), cfg);
    RowMatrix<double> z = vitenc::embed_sequence(w, grid);
    CHECK(z.rows() == 17);
    CHECK(z.cols() == 32);
    CHECK((z.array() == 0.0).all());
}

TEST_CASE("identity patch embedding passes normalized samples through") {
    std::mt19937_64 rng(7);
    ViTConfig cfg;
    cfg.patch_size = 4;
    cfg.height = 16;
    cfg.width = 16;
    cfg.channels = 1;
    cfg.dim = 16;
    cfg.depth = 0;
    cfg.heads = 1;
    cfg.num_classes = 2;
    cfg.precision = DType::f64;
    ViTWeights<double> w;
    w.config = cfg;
    w.cls_token = Eigen::RowVectorXd::Zero(16);
    w.pos_embed = RowMatrix<double>::Zero(17, 16);
    w.patch_embed = RowMatrix<double>::Identity(16, 16);

    BlockGrid grid = vitenc::image_blocks(testsupport::random_image(rng, 16, 16, 1), cfg);
    RowMatrix<double> z = vitenc::embed_sequence(w, grid);
    RowMatrix<double> xn = vitenc::normalized_samples<double>(grid);
    CHECK((z.row(0).array() == 0.0).all());
    CHECK(z.bottomRows(16) == xn);
}

TEST_CASE("embedding a full-size image yields the expected sequence shape") {
    ViTConfig cfg;
    cfg.patch_size = 16;
    cfg.height = 224;
    cfg.width = 224;
    cfg.channels = 3;
    cfg.dim = 768;
    cfg.depth = 0;
    cfg.heads = 12;
    cfg.num_classes = 10;
    cfg.precision = DType::f32;
    ModelArchive m = vitenc::init_random(cfg, 13);
    RowMatrix<double> z = vitenc::embed(testsupport::formula_image(224, 224, 3), m);
    CHECK(z.rows() == 197);
    CHECK(z.cols() == 768);
    CHECK(z.allFinite());
}

TEST_CASE("a depth-zero encoder is just the final layer norm") {
    std::mt19937_64 rng(11);
    ViTConfig cfg = testsupport::tiny_config(DType::f64);
    cfg.depth = 0;
    ViTWeights<double> w;
    w.config = cfg;
    w.final_gamma = random_matrix<double>(rng, 1, cfg.dim).row(0);
    w.final_beta = random_matrix<double>(rng, 1, cfg.dim).row(0);
    RowMatrix<double> z = random_matrix<double>(rng, 17, cfg.dim);
    CHECK(vitenc::encoder_forward(w, z) ==
          vitenc::layer_norm_rows(z, w.final_gamma, w.final_beta));
}

TEST_CASE("softmax rows are simplex points") {
    RowMatrix<double> one(1, 1);
    one << 42.0;
    vitenc::softmax_rows_inplace(one);
    CHECK(one(0, 0) == 1.0);

    RowMatrix<double> flat(1, 5);
    flat.setConstant(3.0);
    vitenc::softmax_rows_inplace(flat);
    for (Eigen::Index c = 0; c < 5; ++c) {
        CHECK(flat(0, c) == doctest::Approx(0.2).epsilon(1e-12));
    }

    std::mt19937_64 rng(13);
    RowMatrix<double> x = random_matrix<double>(rng, 6, 9, 4.0);
    vitenc::softmax_rows_inplace(x);
    CHECK((x.array() >= 0.0).all());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        CHECK(x.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("layer norm standardizes each row before the affine step") {
    std::mt19937_64 rng(17);
    Eigen::RowVectorXd gamma = Eigen::RowVectorXd::Ones(64);
    Eigen::RowVectorXd beta = Eigen::RowVectorXd::Zero(64);
    RowMatrix<double> x = random_matrix<double>(rng, 8, 64, 3.0);
    x.array() += 1.5;
    RowMatrix<double> out = vitenc::layer_norm_rows(x, gamma, beta);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        double mean = out.row(r).mean();
        double var = (out.row(r).array() - mean).square().mean();
        CHECK(std::abs(mean) <= 1e-9);
        CHECK(std::abs(var - 1.0) <= 1e-4);
    }
}

TEST_CASE("gelu tracks its asymptotes and is increasing on the positive axis") {
    CHECK(vitenc::gelu_tanh(0.0) == 0.0);
    CHECK(std::abs(vitenc::gelu_tanh(5.0) - 5.0) <= 1e-3);
    CHECK(std::abs(vitenc::gelu_tanh(-5.0)) <= 1e-3);
    double prev = vitenc::gelu_tanh(0.0);
    for (double v = 0.25; v <= 4.0; v += 0.25) {
        double cur = vitenc::gelu_tanh(v);
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("generated logits match the committed golden values") {
    nlohmann::json golden =
        testsupport::load_json(testsupport::fixture_path("model_golden.json"));
    const nlohmann::json& entry = golden.at("logits");
    ViTConfig cfg = vitenc::config_from_json_text(entry.at("config").dump());
    ModelArchive m = vitenc::init_random(cfg, entry.at("seed").get<std::uint64_t>());
    Eigen::RowVectorXd logits =
        vitenc::classify(testsupport::formula_image(16, 16, 3), m);
    const nlohmann::json& values = entry.at("values");
    REQUIRE(logits.size() == static_cast<Eigen::Index>(values.size()));
    Eigen::RowVectorXd want(logits.size());
    for (Eigen::Index i = 0; i < want.size(); ++i) {
        want(i) = values[static_cast<std::size_t>(i)].get<double>();
    }
    CHECK(vitenc::diff_stats(logits, want).max_rel_diff <= 1e-9);
}

TEST_CASE("a zero head maps every sequence to zero logits") {
    std::mt19937_64 rng(19);
    ModelArchive m = vitenc::init_random(testsupport::tiny_config(DType::f64), 23);
    std::fill(m.find("head.w")->bytes.begin(), m.find("head.w")->bytes.end(), 0);
    Eigen::RowVectorXd logits =
        vitenc::classify(testsupport::random_image(rng, 16, 16, 3), m);
    CHECK((logits.array() == 0.0).all());
}

TEST_CASE("random models produce finite logits of the configured width") {
    std::mt19937_64 rng(29);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        for (DType precision : {DType::f32, DType::f64}) {
            ModelArchive m = vitenc::init_random(testsupport::tiny_config(precision), seed);
            Eigen::RowVectorXd logits =
                vitenc::classify(testsupport::random_image(rng, 16, 16, 3), m);
            CHECK(logits.size() == 10);
            CHECK(logits.allFinite());
        }
    }
}

TEST_CASE("the encoder commutes with token permutations") {
    std::mt19937_64 rng(31);
    ModelArchive m = vitenc::init_random(testsupport::tiny_config(DType::f32), 37);
    ViTWeights<float> w = vitenc::load_weights<float>(m);
    RowMatrix<float> z = random_matrix<float>(rng, 17, 32);
    for (int trial = 0; trial < 5; ++trial) {
        Permutation q = random_perm(rng, 17);
        RowMatrix<float> permuted_then_encoded =
            vitenc::encoder_forward(w, RowMatrix<float>(vitenc::permute_rows(z, q)));
        RowMatrix<float> encoded_then_permuted =
            vitenc::permute_rows(vitenc::encoder_forward(w, z), q);
        CHECK(vitenc::diff_stats(permuted_then_encoded, encoded_then_permuted).max_rel_diff <=
              1e-4);
    }
}

TEST_CASE("encrypted embedding is a bit-exact row permutation of the plain one") {
    std::mt19937_64 rng(41);
    for (DType precision : {DType::f32, DType::f64}) {
        ModelArchive m = vitenc::init_random(testsupport::tiny_config(precision), 43);
        vitenc::PermKey k1 = testsupport::random_key(rng, vitenc::KeyRole::block);
        vitenc::PermKey k2 = testsupport::random_key(rng, vitenc::KeyRole::pixel);
        ImageTensor img = testsupport::random_image(rng, 16, 16, 3);

        ImageTensor encrypted = vitenc::encrypt_image(img, k1, k2, 4);
        ModelArchive adapted = vitenc::adapt_model(m, k1, k2);
        RowMatrix<double> z_plain = vitenc::embed(img, m);
        RowMatrix<double> z_enc = vitenc::embed(encrypted, adapted);
        Permutation ext =
            vitenc::extend_for_class_token(vitenc::derive_permutation(k1, 16));
        CHECK(z_enc == vitenc::permute_rows(z_plain, ext));
    }
}

TEST_CASE("verification passes with matching keys at both precisions") {
    std::mt19937_64 rng(47);
    ModelArchive m = vitenc::init_random(testsupport::tiny_config(DType::f64), 53);
    vitenc::PermKey k1 = testsupport::random_key(rng, vitenc::KeyRole::block);
    vitenc::PermKey k2 = testsupport::random_key(rng, vitenc::KeyRole::pixel);
    ImageTensor img = testsupport::random_image(rng, 16, 16, 3);

    vitenc::EquivalenceReport native = vitenc::verify_equivalence(img, m, k1, k2);
    CHECK(native.precision == DType::f64);
    CHECK(native.tolerance == vitenc::kVerifyTolF64);
    CHECK(native.sequence_exact);
    CHECK(native.max_rel_diff <= native.tolerance);
    CHECK(native.pass);

    vitenc::VerifyOptions opts;
    opts.precision = DType::f32;
    vitenc::EquivalenceReport single = vitenc::verify_equivalence(img, m, k1, k2, opts);
    CHECK(single.precision == DType::f32);
    CHECK(single.tolerance == vitenc::kVerifyTolF32);
    CHECK(single.sequence_exact);
    CHECK(single.pass);
}

TEST_CASE("verification fails when the adaptation keys do not match") {
    std::mt19937_64 rng(59);
    ModelArchive m = vitenc::init_random(testsupport::tiny_config(DType::f64), 61);
    vitenc::PermKey k1 = testsupport::random_key(rng, vitenc::KeyRole::block);
    vitenc::PermKey k2 = testsupport::random_key(rng, vitenc::KeyRole::pixel);
    vitenc::VerifyOptions opts;
    opts.adapt_keys = vitenc::KeyPair{testsupport::random_key(rng, vitenc::KeyRole::block),
                                      testsupport::random_key(rng, vitenc::KeyRole::pixel)};
    vitenc::EquivalenceReport report = vitenc::verify_equivalence(
        testsupport::random_image(rng, 16, 16, 3), m, k1, k2, opts);
    CHECK_FALSE(report.sequence_exact);
    CHECK_FALSE(report.pass);
}

TEST_CASE("extra tensors do not disturb the forward pass") {
    std::mt19937_64 rng(67);
    ModelArchive m = vitenc::init_random(testsupport::tiny_config(DType::f64), 71);
    ImageTensor img = testsupport::random_image(rng, 16, 16, 3);
    Eigen::RowVectorXd before = vitenc::classify(img, m);
    vitenc::TensorData extra;
    extra.spec = {"optimizer.step", DType::f32, {4}};
    extra.bytes.assign(16, std::uint8_t{0x3c});
    m.tensors.insert(m.tensors.begin(), extra);
    CHECK(vitenc::classify(img, m) == before);
}

TEST_CASE("a missing tensor is reported by name") {
    std::mt19937_64 rng(73);
    ModelArchive m = vitenc::init_random(testsupport::tiny_config(DType::f64), 79);
    std::erase_if(m.tensors,
                  [](const vitenc::TensorData& t) { return t.spec.name == "blk0.attn.wq"; });
    CHECK_THROWS_WITH_AS(vitenc::classify(testsupport::random_image(rng, 16, 16, 3), m),
                         "missing tensor blk0.attn.wq", ArchiveError);
}

TEST_CASE("image and model geometry must agree") {
    std::mt19937_64 rng(83);
    ModelArchive m = vitenc::init_random(testsupport::tiny_config(DType::f32), 89);
    CHECK_THROWS_WITH_AS(vitenc::classify(testsupport::random_image(rng, 8, 8, 3), m),
                         "image is 8x8x3, model expects 16x16x3", InvalidGeometry);
    CHECK_THROWS_AS(vitenc::classify(testsupport::random_image(rng, 16, 16, 1), m),
                    InvalidGeometry);
}
