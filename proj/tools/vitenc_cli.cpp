// Command-line front end for the encryption + adaptation pipeline.
// Exit codes: 0 success, 1 verification failure, 2 usage or input error.

#include <cstdio>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vitenc/blockcodec.hpp"
#include "vitenc/embedadapt.hpp"
#include "vitenc/image.hpp"
#include "vitenc/keyperm.hpp"
#include "vitenc/modelstore.hpp"
#include "vitenc/tinyvit.hpp"

namespace {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open file: " + path);
    }
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"block-wise image encryption with matching ViT weight adaptation"};
    app.require_subcommand(1);

    auto* keygen = app.add_subcommand("keygen", "derive a block/pixel key pair from a seed");
    std::string seed_hex, keygen_out;
    keygen->add_option("--seed", seed_hex, "seed bytes, hex encoded")->required();
    keygen->add_option("--out", keygen_out, "output key file (JSON)")->required();

    std::string keys_path, in_path, out_path;
    long long block_size = 0;
    auto* encrypt = app.add_subcommand("encrypt", "encrypt a PPM/PGM image");
    auto* decrypt = app.add_subcommand("decrypt", "decrypt a PPM/PGM image");
    for (CLI::App* cmd : {encrypt, decrypt}) {
        cmd->add_option("--keys", keys_path, "key file from keygen")->required();
        cmd->add_option("--block-size", block_size, "block side length in pixels")->required();
        cmd->add_option("--in", in_path, "input image")->required();
        cmd->add_option("--out", out_path, "output image")->required();
    }

    auto* adapt = app.add_subcommand("adapt", "rewrite model embeddings for encrypted inputs");
    std::string model_path, adapt_out;
    adapt->add_option("--keys", keys_path, "key file from keygen")->required();
    adapt->add_option("--model", model_path, "input model archive")->required();
    adapt->add_option("--out", adapt_out, "output model archive")->required();

    auto* forward = app.add_subcommand("forward", "run the classifier and save logits");
    std::string image_path, logits_out;
    forward->add_option("--model", model_path, "model archive")->required();
    forward->add_option("--image", image_path, "input image")->required();
    forward->add_option("--out", logits_out, "output logits (JSON array)")->required();

    auto* verify = app.add_subcommand(
        "verify", "check that the adapted model on the encrypted image matches "
                  "the plain model on the plain image");
    std::string precision, adapt_keys_path;
    verify->add_option("--keys", keys_path, "key file from keygen")->required();
    verify->add_option("--model", model_path, "model archive")->required();
    verify->add_option("--image", image_path, "input image")->required();
    verify->add_option("--precision", precision, "compute precision (default: model's)")
        ->check(CLI::IsMember({"f32", "f64"}));
    verify->add_option("--adapt-keys", adapt_keys_path,
                       "adapt the model with these keys instead of --keys "
                       "(a mismatch makes verification fail)");

    auto* init_model = app.add_subcommand("init-model", "create a randomly initialized model");
    std::string config_path, model_out;
    std::uint64_t seed = 0;
    init_model->add_option("--config", config_path, "model config (JSON)")->required();
    init_model->add_option("--seed", seed, "64-bit initialization seed")->required();
    init_model->add_option("--out", model_out, "output model archive")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*keygen) {
            vitenc::write_key_file(keygen_out,
                                   vitenc::derive_key_pair(vitenc::from_hex(seed_hex)));
        } else if (*encrypt || *decrypt) {
            vitenc::KeyPair keys = vitenc::read_key_file(keys_path);
            vitenc::ImageTensor img = vitenc::read_image(in_path);
            vitenc::ImageTensor out =
                *encrypt ? vitenc::encrypt_image(img, keys.block_key, keys.pixel_key,
                                                 block_size)
                         : vitenc::decrypt_image(img, keys.block_key, keys.pixel_key,
                                                 block_size);
            vitenc::write_image(out_path, out);
        } else if (*adapt) {
            vitenc::KeyPair keys = vitenc::read_key_file(keys_path);
            vitenc::ModelArchive model = vitenc::load_model(model_path);
            vitenc::save_model(adapt_out,
                               vitenc::adapt_model(model, keys.block_key, keys.pixel_key));
        } else if (*forward) {
            vitenc::ModelArchive model = vitenc::load_model(model_path);
            vitenc::ImageTensor img = vitenc::read_image(image_path);
            Eigen::RowVectorXd logits = vitenc::classify(img, model);
            nlohmann::json arr = nlohmann::json::array();
            for (Eigen::Index i = 0; i < logits.size(); ++i) {
                arr.push_back(logits(i));
            }
            std::ofstream out(logits_out);
            if (!out) {
                throw std::invalid_argument("cannot write logits file: " + logits_out);
            }
            out << arr.dump() << "\n";
        } else if (*verify) {
            vitenc::KeyPair keys = vitenc::read_key_file(keys_path);
            vitenc::ModelArchive model = vitenc::load_model(model_path);
            vitenc::ImageTensor img = vitenc::read_image(image_path);
            vitenc::VerifyOptions opts;
            if (!precision.empty()) {
                opts.precision = vitenc::dtype_from_name(precision);
            }
            if (!adapt_keys_path.empty()) {
                opts.adapt_keys = vitenc::read_key_file(adapt_keys_path);
            }
            vitenc::EquivalenceReport report = vitenc::verify_equivalence(
                img, model, keys.block_key, keys.pixel_key, opts);
            std::printf("max_abs_diff=%.9e\n", report.max_abs_diff);
            std::printf("max_rel_diff=%.9e\n", report.max_rel_diff);
            std::printf("sequence_exact=%s\n", report.sequence_exact ? "true" : "false");
            std::printf("%s\n", report.pass ? "PASS" : "FAIL");
            return report.pass ? 0 : 1;
        } else if (*init_model) {
            vitenc::ViTConfig cfg =
                vitenc::config_from_json_text(read_text_file(config_path));
            vitenc::save_model(model_out, vitenc::init_random(cfg, seed));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
