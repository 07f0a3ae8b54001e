#include "vitenc/modelstore.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "vitenc/keystream.hpp"

// Payloads are defined little-endian and written straight from memory.
static_assert(std::endian::native == std::endian::little,
              "archive IO assumes a little-endian host");

namespace vitenc {

std::size_t dtype_size(DType dtype) {
    return dtype == DType::f32 ? 4 : 8;
}

std::string dtype_name(DType dtype) {
    return dtype == DType::f32 ? "f32" : "f64";
}

DType dtype_from_name(const std::string& name) {
    if (name == "f32") return DType::f32;
    if (name == "f64") return DType::f64;
    throw ArchiveError("unknown dtype \"" + name + "\" (expected f32 or f64)");
}

void validate(const ViTConfig& cfg) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
    if (cfg.patch_size < 1) fail("patch_size must be >= 1");
    if (cfg.height < 1 || cfg.width < 1) fail("height and width must be >= 1");
    if (cfg.height % cfg.patch_size != 0 || cfg.width % cfg.patch_size != 0) {
        fail("patch_size " + std::to_string(cfg.patch_size) +
             " does not divide image dimensions " + std::to_string(cfg.height) + "x" +
             std::to_string(cfg.width));
    }
    if (cfg.channels != 1 && cfg.channels != 3) fail("channels must be 1 or 3");
    if (cfg.dim < 1) fail("dim must be >= 1");
    if (cfg.depth < 0) fail("depth must be >= 0");
    if (cfg.heads < 1) fail("heads must be >= 1");
    if (cfg.dim % cfg.heads != 0) fail("dim must be divisible by heads");
    if (!(cfg.mlp_ratio > 0.0)) fail("mlp_ratio must be positive");
    if (cfg.hidden_dim() < 1) fail("mlp hidden width must be >= 1");
    if (cfg.num_classes < 1) fail("num_classes must be >= 1");
}

Eigen::Index TensorSpec::count() const {
    Eigen::Index n = 1;
    for (Eigen::Index d : shape) {
        n *= d;
    }
    return n;
}

const TensorData* ModelArchive::find(std::string_view name) const {
    for (const TensorData& t : tensors) {
        if (t.spec.name == name) return &t;
    }
    return nullptr;
}

TensorData* ModelArchive::find(std::string_view name) {
    for (TensorData& t : tensors) {
        if (t.spec.name == name) return &t;
    }
    return nullptr;
}

const TensorData& ModelArchive::at(std::string_view name) const {
    const TensorData* t = find(name);
    if (!t) {
        throw ArchiveError("missing tensor " + std::string(name));
    }
    return *t;
}

std::vector<TensorSpec> required_tensors(const ViTConfig& cfg) {
    validate(cfg);
    const Eigen::Index d = cfg.dim;
    const Eigen::Index hidden = cfg.hidden_dim();
    std::vector<TensorSpec> specs;
    auto add = [&](std::string name, std::vector<Eigen::Index> shape) {
        specs.push_back({std::move(name), cfg.precision, std::move(shape)});
    };
    add("cls_token", {d});
    add("pos_embed", {cfg.seq_len(), d});
    add("patch_embed", {cfg.patch_len(), d});
    for (Eigen::Index i = 0; i < cfg.depth; ++i) {
        std::string p = "blk" + std::to_string(i) + ".";
        add(p + "ln1.gamma", {d});
        add(p + "ln1.beta", {d});
        add(p + "attn.wq", {d, d});
        add(p + "attn.bq", {d});
        add(p + "attn.wk", {d, d});
        add(p + "attn.bk", {d});
        add(p + "attn.wv", {d, d});
        add(p + "attn.bv", {d});
        add(p + "attn.wo", {d, d});
        add(p + "attn.bo", {d});
        add(p + "ln2.gamma", {d});
        add(p + "ln2.beta", {d});
        add(p + "mlp.w1", {d, hidden});
        add(p + "mlp.b1", {hidden});
        add(p + "mlp.w2", {hidden, d});
        add(p + "mlp.b2", {d});
    }
    add("final_ln.gamma", {d});
    add("final_ln.beta", {d});
    add("head.w", {d, cfg.num_classes});
    add("head.b", {cfg.num_classes});
    return specs;
}

void validate(const ModelArchive& archive) {
    validate(archive.config);
    for (const TensorData& t : archive.tensors) {
        if (t.bytes.size() != t.spec.nbytes()) {
            throw ArchiveError("tensor " + t.spec.name + ": payload has " +
                               std::to_string(t.bytes.size()) + " bytes, expected " +
                               std::to_string(t.spec.nbytes()));
        }
    }
    for (const TensorSpec& want : required_tensors(archive.config)) {
        const TensorData* t = archive.find(want.name);
        if (!t) {
            throw ArchiveError("missing tensor " + want.name);
        }
        if (t->spec.dtype != want.dtype) {
            throw ArchiveError("tensor " + want.name + ": dtype " +
                               dtype_name(t->spec.dtype) + ", config expects " +
                               dtype_name(want.dtype));
        }
        if (t->spec.shape != want.shape) {
            auto fmt = [](const std::vector<Eigen::Index>& shape) {
                std::string s = "[";
                for (std::size_t i = 0; i < shape.size(); ++i) {
                    s += (i ? "," : "") + std::to_string(shape[i]);
                }
                return s + "]";
            };
            throw ArchiveError("tensor " + want.name + ": shape " + fmt(t->spec.shape) +
                               ", config expects " + fmt(want.shape));
        }
    }
}

namespace {

constexpr char kFormatName[] = "vitenc.archive";
constexpr int kFormatVersion = 1;

nlohmann::json config_to_json(const ViTConfig& cfg) {
    return {{"patch_size", cfg.patch_size}, {"height", cfg.height},
            {"width", cfg.width},           {"channels", cfg.channels},
            {"dim", cfg.dim},               {"depth", cfg.depth},
            {"heads", cfg.heads},           {"mlp_ratio", cfg.mlp_ratio},
            {"num_classes", cfg.num_classes}, {"precision", dtype_name(cfg.precision)}};
}

ViTConfig config_from_json(const nlohmann::json& j) {
    ViTConfig cfg;
    try {
        cfg.patch_size = j.at("patch_size").get<Eigen::Index>();
        cfg.height = j.at("height").get<Eigen::Index>();
        cfg.width = j.at("width").get<Eigen::Index>();
        cfg.channels = j.at("channels").get<Eigen::Index>();
        cfg.dim = j.at("dim").get<Eigen::Index>();
        cfg.depth = j.at("depth").get<Eigen::Index>();
        cfg.heads = j.at("heads").get<Eigen::Index>();
        cfg.mlp_ratio = j.at("mlp_ratio").get<double>();
        cfg.num_classes = j.at("num_classes").get<Eigen::Index>();
        cfg.precision = dtype_from_name(j.at("precision").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ArchiveError(std::string("bad config: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

std::size_t padded_payload_base(std::size_t manifest_len) {
    std::size_t unpadded = 8 + manifest_len;
    return (unpadded + 63) / 64 * 64;
}

}  // namespace

ViTConfig config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ArchiveError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

std::string config_to_json_text(const ViTConfig& cfg) {
    return config_to_json(cfg).dump(2);
}

std::vector<std::uint8_t> save_model(const ModelArchive& archive) {
    validate(archive);
    nlohmann::json manifest;
    manifest["format"] = kFormatName;
    manifest["version"] = kFormatVersion;
    manifest["index_base"] = 0;
    manifest["config"] = config_to_json(archive.config);
    nlohmann::json table = nlohmann::json::array();
    std::size_t offset = 0;
    for (const TensorData& t : archive.tensors) {
        table.push_back({{"name", t.spec.name},
                         {"dtype", dtype_name(t.spec.dtype)},
                         {"shape", t.spec.shape},
                         {"offset", offset},
                         {"nbytes", t.bytes.size()}});
        offset += t.bytes.size();
    }
    manifest["tensors"] = std::move(table);
    std::string text = manifest.dump();

    std::size_t base = padded_payload_base(text.size());
    std::vector<std::uint8_t> out(base + offset, 0);
    std::uint64_t len = text.size();
    for (int i = 0; i < 8; ++i) {
        out[static_cast<std::size_t>(i)] = std::uint8_t(len >> (8 * i));
    }
    std::memcpy(out.data() + 8, text.data(), text.size());
    std::size_t cursor = base;
    for (const TensorData& t : archive.tensors) {
        std::memcpy(out.data() + cursor, t.bytes.data(), t.bytes.size());
        cursor += t.bytes.size();
    }
    return out;
}

void save_model(const std::string& path, const ModelArchive& archive) {
    std::vector<std::uint8_t> bytes = save_model(archive);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ArchiveError("cannot write model file: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

ModelArchive load_model(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8) {
        throw ArchiveError("archive shorter than its 8-byte length header");
    }
    std::uint64_t len = 0;
    for (int i = 7; i >= 0; --i) {
        len = (len << 8) | bytes[static_cast<std::size_t>(i)];
    }
    if (len > bytes.size() - 8) {
        throw ArchiveError("manifest length " + std::to_string(len) +
                           " exceeds archive size " + std::to_string(bytes.size()));
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin() + 8,
                                         bytes.begin() + 8 + static_cast<std::ptrdiff_t>(len));
    } catch (const nlohmann::json::exception& e) {
        throw ArchiveError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!manifest.contains("format") || manifest["format"] != kFormatName) {
        throw ArchiveError("not a model archive (bad format field)");
    }
    if (!manifest.contains("version") || manifest["version"] != kFormatVersion) {
        throw ArchiveError("unsupported archive version");
    }
    if (!manifest.contains("index_base") || manifest["index_base"] != 0) {
        throw ArchiveError("archive must declare index_base 0");
    }
    ModelArchive archive;
    archive.config = config_from_json(manifest.at("config"));
    std::size_t base = padded_payload_base(len);
    for (const nlohmann::json& entry : manifest.at("tensors")) {
        TensorData t;
        std::size_t offset, nbytes;
        try {
            t.spec.name = entry.at("name").get<std::string>();
            t.spec.dtype = dtype_from_name(entry.at("dtype").get<std::string>());
            t.spec.shape = entry.at("shape").get<std::vector<Eigen::Index>>();
            offset = entry.at("offset").get<std::size_t>();
            nbytes = entry.at("nbytes").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ArchiveError(std::string("bad tensor table entry: ") + e.what());
        }
        if (nbytes != t.spec.nbytes()) {
            throw ArchiveError("tensor " + t.spec.name + ": nbytes " +
                               std::to_string(nbytes) + " does not match shape (" +
                               std::to_string(t.spec.nbytes()) + " expected)");
        }
        if (base + offset + nbytes > bytes.size() || base + offset < base) {
            throw ArchiveError("tensor " + t.spec.name + ": payload truncated");
        }
        t.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(base + offset),
                       bytes.begin() + static_cast<std::ptrdiff_t>(base + offset + nbytes));
        archive.tensors.push_back(std::move(t));
    }
    validate(archive);
    return archive;
}

ModelArchive load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArchiveError("cannot open model file: " + path);
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return load_model(bytes);
}

namespace {

enum class InitKind { normal, one, zero };

InitKind init_kind(const std::string& name) {
    auto ends_with = [&name](std::string_view suffix) {
        return name.size() >= suffix.size() &&
               name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (name == "cls_token" || name == "pos_embed" || name == "patch_embed" ||
        name == "head.w" || ends_with(".wq") || ends_with(".wk") || ends_with(".wv") ||
        ends_with(".wo") || ends_with(".w1") || ends_with(".w2")) {
        return InitKind::normal;
    }
    if (ends_with(".gamma")) {
        return InitKind::one;
    }
    return InitKind::zero;
}

}  // namespace

ModelArchive init_random(const ViTConfig& cfg, std::uint64_t seed) {
    std::array<std::uint8_t, 8> seed_bytes;
    for (int i = 0; i < 8; ++i) {
        seed_bytes[static_cast<std::size_t>(i)] = std::uint8_t(seed >> (8 * i));
    }
    WordStream stream(sha256(seed_bytes.data(), seed_bytes.size()));

    ModelArchive archive;
    archive.config = cfg;
    for (TensorSpec& spec : required_tensors(cfg)) {
        TensorData t;
        t.spec = std::move(spec);
        t.bytes.reserve(t.spec.nbytes());
        auto push = [&t](double v) {
            if (t.spec.dtype == DType::f32) {
                float f = static_cast<float>(v);
                std::uint8_t raw[4];
                std::memcpy(raw, &f, 4);
                t.bytes.insert(t.bytes.end(), raw, raw + 4);
            } else {
                std::uint8_t raw[8];
                std::memcpy(raw, &v, 8);
                t.bytes.insert(t.bytes.end(), raw, raw + 8);
            }
        };
        InitKind kind = init_kind(t.spec.name);
        for (Eigen::Index i = 0, n = t.spec.count(); i < n; ++i) {
            switch (kind) {
                case InitKind::normal: push(0.02 * stream.normal()); break;
                case InitKind::one: push(1.0); break;
                case InitKind::zero: push(0.0); break;
            }
        }
        archive.tensors.push_back(std::move(t));
    }
    return archive;
}

}  // namespace vitenc
