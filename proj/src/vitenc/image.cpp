#include "vitenc/image.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

#include "vitenc/errors.hpp"

namespace vitenc {

ImageTensor ImageTensor::zeros(int h, int w, int c) {
    ImageTensor img;
    img.height = h;
    img.width = w;
    img.channels = c;
    img.data.assign(static_cast<std::size_t>(h) * w * c, 0);
    validate(img);
    return img;
}

void validate(const ImageTensor& img) {
    if (img.height < 1 || img.width < 1) {
        throw std::invalid_argument("image dimensions must be positive, got " +
                                    std::to_string(img.height) + "x" +
                                    std::to_string(img.width));
    }
    if (img.channels != 1 && img.channels != 3) {
        throw std::invalid_argument("image must have 1 or 3 channels, got " +
                                    std::to_string(img.channels));
    }
    std::size_t expected = static_cast<std::size_t>(img.height) * img.width * img.channels;
    if (img.data.size() != expected) {
        throw std::invalid_argument("image data size " + std::to_string(img.data.size()) +
                                    " does not match geometry (" + std::to_string(expected) +
                                    " samples expected)");
    }
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        char c = static_cast<char>(bytes[pos]);
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') {
                ++pos;
            }
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    std::size_t start = pos;
    while (pos < bytes.size() &&
           !std::isspace(static_cast<unsigned char>(bytes[pos])) && bytes[pos] != '#') {
        ++pos;
    }
    if (start == pos) {
        throw ImageFormatError("unexpected end of netpbm header");
    }
    return std::string(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                       bytes.begin() + static_cast<std::ptrdiff_t>(pos));
}

int parse_dim(const std::string& token, const char* what) {
    try {
        std::size_t used = 0;
        int v = std::stoi(token, &used);
        if (used != token.size() || v < 1) {
            throw std::invalid_argument(token);
        }
        return v;
    } catch (const std::exception&) {
        throw ImageFormatError(std::string("invalid ") + what + " in netpbm header: \"" +
                               token + "\"");
    }
}

}  // namespace

ImageTensor decode_netpbm(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    std::string magic = next_token(bytes, pos);
    int channels;
    if (magic == "P6") {
        channels = 3;
    } else if (magic == "P5") {
        channels = 1;
    } else {
        throw ImageFormatError("unsupported netpbm magic \"" + magic +
                               "\" (only binary P5/P6)");
    }
    int width = parse_dim(next_token(bytes, pos), "width");
    int height = parse_dim(next_token(bytes, pos), "height");
    std::string maxval = next_token(bytes, pos);
    if (maxval != "255") {
        throw ImageFormatError("netpbm maxval must be 255, got \"" + maxval + "\"");
    }
    // Exactly one whitespace byte separates the header from the payload.
    if (pos >= bytes.size() ||
        !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw ImageFormatError("missing separator after netpbm maxval");
    }
    ++pos;
    ImageTensor img;
    img.height = height;
    img.width = width;
    img.channels = channels;
    std::size_t payload = static_cast<std::size_t>(height) * width * channels;
    if (bytes.size() - pos < payload) {
        throw ImageFormatError("netpbm payload truncated: expected " +
                               std::to_string(payload) + " bytes, got " +
                               std::to_string(bytes.size() - pos));
    }
    img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + payload));
    return img;
}

std::vector<std::uint8_t> encode_netpbm(const ImageTensor& img) {
    validate(img);
    std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" +
                         std::to_string(img.width) + " " + std::to_string(img.height) +
                         "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data.begin(), img.data.end());
    return out;
}

ImageTensor read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ImageFormatError("cannot open image file: " + path);
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_netpbm(bytes);
}

void write_image(const std::string& path, const ImageTensor& img) {
    std::vector<std::uint8_t> bytes = encode_netpbm(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ImageFormatError("cannot write image file: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace vitenc
