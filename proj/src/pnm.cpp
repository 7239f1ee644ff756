// Copyright (C) 2026 the sparsevit authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsevit/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <vector>

namespace sparsevit {

namespace {

// Reads one whitespace-separated header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

std::size_t parse_count(const std::string& tok, const char* what) {
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
        throw PnmError(std::string("pixmap header: bad ") + what + " '" + tok + "'");
    return static_cast<std::size_t>(std::stoull(tok));
}

} // namespace

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PnmError("cannot open: " + path);
    if (next_token(in) != "P6") throw PnmError("not a binary pixmap (P6): " + path);
    const std::size_t width = parse_count(next_token(in), "width");
    const std::size_t height = parse_count(next_token(in), "height");
    const std::size_t maxval = parse_count(next_token(in), "maxval");
    if (width == 0 || height == 0) throw PnmError("empty pixmap: " + path);
    if (maxval == 0 || maxval > 255)
        throw PnmError("unsupported maxval (need 1..255): " + path);
    // next_token consumed exactly one whitespace byte after maxval, so the
    // stream now sits on the first pixel byte.
    std::vector<char> raw(width * height * 3);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw PnmError("truncated pixel data: " + path);

    Image img;
    img.width = width;
    img.height = height;
    img.data.resize(raw.size());
    const double scale = 1.0 / static_cast<double>(maxval);
    for (std::size_t i = 0; i < raw.size(); ++i)
        img.data[i] = static_cast<double>(static_cast<unsigned char>(raw[i])) * scale;
    return img;
}

void write_ppm(const Image& image, const std::string& path) {
    if (image.data.size() != image.width * image.height * 3)
        throw PnmError("image buffer size mismatch");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PnmError("cannot open for writing: " + path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    for (double v : image.data) {
        const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        out.put(static_cast<char>(std::lround(clamped * 255.0)));
    }
    if (!out) throw PnmError("short write: " + path);
}

void write_pgm(const DenseMatrix& values, const std::string& path) {
    if (values.empty()) throw PnmError("refusing to write an empty graymap");
    double lo = values.data()[0], hi = values.data()[0];
    for (double v : values.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi - lo;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PnmError("cannot open for writing: " + path);
    out << "P5\n" << values.cols() << " " << values.rows() << "\n255\n";
    for (double v : values.data()) {
        const long g = span > 0.0 ? std::lround((v - lo) / span * 255.0) : 0;
        out.put(static_cast<char>(g));
    }
    if (!out) throw PnmError("short write: " + path);
}

} // namespace sparsevit
