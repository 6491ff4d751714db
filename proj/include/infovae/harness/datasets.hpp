#pragma once

// Desk-scale datasets and file loaders (IDX, CSV).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "infovae/autodiff.hpp"
#include "infovae/errors.hpp"
#include "infovae/random.hpp"

namespace infovae::harness {

struct Dataset {
    Tensor x;  // [N, D]
    std::optional<std::vector<int>> labels;
    bool binarized = false;
    std::string name;

    std::size_t size() const { return x.rows(); }
    std::size_t dim() const { return x.cols(); }

    void validate() const {
        if (x.rank() != 2 || x.rows() == 0 || x.cols() == 0) throw ShapeError("Dataset '" + name + "': need N >= 1, D >= 1");
        if (labels && labels->size() != x.rows()) throw ShapeError("Dataset '" + name + "': label count differs from N");
        if (binarized)
            for (double v : x.values())
                if (v != 0.0 && v != 1.0) throw ConfigError("Dataset '" + name + "': binarized data has a non-binary entry");
    }

    std::size_t num_classes() const {
        if (!labels) return 0;
        int m = -1;
        for (int y : *labels) m = std::max(m, y);
        return static_cast<std::size_t>(m + 1);
    }

    /// Empirical label frequencies.
    std::vector<double> label_distribution() const {
        std::vector<double> c(num_classes(), 0.0);
        if (!labels) return c;
        for (int y : *labels) c[static_cast<std::size_t>(y)] += 1.0;
        for (auto& v : c) v /= static_cast<double>(labels->size());
        return c;
    }
};

namespace detail {
/// Applies one random permutation to rows and labels.
inline void shuffle_rows(std::vector<double>& x, std::vector<int>& labels, std::size_t d, Rng& rng) {
    const std::size_t n = labels.size();
    for (std::size_t i = n; i-- > 1;) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        const std::size_t j = pick(rng);
        std::swap(labels[i], labels[j]);
        for (std::size_t c = 0; c < d; ++c) std::swap(x[i * d + c], x[j * d + c]);
    }
}
}  // namespace detail

/// [[-1], [1]].
inline Dataset two_point_dataset() { return {Tensor::matrix(2, 1, {-1.0, 1.0}), std::nullopt, false, "two_point"}; }

/// k unit-variance Gaussian clusters centred on a circle of radius `sep` in 2-D.
/// Label counts differ by at most one.
inline Dataset synthetic_mixture(std::size_t k, std::size_t n, double sep, std::uint64_t seed) {
    if (k < 2 || n < k) throw ConfigError("synthetic_mixture: need k >= 2 and n >= k");
    Rng rng = make_rng(seed, 0x6d6978ULL);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> x(2 * n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % k;
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
        x[2 * i] = sep * std::cos(angle) + n01(rng);
        x[2 * i + 1] = sep * std::sin(angle) + n01(rng);
        labels[i] = static_cast<int>(c);
    }
    detail::shuffle_rows(x, labels, 2, rng);
    return {Tensor::matrix(n, 2, std::move(x)), std::move(labels), false, "mixture"};
}

/// Binary vectors: k random prototypes of `dim` bits, each bit flipped with
/// probability `flip`. Labels are the prototype index.
inline Dataset synthetic_binary_codes(std::size_t n, std::size_t k, std::uint64_t seed, std::size_t dim = 16,
                                      double flip = 0.05) {
    if (k < 2 || n < k || dim == 0) throw ConfigError("synthetic_binary_codes: need k >= 2, n >= k, dim >= 1");
    if (!(flip >= 0.0 && flip <= 0.5)) throw ConfigError("synthetic_binary_codes: flip must be in [0, 0.5]");
    Rng rng = make_rng(seed, 0x62696e73ULL);
    std::bernoulli_distribution coin(0.5), flipper(flip);
    std::vector<std::vector<double>> protos(k, std::vector<double>(dim));
    for (auto& p : protos)
        for (auto& b : p) b = coin(rng) ? 1.0 : 0.0;
    std::vector<double> x(n * dim);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % k;
        labels[i] = static_cast<int>(c);
        for (std::size_t j = 0; j < dim; ++j) x[i * dim + j] = flipper(rng) ? 1.0 - protos[c][j] : protos[c][j];
    }
    detail::shuffle_rows(x, labels, dim, rng);
    return {Tensor::matrix(n, dim, std::move(x)), std::move(labels), true, "binary_codes"};
}

namespace detail {
// 8x8 glyphs for the digits 0-9.
inline constexpr std::array<std::array<const char*, 8>, 10> kGlyphs = {{
    {"..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####.."},
    {"...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "...##...", "..####.."},
    {"..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######."},
    {"..####..", ".#....#.", "......#.", "...###..", "......#.", "......#.", ".#....#.", "..####.."},
    {".....#..", "....##..", "...#.#..", "..#..#..", ".######.", ".....#..", ".....#..", ".....#.."},
    {".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####.."},
    {"..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.", "..####.."},
    {".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#...."},
    {"..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.", "..####.."},
    {"..####..", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", "......#.", "..####.."},
}};
}  // namespace detail

/// 8x8 grey-level digits in [0, 1]: a glyph shifted by up to one pixel, blurred
/// intensity and additive noise. Balanced labels 0-9.
inline Dataset synthetic_digits(std::size_t n, std::uint64_t seed) {
    if (n < 10) throw ConfigError("synthetic_digits: need n >= 10");
    Rng rng = make_rng(seed, 0x64696769ULL);
    std::uniform_int_distribution<int> shift(-1, 1);
    std::uniform_real_distribution<double> ink(0.75, 1.0), noise(0.0, 0.15);
    std::vector<double> x(n * 64);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % 10;
        labels[i] = static_cast<int>(c);
        const int dr = shift(rng), dc = shift(rng);
        const double level = ink(rng);
        for (int r = 0; r < 8; ++r)
            for (int col = 0; col < 8; ++col) {
                const int sr = r - dr, sc = col - dc;
                const bool on = sr >= 0 && sr < 8 && sc >= 0 && sc < 8 && detail::kGlyphs[c][static_cast<std::size_t>(sr)][sc] == '#';
                x[i * 64 + static_cast<std::size_t>(r * 8 + col)] = std::min(1.0, (on ? level : 0.0) + noise(rng));
            }
    }
    detail::shuffle_rows(x, labels, 64, rng);
    return {Tensor::matrix(n, 64, std::move(x)), std::move(labels), false, "digits"};
}

/// Each entry becomes 1 with probability equal to its value.
inline Dataset binarize_stochastic(const Dataset& d, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x62696e61ULL);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out(d.x.numel());
    auto v = d.x.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(v[i] >= 0.0 && v[i] <= 1.0))
            throw ConfigError("binarize_stochastic: value " + std::to_string(v[i]) + " outside [0, 1]");
        out[i] = u(rng) < v[i] ? 1.0 : 0.0;
    }
    return {Tensor(d.x.shape(), std::move(out)), d.labels, true, d.name + "_binarized"};
}

namespace detail {
inline std::uint32_t read_be32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("IDX: truncated header in " + path);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

inline std::vector<unsigned char> read_bytes(std::istream& is, std::size_t n, const std::string& path) {
    std::vector<unsigned char> out(n);
    if (!is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n)))
        throw FormatError("IDX: payload shorter than its header declares in " + path);
    return out;
}

inline bool has_idx_magic(const std::filesystem::path& path, std::uint32_t magic) {
    std::ifstream is(path, std::ios::binary);
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    return ((std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3]) == magic;
}

inline std::vector<int> load_idx_labels(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("IDX: cannot open " + path.string());
    if (read_be32(is, path.string()) != 0x00000801u) throw FormatError("IDX: bad label magic in " + path.string());
    const std::uint32_t n = read_be32(is, path.string());
    const auto bytes = read_bytes(is, n, path.string());
    return {bytes.begin(), bytes.end()};
}

inline Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("CSV: cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw FormatError("CSV: empty file " + path.string());
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    std::ptrdiff_t label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == "label") label_col = static_cast<std::ptrdiff_t>(i);
    const std::size_t d = header.size() - (label_col >= 0 ? 1 : 0);
    if (d == 0) throw FormatError("CSV: no pixel columns in " + path.string());
    std::vector<double> x;
    std::vector<int> labels;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            double v;
            try {
                std::size_t used = 0;
                v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw FormatError("CSV: non-numeric value '" + cell + "' at row " + std::to_string(row));
            }
            if (static_cast<std::ptrdiff_t>(col) == label_col)
                labels.push_back(static_cast<int>(v));
            else
                x.push_back(v);
            ++col;
        }
        if (col != header.size()) throw FormatError("CSV: row " + std::to_string(row) + " has " + std::to_string(col) + " columns");
    }
    const std::size_t n = x.size() / d;
    if (n == 0) throw FormatError("CSV: no samples in " + path.string());
    double hi = 0.0;
    for (double v : x) {
        if (!(v >= 0.0 && v <= 255.0)) throw FormatError("CSV: pixel value " + std::to_string(v) + " outside [0, 255]");
        hi = std::max(hi, v);
    }
    if (hi > 1.0)
        for (auto& v : x) v /= 255.0;
    Dataset out{Tensor::matrix(n, d, std::move(x)), std::nullopt, false, path.stem().string()};
    if (label_col >= 0) out.labels = std::move(labels);
    return out;
}
}  // namespace detail

/// IDX image file (magic 0x00000803, big-endian dims, unsigned bytes) with an
/// optional IDX label file (0x00000801); anything else is read as CSV.
/// Pixels are scaled to [0, 1].
inline Dataset load_digits_idx(const std::filesystem::path& path, const std::optional<std::filesystem::path>& labels_path = {}) {
    if (!std::filesystem::exists(path)) throw FormatError("dataset file not found: " + path.string());
    Dataset d;
    if (detail::has_idx_magic(path, 0x00000803u)) {
        std::ifstream is(path, std::ios::binary);
        detail::read_be32(is, path.string());
        const std::uint32_t n = detail::read_be32(is, path.string());
        const std::uint32_t rows = detail::read_be32(is, path.string());
        const std::uint32_t cols = detail::read_be32(is, path.string());
        if (n == 0 || rows == 0 || cols == 0) throw FormatError("IDX: zero dimension in " + path.string());
        const std::size_t dim = std::size_t{rows} * cols;
        const auto bytes = detail::read_bytes(is, std::size_t{n} * dim, path.string());
        std::vector<double> x(bytes.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = bytes[i] / 255.0;
        d = {Tensor::matrix(n, dim, std::move(x)), std::nullopt, false, path.stem().string()};
    } else {
        unsigned char b[4] = {0, 0, 0, 0};
        std::ifstream probe(path, std::ios::binary);
        probe.read(reinterpret_cast<char*>(b), 4);
        if (b[0] == 0 && b[1] == 0 && (b[2] == 0x08))
            throw FormatError("IDX: unsupported magic in " + path.string() + " (expected 0x00000803 for images)");
        d = detail::load_csv(path);
    }
    if (labels_path) {
        d.labels = detail::load_idx_labels(*labels_path);
        if (d.labels->size() != d.size()) throw FormatError("IDX: label count differs from image count");
    }
    d.validate();
    return d;
}

/// First n rows.
inline Dataset head(const Dataset& d, std::size_t n) {
    if (n == 0 || n > d.size()) throw ConfigError("dataset '" + d.name + "' has " + std::to_string(d.size()) +
                                                  " rows, cannot take " + std::to_string(n));
    Dataset out{slice_rows(d.x, 0, n), std::nullopt, d.binarized, d.name};
    if (d.labels) out.labels = std::vector<int>(d.labels->begin(), d.labels->begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

}  // namespace infovae::harness
