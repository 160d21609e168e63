#include "ganlab/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "ganlab/error.hpp"
#include "ganlab/rng.hpp"

namespace ganlab {

std::string Domain::label() const {
    if (kind == Kind::Planar) return "planar2d";
    return "image(" + std::to_string(image.height) + "," + std::to_string(image.width) + "," +
           std::to_string(image.channels) + ")";
}

SampleSet::SampleSet(Tensor<double> samples, Domain domain) : samples_(std::move(samples)), domain_(domain) {
    if (samples_.rank() != 2) throw ShapeError("sample set must be (n, data_dim)");
    if (!samples_.all_finite()) throw NumericError("sample set contains non-finite values");
    if (domain_.is_image()) {
        if (domain_.image.dim() != samples_.cols())
            throw ShapeError("image geometry " + domain_.label() + " does not match data_dim " +
                             std::to_string(samples_.cols()));
        for (double v : samples_.data())
            if (v < -1.0 || v > 1.0) throw std::invalid_argument("image samples must lie in [-1, 1]");
    }
}

LatentSet::LatentSet(Tensor<double> latents) : latents_(std::move(latents)) {
    if (latents_.rank() != 2) throw ShapeError("latent set must be (k, latent_dim)");
}

std::vector<std::array<double, 2>> MixtureSpec::centers() const {
    validate();
    std::vector<std::array<double, 2>> c(modes);
    if (layout == Layout::Ring) {
        for (std::size_t i = 0; i < modes; ++i) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(modes);
            c[i] = {radius * std::cos(angle), radius * std::sin(angle)};
        }
    } else {
        const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(modes))));
        const double offset = (static_cast<double>(side) - 1.0) / 2.0;
        for (std::size_t i = 0; i < modes; ++i)
            c[i] = {radius * (static_cast<double>(i / side) - offset), radius * (static_cast<double>(i % side) - offset)};
    }
    return c;
}

void MixtureSpec::validate() const {
    if (modes < 1) throw ConfigError("mixture needs at least one mode");
    if (!(stddev > 0.0)) throw ConfigError("mixture stddev must be positive");
    if (layout == Layout::Grid) {
        const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(modes))));
        if (side * side != modes) throw ConfigError("grid layout needs a square mode count");
    }
}

LatentSet make_fixed_latents(std::size_t k, std::size_t latent_dim, std::uint64_t seed) {
    if (k < 1 || latent_dim < 1) throw std::invalid_argument("latent set needs k, latent_dim >= 1");
    Rng rng(seed, Stream::Latent);
    Tensor<double> z({k, latent_dim});
    for (double& v : z.data()) v = rng.normal();
    return LatentSet(std::move(z));
}

SampleSet make_gaussian_ring(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
    const auto centers = spec.centers();
    if (n == 0 || n % spec.modes != 0)
        throw std::invalid_argument("n = " + std::to_string(n) + " is not divisible by the mode count " +
                                    std::to_string(spec.modes));
    Rng rng(seed, Stream::Data);
    Tensor<double> x({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = centers[i % spec.modes];
        x(i, 0) = c[0] + spec.stddev * rng.normal();
        x(i, 1) = c[1] + spec.stddev * rng.normal();
    }
    return SampleSet(std::move(x), Domain::planar());
}

std::uint8_t quantize_pixel(double value) {
    const double scaled = std::floor((value + 1.0) * 127.5 + 0.5);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

double dequantize_pixel(std::uint8_t byte) { return static_cast<double>(byte) / 127.5 - 1.0; }

namespace {

std::uint32_t read_u32(const std::vector<unsigned char>& buf, std::size_t at) {
    return static_cast<std::uint32_t>(buf[at]) | static_cast<std::uint32_t>(buf[at + 1]) << 8 |
           static_cast<std::uint32_t>(buf[at + 2]) << 16 | static_cast<std::uint32_t>(buf[at + 3]) << 24;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(bytes, 4);
}

// Netpbm header token, skipping whitespace and '#' comments.
std::string pnm_token(const std::vector<unsigned char>& buf, std::size_t& pos) {
    for (;;) {
        while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
        if (pos < buf.size() && buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    std::string tok;
    while (pos < buf.size() && !std::isspace(buf[pos])) tok += static_cast<char>(buf[pos++]);
    if (tok.empty()) throw FormatError("truncated pixel-map header");
    return tok;
}

std::size_t parse_extent(const std::string& tok) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(tok, &used);
        if (used != tok.size() || v == 0) throw FormatError("bad pixel-map extent '" + tok + "'");
        return static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
        throw FormatError("bad pixel-map extent '" + tok + "'");
    }
}

SampleSet decode(const unsigned char* pixels, std::size_t count, ImageGeometry g) {
    const std::size_t dim = g.dim();
    Tensor<double> x({count, dim});
    auto d = x.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = dequantize_pixel(pixels[i]);
    return SampleSet(std::move(x), Domain::image_of(g));
}

}  // namespace

SampleSet load_image_dataset(const std::filesystem::path& path, std::size_t n) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image file " + path.string());
    const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (n == 0) throw std::invalid_argument("requested zero images");

    if (buf.size() >= 2 && buf[0] == 'P' && (buf[1] == '6' || buf[1] == '5')) {
        std::size_t pos = 2;
        ImageGeometry g;
        g.channels = buf[1] == '6' ? 3 : 1;
        g.width = parse_extent(pnm_token(buf, pos));
        g.height = parse_extent(pnm_token(buf, pos));
        if (pnm_token(buf, pos) != "255") throw FormatError("only maxval 255 pixel maps are supported");
        ++pos;  // single whitespace before the raster
        if (n != 1) throw std::invalid_argument("a pixel map holds a single image");
        if (buf.size() < pos + g.dim()) throw FormatError("pixel map raster truncated");
        return decode(buf.data() + pos, 1, g);
    }

    constexpr std::size_t kHeader = 24;
    if (buf.size() < kHeader || buf[0] != 'G' || buf[1] != 'L' || buf[2] != 'I' || buf[3] != 'M')
        throw FormatError(path.string() + " is not a GLIM image container");
    const auto version = read_u32(buf, 4);
    if (version != kImageFormatVersion)
        throw FormatError("unsupported image container format_version " + std::to_string(version));
    const std::size_t count = read_u32(buf, 8);
    const ImageGeometry g{read_u32(buf, 12), read_u32(buf, 16), read_u32(buf, 20)};
    if (g.dim() == 0) throw FormatError("image container declares an empty geometry");
    if (buf.size() != kHeader + count * g.dim()) throw FormatError("image container size does not match header");
    if (count < n)
        throw std::invalid_argument("image container holds " + std::to_string(count) + " images, need " +
                                    std::to_string(n));
    return decode(buf.data() + kHeader, n, g);
}

void save_image_dataset(const std::filesystem::path& path, const Tensor<double>& samples, ImageGeometry geometry) {
    if (samples.cols() != geometry.dim()) throw ShapeError("samples do not match image geometry");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image file " + path.string());
    out.write("GLIM", 4);
    write_u32(out, kImageFormatVersion);
    write_u32(out, static_cast<std::uint32_t>(samples.rows()));
    write_u32(out, static_cast<std::uint32_t>(geometry.height));
    write_u32(out, static_cast<std::uint32_t>(geometry.width));
    write_u32(out, static_cast<std::uint32_t>(geometry.channels));
    std::vector<char> bytes(samples.numel());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<char>(quantize_pixel(samples[i]));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing image file " + path.string());
}

}  // namespace ganlab
