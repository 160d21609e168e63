#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ganlab/tensor.hpp"

namespace ganlab {

struct ImageGeometry {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    std::size_t dim() const { return height * width * channels; }
    friend bool operator==(const ImageGeometry&, const ImageGeometry&) = default;
};

struct Domain {
    enum class Kind { Planar, Image };
    Kind kind = Kind::Planar;
    ImageGeometry image;  // meaningful for Kind::Image only

    static Domain planar() { return {}; }
    static Domain image_of(ImageGeometry g) { return {Kind::Image, g}; }
    bool is_image() const { return kind == Kind::Image; }
    std::string label() const;
    friend bool operator==(const Domain&, const Domain&) = default;
};

// The fixed real-data set X: n samples of dimension data_dim. Immutable once
// built; image samples are pre-scaled to [-1, 1].
class SampleSet {
public:
    SampleSet(Tensor<double> samples, Domain domain);

    std::size_t size() const { return samples_.rows(); }
    std::size_t dim() const { return samples_.cols(); }
    const Tensor<double>& samples() const { return samples_; }
    const Domain& domain() const { return domain_; }

private:
    Tensor<double> samples_;
    Domain domain_;
};

// The fixed latent set Z: k standard-normal vectors.
class LatentSet {
public:
    explicit LatentSet(Tensor<double> latents);

    std::size_t size() const { return latents_.rows(); }
    std::size_t dim() const { return latents_.cols(); }
    const Tensor<double>& latents() const { return latents_; }

private:
    Tensor<double> latents_;
};

struct MixtureSpec {
    enum class Layout { Ring, Grid };
    Layout layout = Layout::Ring;
    std::size_t modes = 8;
    double radius = 2.0;  // ring radius, or grid pitch
    double stddev = 0.05;

    std::vector<std::array<double, 2>> centers() const;
    void validate() const;
};

LatentSet make_fixed_latents(std::size_t k, std::size_t latent_dim, std::uint64_t seed);

// n / K samples per mode; sample i belongs to mode i % K.
SampleSet make_gaussian_ring(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

// Binary image container, little-endian:
//   "GLIM" | u32 format_version (1) | u32 count | u32 height | u32 width | u32 channels
// followed by count*height*width*channels unsigned bytes, row-major
// (image, row, column, channel).
inline constexpr std::uint32_t kImageFormatVersion = 1;

// Maps [-1, 1] to a byte: round((v + 1) * 127.5), halves rounded up.
std::uint8_t quantize_pixel(double value);
double dequantize_pixel(std::uint8_t byte);

// Loads the first n images of a GLIM container, or a single binary PPM/PGM
// (P6/P5, maxval 255) such as an emitted grid. Bytes map linearly to [-1, 1].
SampleSet load_image_dataset(const std::filesystem::path& path, std::size_t n);
void save_image_dataset(const std::filesystem::path& path, const Tensor<double>& samples, ImageGeometry geometry);

}  // namespace ganlab
