#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "ganlab/datasets.hpp"
#include "ganlab/error.hpp"
#include "ganlab/experiment.hpp"
#include "support.hpp"

using namespace ganlab;

namespace {

void write_glim(const std::filesystem::path& path, std::uint32_t count, std::uint32_t h, std::uint32_t w,
                std::uint32_t c, std::uint8_t value) {
    std::ofstream out(path, std::ios::binary);
    out.write("GLIM", 4);
    for (std::uint32_t v : {1u, count, h, w, c})
        for (int b = 0; b < 4; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xff));
    for (std::uint32_t i = 0; i < count * h * w * c; ++i) out.put(static_cast<char>(value));
}

std::size_t nearest_center(const std::vector<std::array<double, 2>>& centers, double x, double y) {
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t j = 0; j < centers.size(); ++j) {
        const double d = std::hypot(x - centers[j][0], y - centers[j][1]);
        if (d < bd) {
            bd = d;
            best = j;
        }
    }
    return best;
}

}  // namespace

TEST(Latents, SameSeedIdentical) {
    EXPECT_EQ(make_fixed_latents(64, 16, 9).latents(), make_fixed_latents(64, 16, 9).latents());
    EXPECT_NE(make_fixed_latents(64, 16, 9).latents(), make_fixed_latents(64, 16, 10).latents());
    const auto one = make_fixed_latents(1, 16, 3);
    EXPECT_EQ(one.latents().shape(), (Shape{1, 16}));
}

TEST(Latents, StandardNormalMoments) {
    const auto z = make_fixed_latents(62500, 16, 1);  // 10^6 entries
    double sum = 0, sq = 0;
    for (double v : z.latents().data()) {
        sum += v;
        sq += v * v;
    }
    const double n = 1e6;
    EXPECT_LT(std::abs(sum / n), 3.0 / std::sqrt(n));
    // Var of the sample second moment is 2/n for a standard normal.
    EXPECT_LT(std::abs(sq / n - 1.0), 3.0 * std::sqrt(2.0 / n));
}

TEST(Ring, TinySpreadSitsOnCenters) {
    MixtureSpec spec;
    spec.stddev = 1e-9;
    const auto x = make_gaussian_ring(spec, 64, 1);
    const auto centers = spec.centers();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& c = centers[i % 8];
        EXPECT_LT(std::hypot(x.samples()(i, 0) - c[0], x.samples()(i, 1) - c[1]), 1e-6);
    }
    EXPECT_NEAR(centers[2][0], 0.0, 1e-15);
    EXPECT_NEAR(centers[2][1], 2.0, 1e-15);
}

TEST(Ring, EqualModeCounts) {
    MixtureSpec spec;
    const auto x = make_gaussian_ring(spec, 512, 4);
    const auto centers = spec.centers();
    std::vector<int> counts(8, 0);
    for (std::size_t i = 0; i < x.size(); ++i) ++counts[nearest_center(centers, x.samples()(i, 0), x.samples()(i, 1))];
    for (int c : counts) EXPECT_EQ(c, 64);
}

TEST(Ring, PerModeCovarianceIsIsotropic) {
    MixtureSpec spec;
    const std::size_t per_mode = 20000;
    const auto x = make_gaussian_ring(spec, 8 * per_mode, 2);
    const auto centers = spec.centers();
    const double var = spec.stddev * spec.stddev;
    for (std::size_t mode = 0; mode < 8; ++mode) {
        double sxx = 0, syy = 0, sxy = 0;
        for (std::size_t i = mode; i < x.size(); i += 8) {
            const double dx = x.samples()(i, 0) - centers[mode][0], dy = x.samples()(i, 1) - centers[mode][1];
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        const double n = static_cast<double>(per_mode);
        EXPECT_NEAR(sxx / n / var, 1.0, 0.1);
        EXPECT_NEAR(syy / n / var, 1.0, 0.1);
        EXPECT_LT(std::abs(sxy / n) / var, 0.1);
    }
}

TEST(Ring, RejectsIndivisibleCount) {
    EXPECT_THROW(make_gaussian_ring(MixtureSpec{}, 100, 1), std::invalid_argument);
    MixtureSpec bad;
    bad.stddev = 0;
    EXPECT_THROW(make_gaussian_ring(bad, 8, 1), ConfigError);
}

TEST(Grid, SquareLayout) {
    MixtureSpec spec;
    spec.layout = MixtureSpec::Layout::Grid;
    spec.modes = 25;
    const auto c = spec.centers();
    EXPECT_EQ(c.size(), 25u);
    EXPECT_DOUBLE_EQ(c[0][0], -4.0);
    EXPECT_DOUBLE_EQ(c[24][1], 4.0);
    spec.modes = 8;
    EXPECT_THROW(spec.centers(), ConfigError);
}

TEST(Pixels, QuantizationEndpoints) {
    EXPECT_EQ(quantize_pixel(-1.0), 0);
    EXPECT_EQ(quantize_pixel(1.0), 255);
    EXPECT_EQ(quantize_pixel(0.0), 128);
    EXPECT_EQ(dequantize_pixel(0), -1.0);
    EXPECT_EQ(dequantize_pixel(255), 1.0);
    for (int b = 0; b < 256; ++b) EXPECT_EQ(quantize_pixel(dequantize_pixel(static_cast<std::uint8_t>(b))), b);
}

TEST(ImageLoad, ConstantImagesMapToEndpoints) {
    const auto dir = ganlab::testing::fresh_dir("images");
    write_glim(dir / "zero.glim", 3, 4, 5, 3, 0);
    write_glim(dir / "full.glim", 3, 4, 5, 1, 255);
    const auto zero = load_image_dataset(dir / "zero.glim", 2);
    EXPECT_EQ(zero.samples().shape(), (Shape{2, 60}));
    EXPECT_EQ(zero.domain().image, (ImageGeometry{4, 5, 3}));
    for (double v : zero.samples().data()) EXPECT_EQ(v, -1.0);
    const auto full = load_image_dataset(dir / "full.glim", 3);
    for (double v : full.samples().data()) EXPECT_EQ(v, 1.0);
    EXPECT_THROW(load_image_dataset(dir / "full.glim", 4), std::invalid_argument);
    EXPECT_THROW(load_image_dataset(dir / "missing.glim", 1), IoError);
    std::ofstream(dir / "junk.glim") << "JUNK";
    EXPECT_THROW(load_image_dataset(dir / "junk.glim", 1), FormatError);
}

TEST(ImageLoad, ContainerRoundTrip) {
    const auto dir = ganlab::testing::fresh_dir("images_rt");
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-1, 1);
    Tensor<double> s({4, 2 * 3 * 3});
    for (auto& v : s.data()) v = u(gen);
    save_image_dataset(dir / "x.glim", s, {2, 3, 3});
    const auto back = load_image_dataset(dir / "x.glim", 4);
    for (std::size_t i = 0; i < s.numel(); ++i) EXPECT_LE(std::abs(back.samples()[i] - s[i]), 1.0 / 127.5);
}

TEST(ImageLoad, EmittedGridReloads) {
    const auto dir = ganlab::testing::fresh_dir("grid_rt");
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-1, 1);
    for (std::size_t channels : {1u, 3u}) {
        const ImageGeometry g{3, 2, channels};
        Tensor<double> one({1, g.dim()});
        for (auto& v : one.data()) v = u(gen);
        const auto path = dir / (channels == 3 ? "g.ppm" : "g.pgm");
        emit_image_grid(one, g, path);
        const auto back = load_image_dataset(path, 1);
        EXPECT_EQ(back.domain().image, g);
        for (std::size_t i = 0; i < one.numel(); ++i) EXPECT_LE(std::abs(back.samples()[i] - one[i]), 1.0 / 127.5);
    }
}

TEST(SampleSet, RejectsOutOfRangeImages) {
    EXPECT_THROW(SampleSet(Tensor<double>({1, 4}, 1.5), Domain::image_of({2, 2, 1})), std::invalid_argument);
    EXPECT_THROW(SampleSet(Tensor<double>({1, 5}, 0.0), Domain::image_of({2, 2, 1})), ShapeError);
}
