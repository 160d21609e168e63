#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ganlab/datasets.hpp"
#include "ganlab/evaluation.hpp"
#include "ganlab/training.hpp"

namespace ganlab {

inline constexpr int kConfigFormatVersion = 1;
inline constexpr int kTableFormatVersion = 1;

enum class Precision { F32, F64 };
const char* precision_name(Precision p);
Precision parse_precision(std::string_view text);

struct DatasetConfig {
    enum class Kind { Mixture, Image };
    std::string name = "ring8";
    Kind kind = Kind::Mixture;
    MixtureSpec mixture{};
    std::filesystem::path image_path;
    std::size_t n = 512;
};

struct SweepEntry {
    std::size_t m = 512;
    double noise_variance = 0.0;
    // Directory-safe tag, e.g. "m512_noise0" or "m512_noise0.5".
    std::string label() const;
    friend bool operator==(const SweepEntry&, const SweepEntry&) = default;
};

struct EvalSettings {
    bool pixel = true;
    bool feature = true;
    std::uint64_t embedder_seed = 5;
    std::size_t feature_dim = 64;
    std::size_t grid_samples = 64;
};

// Parsed from a flat `key = value` file with dotted section names; see
// README.md for the full key list. train.n/k/latent_dim are filled from the
// dataset and latent sections.
struct ExperimentConfig {
    DatasetConfig dataset;
    TrainConfig train;
    std::vector<SweepEntry> sweep;  // defaults to the single (train.m, train.noise_variance) entry
    EvalSettings eval;
    Precision precision = Precision::F64;
    std::size_t checkpoint_every = 0;  // 0: final checkpoint only
    std::filesystem::path output_dir = "runs/default";

    TrainConfig train_config_for(const SweepEntry& entry) const;
    void validate() const;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Every semantically meaningful field in fixed order; output.dir excluded.
std::string canonical_config(const ExperimentConfig& config);
// Git blob-style SHA-1 ("blob <len>\0<content>"), lowercase hex.
std::string git_blob_sha1(std::string_view content);
// git_blob_sha1(canonical_config(config)).
std::string config_hash(const ExperimentConfig& config);

struct RegimeRecord {
    SweepEntry entry;
    std::string status = "pending";  // "complete" or "failed"
    std::string error;
    std::uint64_t iterations = 0;
    bool converged = false;
    std::vector<MetricsReport> reports;
    // Relative to the run directory.
    std::string loss_history;
    std::string checkpoint;
    std::string grid;
    double seconds = 0.0;
};

struct RunRecord {
    int format_version = 1;
    std::string dataset;
    std::string config_hash;
    std::string config_text;
    std::string precision;
    std::vector<RegimeRecord> regimes;
    bool complete = false;
    std::string table;
    double wall_seconds = 0.0;
};

void save_record(const RunRecord& record, const std::filesystem::path& path);
RunRecord load_record(const std::filesystem::path& path);

SampleSet build_dataset(const DatasetConfig& config, std::uint64_t seed);

// Overfitting and mode-drop reports in every enabled space, in the order
// (overfitting, mode_drop) x (pixel, feature).
std::vector<MetricsReport> evaluate_generator(const Generator& generator, const LatentSet& latents,
                                              const SampleSet& data, const FeatureEmbedder& embedder,
                                              const EvalSettings& eval, std::size_t query_count,
                                              std::uint64_t seed_eval);

// Trains one regime into `dir` (loss history, checkpoint, grid); evaluates
// when `evaluate` is set.
RegimeRecord run_regime(const ExperimentConfig& config, const SweepEntry& entry, const SampleSet& data,
                        const LatentSet& latents, const std::filesystem::path& run_dir, bool evaluate);

// Builds X and Z once, then trains and evaluates every sweep entry. The
// record is rewritten after each regime; on failure it stays incomplete and
// the error propagates.
RunRecord run_experiment(const ExperimentConfig& config);

// Loads the EMA generator from a training checkpoint and evaluates it.
std::vector<MetricsReport> evaluate_checkpoint(const ExperimentConfig& config,
                                               const std::filesystem::path& checkpoint);

// (rows, cols) of the square-ish tiling used for `count` samples.
std::pair<std::size_t, std::size_t> grid_layout(std::size_t count);

// Tiled binary PPM (3 channels) or PGM (1 channel), [-1, 1] -> [0, 255].
void emit_image_grid(const Tensor<double>& samples, ImageGeometry geometry, const std::filesystem::path& path);
// SVG scatter of data (blue) vs generated (red) points.
void emit_scatter(const Tensor<double>& data, const Tensor<double>& generated, const std::filesystem::path& path);
// Image grid of `generated` for image data, scatter against `data` otherwise.
void emit_grid(const SampleSet& data, const Tensor<double>& generated, const std::filesystem::path& path);

// "# format_version: 1", header, then one row per
// (dataset, m, noise, direction, space). Throws without creating the file
// when there is nothing to write.
void emit_table(const std::vector<RunRecord>& records, const std::filesystem::path& path);
std::vector<std::string> table_columns();

}  // namespace ganlab
