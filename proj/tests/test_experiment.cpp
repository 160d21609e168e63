#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ganlab/checkpoint.hpp"
#include "ganlab/error.hpp"
#include "ganlab/experiment.hpp"
#include "support.hpp"

using namespace ganlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// A tiny but complete experiment: ring with 4 modes, n = k = 32.
const char* kSmallConfig = R"(format_version = 1
# small smoke experiment
dataset.name = ring4
dataset.kind = ring
dataset.modes = 4
dataset.n = 32
latent.k = 32
latent.dim = 4
train.g_hidden = 16,16
train.d_hidden = 16,16
train.lr = 0.001
train.max_iters = 20
train.convergence_window = 0
eval.query_count = 16
)";

ExperimentConfig small_config(const std::string& sweep, const fs::path& out) {
    auto cfg = parse_config(std::string(kSmallConfig) + "sweep = " + sweep + "\n");
    cfg.output_dir = out;
    return cfg;
}

}  // namespace

TEST(ConfigParse, DefaultsAndOverrides) {
    const auto cfg = parse_config("format_version = 1\n");
    EXPECT_EQ(cfg.dataset.name, "ring8");
    EXPECT_EQ(cfg.train.n, 512u);
    EXPECT_EQ(cfg.train.k, 512u);
    ASSERT_EQ(cfg.sweep.size(), 1u);
    EXPECT_EQ(cfg.sweep[0], (SweepEntry{512, 0.0}));
    EXPECT_EQ(cfg.precision, Precision::F64);

    const auto small = small_config("32:0, 16:0, 8:0", "x");
    EXPECT_EQ(small.train.n, 32u);
    EXPECT_EQ(small.train.latent_dim, 4u);
    EXPECT_EQ(small.train.g_hidden, (std::vector<std::size_t>{16, 16}));
    EXPECT_EQ(small.sweep.size(), 3u);
    EXPECT_EQ(small.sweep[2].label(), "m8_noise0");
    EXPECT_EQ((SweepEntry{512, 0.5}).label(), "m512_noise0.5");
}

TEST(ConfigParse, Errors) {
    EXPECT_THROW(parse_config("dataset.n = 8\n"), ConfigError);                        // no version
    EXPECT_THROW(parse_config("format_version = 2\n"), ConfigError);                   // future version
    EXPECT_THROW(parse_config("format_version = 1\nbogus = 1\n"), ConfigError);        // unknown key
    EXPECT_THROW(parse_config("format_version = 1\ntrain.m = 1\ntrain.m = 2\n"), ConfigError);
    EXPECT_THROW(parse_config("format_version = 1\ntrain.lr = fast\n"), ConfigError);
    EXPECT_THROW(parse_config("format_version = 1\nsweep = 512\n"), ConfigError);
    EXPECT_THROW(parse_config("format_version = 1\nsweep = 128:0.5\n"), ConfigError);  // both sources
    EXPECT_THROW(parse_config("format_version = 1\nsweep = 512:0, 512:0\n"), ConfigError);
    EXPECT_THROW(parse_config("format_version = 1\ndataset.n = 100\nlatent.k = 100\n"), ConfigError);
    EXPECT_THROW(parse_config("format_version = 1\neval.spaces = pixel,cosine\n"), ConfigError);
    EXPECT_NO_THROW(parse_config("format_version = 1\nsweep = 128:0.5\ntrain.force_mixed_regimes = true\n"));
}

TEST(ConfigHash, ChangesExactlyWithSemanticFields) {
    const auto base = parse_config("format_version = 1\n");
    const std::string h = config_hash(base);
    EXPECT_EQ(h.size(), 40u);
    // Formatting, comments, key order and output location do not matter.
    EXPECT_EQ(config_hash(parse_config("# c\nformat_version=1\n\n  output.dir = elsewhere  # x\n")), h);
    EXPECT_EQ(config_hash(parse_config("format_version = 1\ntrain.m = 512\ntrain.lr = 1e-4\n")), h);
    auto moved = base;
    moved.output_dir = "/tmp/other";
    EXPECT_EQ(config_hash(moved), h);
    for (const char* change : {"train.lr = 2e-4", "train.seed = 4", "latent.dim = 8", "eval.seed = 1",
                               "sweep = 512:0, 256:0", "run.precision = f32", "dataset.std = 0.1",
                               "train.d_hidden = 256,64", "eval.spaces = pixel"}) {
        EXPECT_NE(config_hash(parse_config(std::string("format_version = 1\n") + change + "\n")), h) << change;
    }
}

TEST(ConfigHash, GitBlobVectors) {
    EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(ConfigHash, CanonicalTextRoundTrips) {
    const auto cfg = parse_config("format_version = 1\n");
    const auto text = canonical_config(cfg);
    EXPECT_EQ(text.rfind("format_version = 1\n", 0), 0u);
    EXPECT_EQ(text.find("output.dir"), std::string::npos);
    EXPECT_EQ(parse_config(text).sweep, cfg.sweep);
    EXPECT_EQ(config_hash(parse_config(text)), config_hash(cfg));
}

TEST(GridLayout, SquareTiling) {
    EXPECT_EQ(grid_layout(1), (std::pair<std::size_t, std::size_t>{1, 1}));
    EXPECT_EQ(grid_layout(16), (std::pair<std::size_t, std::size_t>{4, 4}));
    EXPECT_EQ(grid_layout(17), (std::pair<std::size_t, std::size_t>{4, 5}));
    EXPECT_EQ(grid_layout(64), (std::pair<std::size_t, std::size_t>{8, 8}));
    EXPECT_THROW(grid_layout(0), std::invalid_argument);
}

TEST(EmitGrid, SingleZeroImageIsMidGray) {
    const auto dir = ganlab::testing::fresh_dir("emit_grid");
    emit_image_grid(Tensor<double>({1, 3}, 0.0), ImageGeometry{1, 1, 3}, dir / "g.ppm");
    const auto bytes = slurp(dir / "g.ppm");
    ASSERT_GE(bytes.size(), 3u);
    EXPECT_EQ(bytes.rfind("P6\n", 0), 0u);
    EXPECT_NE(bytes.find("\n1 1\n255\n"), std::string::npos);
    for (std::size_t i = bytes.size() - 3; i < bytes.size(); ++i) EXPECT_EQ(static_cast<unsigned char>(bytes[i]), 128);
}

TEST(EmitGrid, SixteenSamplesTileFourByFour) {
    const auto dir = ganlab::testing::fresh_dir("emit_grid16");
    const ImageGeometry g{2, 3, 1};
    Tensor<double> s({16, g.dim()}, -1.0);
    for (std::size_t j = 0; j < g.dim(); ++j) s(5, j) = 1.0;  // tile (1, 1) white
    emit_image_grid(s, g, dir / "g.pgm");
    const auto loaded = load_image_dataset(dir / "g.pgm", 1);
    EXPECT_EQ(loaded.domain().image, (ImageGeometry{8, 12, 1}));
    const auto& px = loaded.samples();
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 12; ++x) {
            const bool white = y >= 2 && y < 4 && x >= 3 && x < 6;
            EXPECT_EQ(px(0, y * 12 + x), white ? 1.0 : -1.0) << y << "," << x;
        }
}

TEST(EmitScatter, WritesVersionedSvg) {
    const auto dir = ganlab::testing::fresh_dir("scatter");
    std::mt19937_64 gen(1);
    emit_scatter(ganlab::testing::random_matrix(10, 2, gen), ganlab::testing::random_matrix(7, 2, gen), dir / "s.svg");
    const auto text = slurp(dir / "s.svg");
    EXPECT_NE(text.find("format_version 1"), std::string::npos);
    std::size_t circles = 0;
    for (auto p = text.find("<circle"); p != std::string::npos; p = text.find("<circle", p + 1)) ++circles;
    EXPECT_EQ(circles, 17u);
}

TEST(EmitTable, EmptyInputWritesNothing) {
    const auto dir = ganlab::testing::fresh_dir("table_empty");
    EXPECT_THROW(emit_table({}, dir / "t.csv"), std::invalid_argument);
    RunRecord no_rows;
    no_rows.regimes.push_back(RegimeRecord{});
    EXPECT_THROW(emit_table({no_rows}, dir / "t.csv"), std::invalid_argument);
    EXPECT_FALSE(fs::exists(dir / "t.csv"));
}

TEST(EmitTable, ValuesRoundTripAtFullPrecision) {
    const auto dir = ganlab::testing::fresh_dir("table_values");
    RunRecord rec;
    rec.dataset = "ring8";
    for (std::size_t m : {512u, 128u}) {
        RegimeRecord rr;
        rr.entry = {m, 0.0};
        for (auto dir_ : {Direction::Overfitting, Direction::ModeDrop})
            for (const char* space : {"pixel_l1", "feature(random,seed=5)"})
                rr.reports.push_back({dir_, space, 1.0 / 3 + m, 2.0 / 7, 0.1 + 0.2, 200, 4});
        rec.regimes.push_back(rr);
    }
    emit_table({rec}, dir / "t.csv");
    const auto lines = lines_of(slurp(dir / "t.csv"));
    ASSERT_EQ(lines.size(), 2u + 2 * 4);
    EXPECT_EQ(lines[0], "# format_version: 1");
    EXPECT_EQ(lines[1], "dataset,m,noise,direction,space,avg,top10,top5,query_count,seed_eval");
    for (std::size_t i = 2; i < lines.size(); ++i) {
        const auto cols = split_csv(lines[i]);
        ASSERT_EQ(cols.size(), table_columns().size());
        const auto& rr = rec.regimes[(i - 2) / 4];
        const auto& r = rr.reports[(i - 2) % 4];
        EXPECT_EQ(cols[0], "ring8");
        EXPECT_EQ(std::stoul(cols[1]), rr.entry.m);
        EXPECT_EQ(cols[3], direction_name(r.direction));
        EXPECT_EQ(cols[4], r.space);
        EXPECT_EQ(std::strtod(cols[5].c_str(), nullptr), r.avg);
        EXPECT_EQ(std::strtod(cols[6].c_str(), nullptr), r.top10);
        EXPECT_EQ(std::strtod(cols[7].c_str(), nullptr), r.top5);
        EXPECT_EQ(cols[8], "200");
    }
}

TEST(Records, JsonRoundTrip) {
    const auto dir = ganlab::testing::fresh_dir("record_rt");
    RunRecord rec;
    rec.dataset = "ring8";
    rec.config_hash = "abc";
    rec.config_text = "format_version = 1\n";
    rec.precision = "f64";
    RegimeRecord rr;
    rr.entry = {128, 0.0};
    rr.status = "complete";
    rr.iterations = 1500;
    rr.converged = true;
    rr.reports.push_back({Direction::ModeDrop, "pixel_l1", 0.1 + 0.2, 1.0 / 3, 2.0 / 3, 200, 4});
    rec.regimes.push_back(rr);
    save_record(rec, dir / "r.json");
    const auto back = load_record(dir / "r.json");
    EXPECT_EQ(back.regimes.size(), 1u);
    EXPECT_EQ(back.regimes[0].reports[0].avg, 0.1 + 0.2);
    EXPECT_EQ(back.regimes[0].reports[0].top10, 1.0 / 3);
    EXPECT_EQ(back.regimes[0].iterations, 1500u);
    EXPECT_EQ(back.config_text, rec.config_text);
    EXPECT_FALSE(back.complete);
    std::ofstream(dir / "bad.json") << "{";
    EXPECT_THROW(load_record(dir / "bad.json"), FormatError);
}

TEST(RunExperiment, SingleDeterministicEntry) {
    const auto dir = ganlab::testing::fresh_dir("run_single");
    const auto rec = run_experiment(small_config("32:0", dir));
    EXPECT_TRUE(rec.complete);
    ASSERT_EQ(rec.regimes.size(), 1u);
    EXPECT_EQ(rec.regimes[0].iterations, 20u);
    EXPECT_EQ(rec.regimes[0].reports.size(), 4u);
    const auto lines = lines_of(slurp(dir / "table.csv"));
    EXPECT_EQ(lines.size(), 2u + 4);
    for (const auto* f : {"record.json", "m32_noise0/loss_history.csv", "m32_noise0/checkpoint.txt",
                          "m32_noise0/scatter.svg", "m32_noise0/metrics.csv"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_EQ(lines_of(slurp(dir / "m32_noise0/loss_history.csv")).size(), 2u + 20);
    const auto stored = load_record(dir / "record.json");
    EXPECT_TRUE(stored.complete);
    EXPECT_EQ(stored.config_hash, config_hash(small_config("32:0", dir)));
}

TEST(RunExperiment, RepeatedRunsGiveIdenticalTables) {
    const auto a = ganlab::testing::fresh_dir("run_rep_a"), b = ganlab::testing::fresh_dir("run_rep_b");
    run_experiment(small_config("32:0, 8:0", a));
    run_experiment(small_config("32:0, 8:0", b));
    EXPECT_EQ(slurp(a / "table.csv"), slurp(b / "table.csv"));
    EXPECT_EQ(slurp(a / "m8_noise0/loss_history.csv"), slurp(b / "m8_noise0/loss_history.csv"));
    EXPECT_EQ(slurp(a / "m8_noise0/checkpoint.txt"), slurp(b / "m8_noise0/checkpoint.txt"));
}

TEST(RunExperiment, ThreeEntriesInSweepOrder) {
    const auto dir = ganlab::testing::fresh_dir("run_three");
    const auto rec = run_experiment(small_config("32:0, 16:0, 32:0.5", dir));
    const auto lines = lines_of(slurp(dir / "table.csv"));
    ASSERT_EQ(lines.size(), 2u + 12);
    EXPECT_EQ(split_csv(lines[2])[1], "32");
    EXPECT_EQ(split_csv(lines[6])[1], "16");
    EXPECT_EQ(split_csv(lines[10])[2], "0.5");
    for (const auto& rr : rec.regimes)
        for (const auto& r : rr.reports) {
            EXPECT_GE(r.top5, r.top10);
            EXPECT_GE(r.top10, r.avg);
        }
}

TEST(RunExperiment, FailedRegimeLeavesIncompleteRecord) {
    const auto dir = ganlab::testing::fresh_dir("run_crash");
    std::ofstream(dir / "m8_noise0") << "in the way";  // blocks the second regime's directory
    EXPECT_THROW(run_experiment(small_config("32:0, 8:0", dir)), std::runtime_error);
    const auto rec = load_record(dir / "record.json");
    EXPECT_FALSE(rec.complete);
    ASSERT_EQ(rec.regimes.size(), 2u);
    EXPECT_EQ(rec.regimes[0].status, "complete");
    EXPECT_EQ(rec.regimes[1].status, "failed");
    EXPECT_FALSE(rec.regimes[1].error.empty());
    EXPECT_FALSE(fs::exists(dir / "table.csv"));
    EXPECT_TRUE(fs::exists(dir / "m32_noise0/metrics.csv"));
}

TEST(RunExperiment, CheckpointEvaluationReproducesReports) {
    const auto dir = ganlab::testing::fresh_dir("run_eval");
    const auto cfg = small_config("32:0", dir);
    const auto rec = run_experiment(cfg);
    const auto again = evaluate_checkpoint(cfg, dir / rec.regimes[0].checkpoint);
    ASSERT_EQ(again.size(), rec.regimes[0].reports.size());
    for (std::size_t i = 0; i < again.size(); ++i) {
        EXPECT_EQ(again[i].avg, rec.regimes[0].reports[i].avg);
        EXPECT_EQ(again[i].top5, rec.regimes[0].reports[i].top5);
        EXPECT_EQ(again[i].space, rec.regimes[0].reports[i].space);
    }
}

TEST(RunExperiment, PeriodicCheckpoints) {
    const auto dir = ganlab::testing::fresh_dir("run_ckpt");
    auto cfg = small_config("32:0", dir);
    cfg.checkpoint_every = 10;
    run_experiment(cfg);
    EXPECT_TRUE(fs::exists(dir / "m32_noise0/checkpoint_10.txt"));
    EXPECT_TRUE(fs::exists(dir / "m32_noise0/checkpoint_20.txt"));
    const auto c = Checkpoint::load(dir / "m32_noise0/checkpoint_10.txt");
    EXPECT_EQ(c.scalar("iteration"), 10.0);
    EXPECT_TRUE(c.contains("adam_g.step"));
}
