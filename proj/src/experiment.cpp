#include "ganlab/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ganlab/checkpoint.hpp"
#include "ganlab/error.hpp"

namespace ganlab {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* precision_name(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view text) {
    if (text == "f32") return Precision::F32;
    if (text == "f64") return Precision::F64;
    throw ConfigError("precision must be f32 or f64, got '" + std::string(text) + "'");
}

std::string SweepEntry::label() const { return "m" + std::to_string(m) + "_noise" + format_number(noise_variance); }

TrainConfig ExperimentConfig::train_config_for(const SweepEntry& entry) const {
    TrainConfig tc = train;
    tc.m = entry.m;
    tc.noise_variance = entry.noise_variance;
    return tc;
}

void ExperimentConfig::validate() const {
    if (dataset.kind == DatasetConfig::Kind::Mixture) {
        dataset.mixture.validate();
        if (dataset.n % dataset.mixture.modes != 0)
            throw ConfigError("dataset.n must be divisible by dataset.modes");
    } else if (dataset.image_path.empty()) {
        throw ConfigError("image datasets need dataset.path");
    }
    if (dataset.name.empty() || dataset.name.find_first_of(",\n\r\"") != std::string::npos)
        throw ConfigError("dataset.name must be non-empty and free of commas, quotes and newlines");
    if (sweep.empty()) throw ConfigError("sweep is empty");
    if (train.eval_query_count > train.n || train.eval_query_count > train.k)
        throw ConfigError("eval.query_count exceeds n or k");
    if (!eval.pixel && !eval.feature) throw ConfigError("eval.spaces enables no distance space");
    if (eval.feature_dim < 1) throw ConfigError("eval.feature_dim must be positive");
    std::set<std::string> labels;
    for (const auto& e : sweep) {
        train_config_for(e).validate();
        if (!labels.insert(e.label()).second) throw ConfigError("duplicate sweep entry " + e.label());
    }
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

template <typename N>
N parse_number(std::string_view text) {
    N value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw ConfigError("malformed number '" + std::string(text) + "'");
    return value;
}

bool parse_bool(std::string_view text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("expected true or false, got '" + std::string(text) + "'");
}

std::vector<std::size_t> parse_sizes(std::string_view text) {
    std::vector<std::size_t> out;
    for (const auto& p : split(text, ',')) out.push_back(parse_number<std::size_t>(p));
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::vector<SweepEntry> parse_sweep(std::string_view text) {
    std::vector<SweepEntry> out;
    for (const auto& item : split(text, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) throw ConfigError("sweep entries are m:noise_variance, got '" + item + "'");
        out.push_back({parse_number<std::size_t>(parts[0]), parse_number<double>(parts[1])});
    }
    return out;
}

std::string num(double v) { return format_number(v); }

struct Field {
    const char* key;
    bool semantic;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

using C = ExperimentConfig;

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"dataset.name", true, [](C& c, const std::string& v) { c.dataset.name = v; },
         [](const C& c) { return c.dataset.name; }},
        {"dataset.kind", true,
         [](C& c, const std::string& v) {
             if (v == "ring") {
                 c.dataset.kind = DatasetConfig::Kind::Mixture;
                 c.dataset.mixture.layout = MixtureSpec::Layout::Ring;
             } else if (v == "grid") {
                 c.dataset.kind = DatasetConfig::Kind::Mixture;
                 c.dataset.mixture.layout = MixtureSpec::Layout::Grid;
             } else if (v == "image") {
                 c.dataset.kind = DatasetConfig::Kind::Image;
             } else {
                 throw ConfigError("dataset.kind must be ring, grid or image");
             }
         },
         [](const C& c) {
             if (c.dataset.kind == DatasetConfig::Kind::Image) return std::string("image");
             return std::string(c.dataset.mixture.layout == MixtureSpec::Layout::Ring ? "ring" : "grid");
         }},
        {"dataset.modes", true, [](C& c, const std::string& v) { c.dataset.mixture.modes = parse_number<std::size_t>(v); },
         [](const C& c) { return std::to_string(c.dataset.mixture.modes); }},
        {"dataset.radius", true, [](C& c, const std::string& v) { c.dataset.mixture.radius = parse_number<double>(v); },
         [](const C& c) { return num(c.dataset.mixture.radius); }},
        {"dataset.std", true, [](C& c, const std::string& v) { c.dataset.mixture.stddev = parse_number<double>(v); },
         [](const C& c) { return num(c.dataset.mixture.stddev); }},
        {"dataset.n", true, [](C& c, const std::string& v) { c.dataset.n = parse_number<std::size_t>(v); },
         [](const C& c) { return std::to_string(c.dataset.n); }},
        {"dataset.path", true, [](C& c, const std::string& v) { c.dataset.image_path = v; },
         [](const C& c) { return c.dataset.image_path.string(); }},
        {"dataset.seed", true, [](C& c, const std::string& v) { c.train.seed_data = parse_number<std::uint64_t>(v); },
         [](const C& c) { return std::to_string(c.train.seed_data); }},
        {"latent.k", true, [](C& c, const std::string& v) { c.train.k = parse_number<std::size_t>(v); },
         [](const C& c) { return std::to_string(c.train.k); }},
        {"latent.dim", true, [](C& c, const std::string& v) { c.train.latent_dim = parse_number<std::size_t>(v); },
         [](const C& c) { return std::to_string(c.train.latent_dim); }},
        {"latent.seed", true, [](C& c, const std::string& v) { c.train.seed_latent = parse_number<std::uint64_t>(v); },
         [](const C& c) { return std::to_string(c.train.seed_latent); }},
        {"train.m", true, [](C& c, const std::string& v) { c.train.m = parse_number<std::size_t>(v); },
         [](const C& c) { return std::to_string(c.train.m); }},
        {"train.noise_variance", true,
         [](C& c, const std::string& v) { c.train.noise_variance = parse_number<double>(v); },
         [](const C& c) { return num(c.train.noise_variance); }},
        {"train.lr", true, [](C& c, const std::string& v) { c.train.adam.lr = parse_number<double>(v); },
         [](const C& c) { return num(c.train.adam.lr); }},
        {"train.beta1", true, [](C& c, const std::string& v) { c.train.adam.beta1 = parse_number<double>(v); },
         [](const C& c) { return num(c.train.adam.beta1); }},
        {"train.beta2", true, [](C& c, const std::string& v) { c.train.adam.beta2 = parse_number<double>(v); },
         [](const C& c) { return num(c.train.adam.beta2); }},
        {"train.adam_eps", true, [](C& c, const std::string& v) { c.train.adam.eps = parse_number<double>(v); },
         [](const C& c) { return num(c.train.adam.eps); }},
        {"train.ema_decay", true, [](C& c, const std::string& v) { c.train.ema_decay = parse_number<double>(v); },
         [](const C& c) { return num(c.train.ema_decay); }},
        {"train.max_iters", true, [](C& c, const std::string& v) { c.train.max_iters = parse_number<std::size_t>(v); },
         [](const C& c) { return std::to_string(c.train.max_iters); }},
        {"train.convergence_window", true,
         [](C& c, const std::string& v) { c.train.convergence_window = parse_number<std::size_t>(v); },
         [](const C& c) { return std::to_string(c.train.convergence_window); }},
        {"train.convergence_tol", true,
         [](C& c, const std::string& v) { c.train.convergence_tol = parse_number<double>(v); },
         [](const C& c) { return num(c.train.convergence_tol); }},
        {"train.seed", true, [](C& c, const std::string& v) { c.train.seed_train = parse_number<std::uint64_t>(v); },
         [](const C& c) { return std::to_string(c.train.seed_train); }},
        {"train.force_mixed_regimes", true,
         [](C& c, const std::string& v) { c.train.force_mixed_regimes = parse_bool(v); },
         [](const C& c) { return std::string(c.train.force_mixed_regimes ? "true" : "false"); }},
        {"train.g_hidden", true, [](C& c, const std::string& v) { c.train.g_hidden = parse_sizes(v); },
         [](const C& c) { return join_sizes(c.train.g_hidden); }},
        {"train.d_hidden", true, [](C& c, const std::string& v) { c.train.d_hidden = parse_sizes(v); },
         [](const C& c) { return join_sizes(c.train.d_hidden); }},
        {"train.checkpoint_every", true,
         [](C& c, const std::string& v) { c.checkpoint_every = parse_number<std::size_t>(v); },
         [](const C& c) { return std::to_string(c.checkpoint_every); }},
        {"sweep", true, [](C& c, const std::string& v) { c.sweep = parse_sweep(v); },
         [](const C& c) {
             std::string s;
             for (std::size_t i = 0; i < c.sweep.size(); ++i)
                 s += (i ? "," : "") + std::to_string(c.sweep[i].m) + ":" + num(c.sweep[i].noise_variance);
             return s;
         }},
        {"eval.query_count", true,
         [](C& c, const std::string& v) { c.train.eval_query_count = parse_number<std::size_t>(v); },
         [](const C& c) { return std::to_string(c.train.eval_query_count); }},
        {"eval.seed", true, [](C& c, const std::string& v) { c.train.seed_eval = parse_number<std::uint64_t>(v); },
         [](const C& c) { return std::to_string(c.train.seed_eval); }},
        {"eval.embedder_seed", true,
         [](C& c, const std::string& v) { c.eval.embedder_seed = parse_number<std::uint64_t>(v); },
         [](const C& c) { return std::to_string(c.eval.embedder_seed); }},
        {"eval.feature_dim", true,
         [](C& c, const std::string& v) { c.eval.feature_dim = parse_number<std::size_t>(v); },
         [](const C& c) { return std::to_string(c.eval.feature_dim); }},
        {"eval.spaces", true,
         [](C& c, const std::string& v) {
             c.eval.pixel = c.eval.feature = false;
             for (const auto& s : split(v, ',')) {
                 if (s == "pixel")
                     c.eval.pixel = true;
                 else if (s == "feature")
                     c.eval.feature = true;
                 else
                     throw ConfigError("eval.spaces accepts pixel and feature, got '" + s + "'");
             }
         },
         [](const C& c) {
             std::string s = c.eval.pixel ? "pixel" : "";
             if (c.eval.feature) s += s.empty() ? "feature" : ",feature";
             return s;
         }},
        {"eval.grid_samples", true,
         [](C& c, const std::string& v) { c.eval.grid_samples = parse_number<std::size_t>(v); },
         [](const C& c) { return std::to_string(c.eval.grid_samples); }},
        {"run.precision", true, [](C& c, const std::string& v) { c.precision = parse_precision(v); },
         [](const C& c) { return std::string(precision_name(c.precision)); }},
        {"output.dir", false, [](C& c, const std::string& v) { c.output_dir = v; },
         [](const C& c) { return c.output_dir.string(); }},
    };
    return table;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    std::map<std::string, const Field*> by_key;
    for (const auto& f : fields()) by_key.emplace(f.key, &f);

    std::set<std::string> seen;
    bool has_version = false;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(std::string_view(raw).substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " + key);
        if (key == "format_version") {
            if (parse_number<int>(value) != kConfigFormatVersion)
                throw ConfigError("unsupported config format_version " + value);
            has_version = true;
            continue;
        }
        auto it = by_key.find(key);
        if (it == by_key.end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        try {
            it->second->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + " (" + key + "): " + e.what());
        }
    }
    if (!has_version) throw ConfigError("config must declare format_version = " + std::to_string(kConfigFormatVersion));
    cfg.train.n = cfg.dataset.n;
    if (cfg.sweep.empty()) cfg.sweep.push_back({cfg.train.m, cfg.train.noise_variance});
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string canonical_config(const ExperimentConfig& config) {
    std::string out = "format_version = " + std::to_string(kConfigFormatVersion) + "\n";
    for (const auto& f : fields())
        if (f.semantic) out += std::string(f.key) + " = " + f.get(config) + "\n";
    return out;
}

std::string config_hash(const ExperimentConfig& config) { return git_blob_sha1(canonical_config(config)); }

std::string git_blob_sha1(std::string_view body) {
    std::string blob = "blob " + std::to_string(body.size());
    blob.push_back('\0');
    blob += body;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1)
        throw std::runtime_error("SHA-1 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

// ---- records ---------------------------------------------------------------

namespace {

json report_to_json(const MetricsReport& r) {
    return {{"direction", direction_name(r.direction)},
            {"space", r.space},
            {"avg", r.avg},
            {"top10", r.top10},
            {"top5", r.top5},
            {"query_count", r.query_count},
            {"seed_eval", r.seed_eval}};
}

MetricsReport report_from_json(const json& j) {
    MetricsReport r;
    const auto dir = j.at("direction").get<std::string>();
    if (dir == "overfitting")
        r.direction = Direction::Overfitting;
    else if (dir == "mode_drop")
        r.direction = Direction::ModeDrop;
    else
        throw FormatError("unknown direction '" + dir + "' in record");
    r.space = j.at("space").get<std::string>();
    r.avg = j.at("avg").get<double>();
    r.top10 = j.at("top10").get<double>();
    r.top5 = j.at("top5").get<double>();
    r.query_count = j.at("query_count").get<std::size_t>();
    r.seed_eval = j.at("seed_eval").get<std::uint64_t>();
    return r;
}

}  // namespace

void save_record(const RunRecord& record, const fs::path& path) {
    json regimes = json::array();
    for (const auto& rr : record.regimes) {
        json reports = json::array();
        for (const auto& r : rr.reports) reports.push_back(report_to_json(r));
        regimes.push_back({{"m", rr.entry.m},
                           {"noise_variance", rr.entry.noise_variance},
                           {"status", rr.status},
                           {"error", rr.error},
                           {"iterations", rr.iterations},
                           {"converged", rr.converged},
                           {"reports", reports},
                           {"loss_history", rr.loss_history},
                           {"checkpoint", rr.checkpoint},
                           {"grid", rr.grid},
                           {"seconds", rr.seconds}});
    }
    const json j = {{"format_version", record.format_version},
                    {"dataset", record.dataset},
                    {"config_hash", record.config_hash},
                    {"config", record.config_text},
                    {"precision", record.precision},
                    {"complete", record.complete},
                    {"table", record.table},
                    {"wall_seconds", record.wall_seconds},
                    {"regimes", regimes}};
    // Write-then-rename so a crash never leaves a truncated record.
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write run record " + tmp.string());
        out << j.dump(2) << "\n";
        if (!out) throw IoError("failed writing run record " + tmp.string());
    }
    fs::rename(tmp, path);
}

RunRecord load_record(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read run record " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("malformed run record " + path.string() + ": " + e.what());
    }
    RunRecord rec;
    rec.format_version = j.at("format_version").get<int>();
    if (rec.format_version != 1) throw FormatError("unsupported run record format_version");
    rec.dataset = j.at("dataset").get<std::string>();
    rec.config_hash = j.at("config_hash").get<std::string>();
    rec.config_text = j.at("config").get<std::string>();
    rec.precision = j.at("precision").get<std::string>();
    rec.complete = j.at("complete").get<bool>();
    rec.table = j.at("table").get<std::string>();
    rec.wall_seconds = j.at("wall_seconds").get<double>();
    for (const auto& r : j.at("regimes")) {
        RegimeRecord rr;
        rr.entry = {r.at("m").get<std::size_t>(), r.at("noise_variance").get<double>()};
        rr.status = r.at("status").get<std::string>();
        rr.error = r.at("error").get<std::string>();
        rr.iterations = r.at("iterations").get<std::uint64_t>();
        rr.converged = r.at("converged").get<bool>();
        for (const auto& rep : r.at("reports")) rr.reports.push_back(report_from_json(rep));
        rr.loss_history = r.at("loss_history").get<std::string>();
        rr.checkpoint = r.at("checkpoint").get<std::string>();
        rr.grid = r.at("grid").get<std::string>();
        rr.seconds = r.at("seconds").get<double>();
        rec.regimes.push_back(std::move(rr));
    }
    return rec;
}

// ---- running -----------------------------------------------------------------

SampleSet build_dataset(const DatasetConfig& config, std::uint64_t seed) {
    if (config.kind == DatasetConfig::Kind::Image) return load_image_dataset(config.image_path, config.n);
    return make_gaussian_ring(config.mixture, config.n, seed);
}

std::vector<MetricsReport> evaluate_generator(const Generator& generator, const LatentSet& latents,
                                              const SampleSet& data, const FeatureEmbedder& embedder,
                                              const EvalSettings& eval, std::size_t query_count,
                                              std::uint64_t seed_eval) {
    std::vector<DistanceSpace> spaces;
    if (eval.pixel) spaces.push_back(DistanceSpace::pixel(data.domain()));
    if (eval.feature) spaces.push_back(DistanceSpace::feature(embedder, data.domain()));
    std::vector<MetricsReport> reports;
    for (const auto& s : spaces)
        reports.push_back(overfitting_metric(generator, latents, data, s, query_count, seed_eval));
    for (const auto& s : spaces)
        reports.push_back(mode_drop_metric(generator, latents, data, s, query_count, seed_eval));
    return reports;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <typename T>
void train_into(const ExperimentConfig& config, const TrainConfig& tc, const SampleSet& data,
                const LatentSet& latents, const fs::path& run_dir, const fs::path& rel, bool evaluate,
                RegimeRecord& rec) {
    const fs::path dir = run_dir / rel;
    GanTrainer<T> trainer(tc, data, latents);
    const std::size_t every = config.checkpoint_every;
    auto observer = [&](const GanTrainer<T>& t) {
        if (every > 0 && t.state().iteration % every == 0)
            t.save_checkpoint(dir / ("checkpoint_" + std::to_string(t.state().iteration) + ".txt"));
    };
    const TrainResult<T> result = trainer.run(observer);
    rec.iterations = result.iterations;
    rec.converged = result.converged;

    write_loss_history(dir / "loss_history.csv", result.history);
    rec.loss_history = (rel / "loss_history.csv").generic_string();
    trainer.save_checkpoint(dir / "checkpoint.txt");
    rec.checkpoint = (rel / "checkpoint.txt").generic_string();

    const Generator generator = trainer.ema_generator();
    const bool image = data.domain().is_image();
    const std::size_t shown = image ? std::min(config.eval.grid_samples, latents.size()) : latents.size();
    std::vector<std::size_t> first(shown);
    for (std::size_t i = 0; i < shown; ++i) first[i] = i;
    const fs::path grid = rel / (image ? "grid.ppm" : "scatter.svg");
    emit_grid(data, generator(latents.latents().gather_rows(first)), run_dir / grid);
    rec.grid = grid.generic_string();

    if (evaluate) {
        const FeatureEmbedder embedder(data.dim(), config.eval.embedder_seed, config.eval.feature_dim);
        rec.reports = evaluate_generator(generator, latents, data, embedder, config.eval, tc.eval_query_count,
                                         tc.seed_eval);
    }
}

}  // namespace

RegimeRecord run_regime(const ExperimentConfig& config, const SweepEntry& entry, const SampleSet& data,
                        const LatentSet& latents, const fs::path& run_dir, bool evaluate) {
    RegimeRecord rec;
    rec.entry = entry;
    const auto start = std::chrono::steady_clock::now();
    const fs::path rel = entry.label();
    try {
        fs::create_directories(run_dir / rel);
        const TrainConfig tc = config.train_config_for(entry);
        if (config.precision == Precision::F64)
            train_into<double>(config, tc, data, latents, run_dir, rel, evaluate, rec);
        else
            train_into<float>(config, tc, data, latents, run_dir, rel, evaluate, rec);
        rec.status = "complete";
    } catch (const std::exception& e) {
        rec.status = "failed";
        rec.error = e.what();
    }
    rec.seconds = seconds_since(start);
    return rec;
}

RunRecord run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir = config.output_dir;
    fs::create_directories(dir);

    RunRecord record;
    record.dataset = config.dataset.name;
    record.config_hash = config_hash(config);
    record.config_text = canonical_config(config);
    record.precision = precision_name(config.precision);
    const fs::path record_path = dir / "record.json";
    save_record(record, record_path);

    const SampleSet data = build_dataset(config.dataset, config.train.seed_data);
    const LatentSet latents = make_fixed_latents(config.train.k, config.train.latent_dim, config.train.seed_latent);

    for (const auto& entry : config.sweep) {
        RegimeRecord rr = run_regime(config, entry, data, latents, dir, true);
        const bool failed = rr.status != "complete";
        const std::string error = rr.error;
        if (!failed) {
            RunRecord single = record;
            single.regimes = {rr};
            emit_table({single}, dir / entry.label() / "metrics.csv");
        }
        record.regimes.push_back(std::move(rr));
        record.wall_seconds = seconds_since(start);
        save_record(record, record_path);
        if (failed) throw std::runtime_error("regime " + entry.label() + " failed: " + error);
    }

    emit_table({record}, dir / "table.csv");
    record.table = "table.csv";
    record.complete = true;
    record.wall_seconds = seconds_since(start);
    save_record(record, record_path);
    return record;
}

std::vector<MetricsReport> evaluate_checkpoint(const ExperimentConfig& config, const fs::path& checkpoint) {
    const SampleSet data = build_dataset(config.dataset, config.train.seed_data);
    const LatentSet latents = make_fixed_latents(config.train.k, config.train.latent_dim, config.train.seed_latent);
    const OutputHead head = data.domain().is_image() ? OutputHead::Tanh : OutputHead::Identity;
    const NetworkSpec spec = generator_spec(config.train.latent_dim, data.dim(), head, config.train.g_hidden);
    const Checkpoint ckpt = Checkpoint::load(checkpoint);
    const ParamStore<double> params = load_params<double>(ckpt, "ema", spec);
    const Generator generator = [&](const Tensor<double>& z) { return generator_forward(params, spec, z); };
    const FeatureEmbedder embedder(data.dim(), config.eval.embedder_seed, config.eval.feature_dim);
    return evaluate_generator(generator, latents, data, embedder, config.eval, config.train.eval_query_count,
                              config.train.seed_eval);
}

// ---- grids and tables -----------------------------------------------------------

std::pair<std::size_t, std::size_t> grid_layout(std::size_t count) {
    if (count == 0) throw std::invalid_argument("grid of zero samples");
    auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
    while (cols * cols < count) ++cols;
    while (cols > 1 && (cols - 1) * (cols - 1) >= count) --cols;
    const std::size_t rows = (count + cols - 1) / cols;
    return {rows, cols};
}

void emit_image_grid(const Tensor<double>& samples, ImageGeometry g, const fs::path& path) {
    if (g.channels != 1 && g.channels != 3) throw std::invalid_argument("grids support 1 or 3 channels");
    if (samples.rank() != 2 || samples.cols() != g.dim()) throw ShapeError("samples do not match image geometry");
    const auto [rows, cols] = grid_layout(samples.rows());
    const std::size_t width = cols * g.width, height = rows * g.height;
    std::vector<unsigned char> raster(width * height * g.channels, 0);
    for (std::size_t s = 0; s < samples.rows(); ++s) {
        const std::size_t tr = s / cols, tc = s % cols;
        const auto src = samples.row(s);
        for (std::size_t y = 0; y < g.height; ++y)
            for (std::size_t x = 0; x < g.width; ++x)
                for (std::size_t c = 0; c < g.channels; ++c) {
                    const std::size_t dst = ((tr * g.height + y) * width + tc * g.width + x) * g.channels + c;
                    raster[dst] = quantize_pixel(src[(y * g.width + x) * g.channels + c]);
                }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write grid " + path.string());
    out << (g.channels == 3 ? "P6" : "P5") << "\n# ganlab-grid format_version 1\n"
        << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (!out) throw IoError("failed writing grid " + path.string());
}

void emit_scatter(const Tensor<double>& data, const Tensor<double>& generated, const fs::path& path) {
    if (data.cols() != 2 || generated.cols() != 2) throw ShapeError("scatter plots need planar (n, 2) samples");
    double lo_x = data(0, 0), hi_x = lo_x, lo_y = data(0, 1), hi_y = lo_y;
    for (const Tensor<double>* t : {&data, &generated})
        for (std::size_t i = 0; i < t->rows(); ++i) {
            lo_x = std::min(lo_x, (*t)(i, 0));
            hi_x = std::max(hi_x, (*t)(i, 0));
            lo_y = std::min(lo_y, (*t)(i, 1));
            hi_y = std::max(hi_y, (*t)(i, 1));
        }
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9}) * 1.1;
    const double cx = (lo_x + hi_x) / 2, cy = (lo_y + hi_y) / 2;
    constexpr double kSize = 480.0;
    auto px = [&](double x) { return (x - cx) / span * kSize + kSize / 2; };
    auto py = [&](double y) { return kSize / 2 - (y - cy) / span * kSize; };

    std::ofstream out(path);
    if (!out) throw IoError("cannot write scatter " + path.string());
    char buf[128];
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<!-- ganlab-scatter format_version 1 -->\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" viewBox=\"0 0 480 480\">\n"
        << "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n";
    auto points = [&](const Tensor<double>& t, const char* cls, const char* color) {
        out << "<g class=\"" << cls << "\" fill=\"" << color << "\" fill-opacity=\"0.6\">\n";
        for (std::size_t i = 0; i < t.rows(); ++i) {
            std::snprintf(buf, sizeof buf, "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"2\"/>\n", px(t(i, 0)), py(t(i, 1)));
            out << buf;
        }
        out << "</g>\n";
    };
    points(data, "data", "#1f77b4");
    points(generated, "generated", "#d62728");
    out << "</svg>\n";
    if (!out) throw IoError("failed writing scatter " + path.string());
}

void emit_grid(const SampleSet& data, const Tensor<double>& generated, const fs::path& path) {
    if (data.domain().is_image())
        emit_image_grid(generated, data.domain().image, path);
    else
        emit_scatter(data.samples(), generated, path);
}

std::vector<std::string> table_columns() {
    return {"dataset", "m", "noise", "direction", "space", "avg", "top10", "top5", "query_count", "seed_eval"};
}

void emit_table(const std::vector<RunRecord>& records, const fs::path& path) {
    std::ostringstream body;
    std::size_t rows = 0;
    char buf[64];
    for (const auto& rec : records)
        for (const auto& rr : rec.regimes)
            for (const auto& r : rr.reports) {
                body << rec.dataset << ',' << rr.entry.m << ',' << format_number(rr.entry.noise_variance) << ','
                     << direction_name(r.direction) << ',' << '"' << r.space << '"';
                for (double v : {r.avg, r.top10, r.top5}) {
                    std::snprintf(buf, sizeof buf, ",%.17g", v);
                    body << buf;
                }
                body << ',' << r.query_count << ',' << r.seed_eval << '\n';
                ++rows;
            }
    if (rows == 0) throw std::invalid_argument("emit_table: no metric rows to write");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write table " + path.string());
    out << "# format_version: " << kTableFormatVersion << "\n";
    const auto cols = table_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << "\n" << body.str();
    if (!out) throw IoError("failed writing table " + path.string());
}

}  // namespace ganlab
