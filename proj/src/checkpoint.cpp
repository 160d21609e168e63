#include "ganlab/checkpoint.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ganlab/error.hpp"

namespace ganlab {

std::string format_number(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw FormatError("cannot format number");
    return std::string(buf, end);
}

void Checkpoint::put(const std::string& key, Tensor<double> value) {
    if (key.empty() || key.find_first_of(" \t\r\n") != std::string::npos)
        throw FormatError("checkpoint key must be non-empty without whitespace: '" + key + "'");
    if (value.empty()) throw FormatError("checkpoint entry '" + key + "' is empty");
    entries_.insert_or_assign(key, std::move(value));
}

const Tensor<double>& Checkpoint::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw FormatError("checkpoint has no entry '" + key + "'");
    return it->second;
}

std::vector<std::string> Checkpoint::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

std::string Checkpoint::serialize() const {
    std::string out = "ganlab-checkpoint\nformat_version " + std::to_string(kFormatVersion) + "\nentries " +
                      std::to_string(entries_.size()) + "\n";
    for (const auto& [key, t] : entries_) {
        out += key + " " + std::to_string(t.rank());
        for (std::size_t e : t.shape()) out += " " + std::to_string(e);
        out += "\n";
        const auto data = t.data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (i) out += ' ';
            out += format_number(data[i]);
        }
        out += "\n";
    }
    return out;
}

namespace {

class Reader {
public:
    explicit Reader(std::string_view text) : text_(text) {}

    std::string_view token() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (start == pos_) throw FormatError("checkpoint truncated");
        return text_.substr(start, pos_ - start);
    }

    template <typename N>
    N number() {
        const auto tok = token();
        N value{};
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc{} || ptr != tok.data() + tok.size())
            throw FormatError("malformed number '" + std::string(tok) + "' in checkpoint");
        return value;
    }

    void expect(std::string_view word) {
        const auto tok = token();
        if (tok != word) throw FormatError("expected '" + std::string(word) + "', found '" + std::string(tok) + "'");
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

Checkpoint Checkpoint::parse(std::string_view text) {
    Reader r(text);
    r.expect("ganlab-checkpoint");
    r.expect("format_version");
    const int version = r.number<int>();
    if (version != kFormatVersion)
        throw FormatError("unsupported checkpoint format_version " + std::to_string(version));
    r.expect("entries");
    const auto count = r.number<std::size_t>();
    Checkpoint ckpt;
    for (std::size_t e = 0; e < count; ++e) {
        const std::string key(r.token());
        const auto rank = r.number<std::size_t>();
        if (rank == 0 || rank > 8) throw FormatError("bad rank for checkpoint entry '" + key + "'");
        Shape shape(rank);
        for (auto& d : shape) d = r.number<std::size_t>();
        std::vector<double> values(shape_numel(shape));
        for (auto& v : values) v = r.number<double>();
        ckpt.put(key, Tensor<double>(std::move(shape), std::move(values)));
    }
    return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << serialize();
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

template <typename T>
void store_params(Checkpoint& ckpt, const std::string& prefix, const ParamStore<T>& params) {
    for (const auto& [id, layer] : params.layers) {
        const std::string base = prefix + "." + id;
        ckpt.put_tensor(base + ".weight", layer.weight);
        ckpt.put_tensor(base + ".bias", layer.bias);
        if (layer.spectral) {
            ckpt.put_tensor(base + ".sn_u", layer.spectral->u);
            ckpt.put_tensor(base + ".sn_v", layer.spectral->v);
            ckpt.put_scalar(base + ".sn_sigma", static_cast<double>(layer.spectral->sigma));
        }
    }
}

template <typename T>
ParamStore<T> load_params(const Checkpoint& ckpt, const std::string& prefix, const NetworkSpec& spec) {
    spec.validate();
    ParamStore<T> params;
    std::size_t dense = 0;
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::Dense) continue;
        const std::string id = layer_id(dense++);
        const std::string base = prefix + "." + id;
        DenseParams<T> p;
        p.weight = ckpt.get_tensor<T>(base + ".weight");
        p.bias = ckpt.get_tensor<T>(base + ".bias");
        if (p.weight.shape() != Shape{l.in_dim, l.out_dim} || p.bias.shape() != Shape{1, l.out_dim})
            throw FormatError("checkpoint layer '" + base + "' does not match the network spec");
        if (l.spectral_norm) {
            SpectralState<T> s;
            s.u = ckpt.get_tensor<T>(base + ".sn_u");
            s.v = ckpt.get_tensor<T>(base + ".sn_v");
            s.sigma = static_cast<T>(ckpt.scalar(base + ".sn_sigma"));
            if (s.u.numel() != l.in_dim || s.v.numel() != l.out_dim)
                throw FormatError("checkpoint spectral state of '" + base + "' has wrong length");
            p.spectral = std::move(s);
        }
        params.layers.emplace(id, std::move(p));
    }
    return params;
}

template void store_params<float>(Checkpoint&, const std::string&, const ParamStore<float>&);
template void store_params<double>(Checkpoint&, const std::string&, const ParamStore<double>&);
template ParamStore<float> load_params<float>(const Checkpoint&, const std::string&, const NetworkSpec&);
template ParamStore<double> load_params<double>(const Checkpoint&, const std::string&, const NetworkSpec&);

}  // namespace ganlab
