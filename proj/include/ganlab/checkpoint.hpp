#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ganlab/network.hpp"
#include "ganlab/tensor.hpp"

namespace ganlab {

// Versioned textual key-value container: key -> shape + row-major values.
// Values are written in shortest round-trip form, so 64-bit (and 32-bit)
// tensors reload bit-exactly.
//
//   ganlab-checkpoint
//   format_version 1
//   entries <count>
//   <key> <rank> <extent>...
//   <value> <value> ...
class Checkpoint {
public:
    static constexpr int kFormatVersion = 1;

    void put(const std::string& key, Tensor<double> value);
    template <typename T>
    void put_tensor(const std::string& key, const Tensor<T>& value) {
        put(key, value.template cast<double>());
    }
    void put_scalar(const std::string& key, double value) { put(key, Tensor<double>::scalar(value)); }

    bool contains(const std::string& key) const { return entries_.count(key) != 0; }
    const Tensor<double>& get(const std::string& key) const;
    template <typename T>
    Tensor<T> get_tensor(const std::string& key) const {
        return get(key).template cast<T>();
    }
    double scalar(const std::string& key) const { return get(key).item(); }
    std::vector<std::string> keys() const;

    std::string serialize() const;
    static Checkpoint parse(std::string_view text);

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;

private:
    std::map<std::string, Tensor<double>> entries_;
};

template <typename T>
void store_params(Checkpoint& ckpt, const std::string& prefix, const ParamStore<T>& params);

// Reads every dense layer that `spec` declares, checking shapes.
template <typename T>
ParamStore<T> load_params(const Checkpoint& ckpt, const std::string& prefix, const NetworkSpec& spec);

std::string format_number(double value);

}  // namespace ganlab
