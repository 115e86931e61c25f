#pragma once

// Core data types: a single L x L spin configuration and an ensemble of
// configurations sharing lattice size and temperature, plus the ISNG binary
// dataset format and CSV conversion.
//
// Binary ensembles store one int8 per spin; real-valued ensembles (block
// averages, tanh flow stages) store doubles. Row-major throughout: site
// (i, j) of config k lives at flat index i*L + j.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "rgml/io_util.hpp"

namespace rgml {

enum class Kind : uint8_t { binary = 0, real = 1 };

enum class Provenance : uint8_t { monte_carlo = 0, rg_step = 1, rbm_flow = 2, layer_output = 3 };

struct SpinConfig {
    int L = 0;
    Kind kind = Kind::binary;
    std::vector<double> values;  // length L*L, row-major

    int n_sites() const { return L * L; }
};

class Ensemble {
  public:
    Ensemble() = default;
    Ensemble(int L, Kind kind, double temperature, uint64_t seed)
        : L_(L), kind_(kind), temperature_(temperature), seed_(seed) {}

    int side() const { return L_; }
    int n_sites() const { return L_ * L_; }
    Kind kind() const { return kind_; }
    double temperature() const { return temperature_; }
    uint64_t seed() const { return seed_; }
    Provenance provenance() const { return prov_; }
    void set_provenance(Provenance p, int step = 0) { prov_ = p; prov_step_ = step; }
    int provenance_step() const { return prov_step_; }

    size_t size() const {
        return kind_ == Kind::binary ? bin_.size() / n_sites() : real_.size() / n_sites();
    }
    bool empty() const { return size() == 0; }

    void reserve(size_t n) {
        if (kind_ == Kind::binary) bin_.reserve(n * n_sites());
        else real_.reserve(n * n_sites());
    }

    void push_binary(const int8_t* s) {
        bin_.insert(bin_.end(), s, s + n_sites());
    }
    void push_real(const double* v) {
        real_.insert(real_.end(), v, v + n_sites());
    }
    void push_config(const SpinConfig& c) {
        if (c.L != L_) throw IoError("config side mismatch");
        if (kind_ == Kind::binary) {
            for (double x : c.values) bin_.push_back(x > 0 ? int8_t(1) : int8_t(-1));
        } else {
            real_.insert(real_.end(), c.values.begin(), c.values.end());
        }
    }

    double at(size_t sample, int site) const {
        return kind_ == Kind::binary
                   ? static_cast<double>(bin_[sample * n_sites() + site])
                   : real_[sample * n_sites() + site];
    }

    const int8_t* binary_row(size_t sample) const { return bin_.data() + sample * n_sites(); }
    int8_t* binary_row(size_t sample) { return bin_.data() + sample * n_sites(); }
    const double* real_row(size_t sample) const { return real_.data() + sample * n_sites(); }

    void copy_config(size_t sample, double* out) const {
        int n = n_sites();
        if (kind_ == Kind::binary) {
            const int8_t* p = bin_.data() + sample * n;
            for (int i = 0; i < n; ++i) out[i] = p[i];
        } else {
            const double* p = real_.data() + sample * n;
            for (int i = 0; i < n; ++i) out[i] = p[i];
        }
    }

    SpinConfig config(size_t sample) const {
        SpinConfig c;
        c.L = L_;
        c.kind = kind_;
        c.values.resize(n_sites());
        copy_config(sample, c.values.data());
        return c;
    }

    // Appends every config of other; sizes and kinds must agree.
    void append(const Ensemble& other) {
        if (other.L_ != L_ || other.kind_ != kind_) throw IoError("ensemble append mismatch");
        bin_.insert(bin_.end(), other.bin_.begin(), other.bin_.end());
        real_.insert(real_.end(), other.real_.begin(), other.real_.end());
    }

  private:
    int L_ = 0;
    Kind kind_ = Kind::binary;
    double temperature_ = 0.0;
    uint64_t seed_ = 0;
    Provenance prov_ = Provenance::monte_carlo;
    int prov_step_ = 0;
    std::vector<int8_t> bin_;
    std::vector<double> real_;
};

// ISNG dataset file.
// Header: magic "ISNG", version u16, L u16, n_samples u32, temperature f64,
// seed u64, kind u8. Payload: binary kind packs 1 bit per spin (+1 -> 1,
// -1 -> 0) row-major, each config padded to a byte boundary; real kind is
// little-endian f64 per site.

inline std::string serialize_isng(const Ensemble& e) {
    std::string out;
    out.append("ISNG");
    put_le<uint16_t>(out, 1);
    put_le<uint16_t>(out, static_cast<uint16_t>(e.side()));
    put_le<uint32_t>(out, static_cast<uint32_t>(e.size()));
    put_le<double>(out, e.temperature());
    put_le<uint64_t>(out, e.seed());
    put_le<uint8_t>(out, static_cast<uint8_t>(e.kind()));
    const int n = e.n_sites();
    if (e.kind() == Kind::binary) {
        const int nbytes = (n + 7) / 8;
        for (size_t s = 0; s < e.size(); ++s) {
            const int8_t* row = e.binary_row(s);
            for (int b = 0; b < nbytes; ++b) {
                uint8_t byte = 0;
                for (int k = 0; k < 8; ++k) {
                    int site = b * 8 + k;
                    if (site < n && row[site] > 0) byte |= uint8_t(1u << k);
                }
                put_le<uint8_t>(out, byte);
            }
        }
    } else {
        for (size_t s = 0; s < e.size(); ++s) {
            const double* row = e.real_row(s);
            for (int i = 0; i < n; ++i) put_le<double>(out, row[i]);
        }
    }
    return out;
}

inline Ensemble deserialize_isng(const std::string& in) {
    size_t pos = 0;
    if (in.size() < 4 || in.compare(0, 4, "ISNG") != 0)
        throw IoError("bad magic: expected ISNG");
    pos = 4;
    uint16_t version = get_le<uint16_t>(in, pos);
    if (version != 1) throw IoError("unsupported ISNG version " + std::to_string(version));
    uint16_t L = get_le<uint16_t>(in, pos);
    uint32_t n_samples = get_le<uint32_t>(in, pos);
    double T = get_le<double>(in, pos);
    uint64_t seed = get_le<uint64_t>(in, pos);
    uint8_t kind = get_le<uint8_t>(in, pos);
    Ensemble e(L, static_cast<Kind>(kind), T, seed);
    e.reserve(n_samples);
    const int n = L * L;
    if (static_cast<Kind>(kind) == Kind::binary) {
        const int nbytes = (n + 7) / 8;
        std::vector<int8_t> row(n);
        for (uint32_t s = 0; s < n_samples; ++s) {
            for (int b = 0; b < nbytes; ++b) {
                uint8_t byte = get_le<uint8_t>(in, pos);
                for (int k = 0; k < 8; ++k) {
                    int site = b * 8 + k;
                    if (site < n) row[site] = (byte >> k) & 1 ? 1 : -1;
                }
            }
            e.push_binary(row.data());
        }
    } else {
        std::vector<double> row(n);
        for (uint32_t s = 0; s < n_samples; ++s) {
            for (int i = 0; i < n; ++i) row[i] = get_le<double>(in, pos);
            e.push_real(row.data());
        }
    }
    return e;
}

inline void save_isng(const Ensemble& e, const std::string& path) {
    atomic_write_file(path, serialize_isng(e));
}

inline Ensemble load_isng(const std::string& path) {
    return deserialize_isng(read_file(path));
}

// CSV: a metadata comment line, then one row per config. Round-trips losslessly
// (fmt_double prints shortest exact representations).
inline std::string ensemble_to_csv(const Ensemble& e) {
    std::string out = "# ISNG L=" + std::to_string(e.side()) +
                      " kind=" + (e.kind() == Kind::binary ? std::string("binary") : std::string("real")) +
                      " T=" + fmt_double(e.temperature()) +
                      " seed=" + std::to_string(e.seed()) + "\n";
    const int n = e.n_sites();
    for (size_t s = 0; s < e.size(); ++s) {
        for (int i = 0; i < n; ++i) {
            if (i) out += ',';
            out += fmt_double(e.at(s, i));
        }
        out += '\n';
    }
    return out;
}

inline Ensemble ensemble_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ISNG", 0) != 0)
        throw IoError("missing ISNG CSV header comment");
    auto grab = [&](const std::string& key) {
        auto p = line.find(key + "=");
        if (p == std::string::npos) throw IoError("CSV header missing " + key);
        auto q = line.find(' ', p);
        return line.substr(p + key.size() + 1, q == std::string::npos ? q : q - p - key.size() - 1);
    };
    int L = std::stoi(grab("L"));
    Kind kind = grab("kind") == "binary" ? Kind::binary : Kind::real;
    double T = std::stod(grab("T"));
    uint64_t seed = std::stoull(grab("seed"));
    Ensemble e(L, kind, T, seed);
    std::vector<double> row;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        row.clear();
        size_t start = 0;
        while (start <= line.size()) {
            size_t comma = line.find(',', start);
            std::string tok = line.substr(start, comma == std::string::npos ? comma : comma - start);
            row.push_back(std::stod(tok));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (static_cast<int>(row.size()) != L * L) throw IoError("CSV row length mismatch");
        SpinConfig c{L, kind, row};
        e.push_config(c);
    }
    return e;
}

}  // namespace rgml
