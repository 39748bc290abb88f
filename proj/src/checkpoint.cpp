#include "cavsense/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cavsense/errors.hpp"

namespace cavsense {

namespace {

constexpr std::string_view kMagic = "CAVSNN01";
constexpr double kProbeTolerance = 1e-12;
// Sanity cap on any stored count so a corrupt length cannot trigger a huge
// allocation before the checksum is reached.
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u64(s.size());
        out_.append(s);
    }
    void doubles(std::span<const double> v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    std::string& bytes() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<unsigned char>(in_[pos_ + i])} << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t count() {
        const std::uint64_t n = u64();
        if (n > kMaxCount) throw format_error("checkpoint: implausible length " + std::to_string(n));
        return static_cast<std::size_t>(n);
    }
    std::string str() {
        const std::size_t n = count();
        need(n);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    void doubles_into(std::span<double> dst, std::string_view what) {
        const std::size_t n = count();
        if (n != dst.size()) {
            throw format_error("checkpoint: " + std::string(what) + " has " + std::to_string(n) + " values, expected " +
                               std::to_string(dst.size()));
        }
        for (double& x : dst) x = f64();
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw format_error("checkpoint: truncated");
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

void write_arch(Writer& w, const Architecture& a) {
    for (std::size_t v : {a.input_channels, a.input_length, a.conv1_channels, a.conv1_kernel, a.conv2_channels,
                          a.conv2_kernel, a.stride, a.pool, a.fc_hidden}) {
        w.u64(v);
    }
}

Architecture read_arch(Reader& r) {
    Architecture a;
    for (std::size_t* v : {&a.input_channels, &a.input_length, &a.conv1_channels, &a.conv1_kernel, &a.conv2_channels,
                           &a.conv2_kernel, &a.stride, &a.pool, &a.fc_hidden}) {
        *v = r.count();
    }
    try {
        a.validate();
    } catch (const shape_error& e) {
        throw format_error(std::string("checkpoint: invalid architecture: ") + e.what());
    }
    return a;
}

}  // namespace

Checkpoint make_checkpoint(const ModelParams& params, std::uint64_t seed, const FrequencyGrid& grid,
                           const FeatureTensor& probe) {
    Checkpoint c{params, seed, grid, probe, 0.0};
    c.probe_prediction = predict(probe, params);
    return c;
}

std::string serialize_checkpoint(const Checkpoint& c) {
    Writer w;
    w.bytes().append(kMagic);
    write_arch(w, c.params.arch);
    w.u64(c.seed);
    w.u64(c.grid.n_points);
    w.f64(c.grid.fmin);
    w.f64(c.grid.fmax);
    const auto blocks = c.params.blocks();
    w.u64(blocks.size());
    for (const auto& b : blocks) {
        w.str(b.name);
        w.doubles(b.values);
    }
    w.u64(c.probe_input.length);
    w.doubles(c.probe_input.values);
    w.f64(c.probe_prediction);
    w.u64(fnv1a(w.bytes()));
    return std::move(w.bytes());
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
        throw format_error("not a checkpoint file (bad magic)");
    }
    const std::string_view body = bytes.substr(0, bytes.size() - 8);
    Reader tail(bytes.substr(bytes.size() - 8));
    if (tail.u64() != fnv1a(body)) throw format_error("checkpoint: checksum mismatch");

    Reader r(body.substr(kMagic.size()));
    Checkpoint c;
    c.params = ModelParams(read_arch(r));
    c.seed = r.u64();
    c.grid.n_points = r.count();
    c.grid.fmin = r.f64();
    c.grid.fmax = r.f64();
    if (c.grid.n_points != c.params.arch.input_length || !(c.grid.fmin > 0.0) || !(c.grid.fmax > c.grid.fmin)) {
        throw format_error("checkpoint: invalid frequency grid");
    }
    auto blocks = c.params.blocks();
    if (r.count() != blocks.size()) throw format_error("checkpoint: wrong number of parameter blocks");
    for (auto& b : blocks) {
        const std::string name = r.str();
        if (name != b.name) throw format_error("checkpoint: expected block " + std::string(b.name) + ", found " + name);
        r.doubles_into(b.values, b.name);
    }
    c.probe_input.length = r.count();
    c.probe_input.values.resize(c.params.arch.input_channels * c.probe_input.length);
    r.doubles_into(c.probe_input.values, "probe input");
    c.probe_prediction = r.f64();
    if (r.pos() != body.size() - kMagic.size()) throw format_error("checkpoint: trailing bytes");

    double got = 0.0;
    try {
        got = predict(c.probe_input, c.params);
    } catch (const error& e) {
        throw format_error(std::string("checkpoint: probe input unusable: ") + e.what());
    }
    if (!(std::abs(got - c.probe_prediction) <= kProbeTolerance)) {
        throw format_error("checkpoint: probe prediction not reproduced");
    }
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    const std::string bytes = serialize_checkpoint(c);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str());
}

}  // namespace cavsense
