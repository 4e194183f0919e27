#include "levybsde/io.hpp"

#include "levybsde/errors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace levybsde {

namespace {

constexpr char kMagic[4] = {'L', 'B', 'S', 'D'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kTagBundle = 1;
constexpr std::uint32_t kTagField = 2;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw QuadratureFailure("cannot open '" + path + "' for writing");
    }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void f64s(const std::vector<double>& v) {
        u64(v.size());
        if (!v.empty()) raw(v.data(), v.size() * 8);
    }
    void i32s(const std::vector<int>& v) {
        u64(v.size());
        if (!v.empty()) raw(v.data(), v.size() * 4);
    }
    void u64s(const std::vector<std::size_t>& v) {
        u64(v.size());
        for (std::size_t x : v) u64(x);
    }

private:
    void raw(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw QuadratureFailure("cannot open '" + path + "' for reading");
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::int32_t i32() {
        std::int32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    double f64() {
        double v;
        raw(&v, 8);
        return v;
    }
    std::vector<double> f64s() {
        auto n = u64();
        std::vector<double> v(n);
        if (n) raw(v.data(), n * 8);
        return v;
    }
    std::vector<int> i32s() {
        auto n = u64();
        std::vector<int> v(n);
        if (n) raw(v.data(), n * 4);
        return v;
    }
    std::vector<std::size_t> u64s() {
        auto n = u64();
        std::vector<std::size_t> v(n);
        for (auto& x : v) x = u64();
        return v;
    }

private:
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw QuadratureFailure("truncated container file");
    }
    std::ifstream in_;
};

} // namespace

void write_bundle(const std::string& path, const PathBundle& b) {
    Writer w(path);
    w.u32(0x4453424cu); // "LBSD" little-endian
    w.u32(kVersion);
    w.u32(kTagBundle);
    w.f64(b.grid.t0);
    w.f64(b.grid.horizon);
    w.i32(b.grid.n_steps);
    w.i32(b.n_paths);
    w.i32(b.state_dim);
    w.i32(b.brownian_dim);
    w.i32(b.mark_dim);
    w.i32(b.truncation_k);
    w.u64(b.seed);
    w.f64s(b.states);
    w.f64s(b.left_limits);
    w.f64s(b.brownian);
    w.u64s(b.jump_offsets);
    w.f64s(b.jump_times);
    w.i32s(b.jump_steps);
    w.f64s(b.jump_marks);
    w.f64s(b.jump_pre_states);
    w.f64s(b.jump_post_states);
}

PathBundle read_bundle(const std::string& path) {
    Reader r(path);
    if (r.u32() != 0x4453424cu) throw QuadratureFailure("bad container magic");
    if (r.u32() != kVersion) throw QuadratureFailure("unsupported container version");
    if (r.u32() != kTagBundle) throw QuadratureFailure("container does not hold a path bundle");
    PathBundle b;
    double t0 = r.f64();
    double horizon = r.f64();
    int n_steps = r.i32();
    b.grid = TimeGrid{t0, horizon, n_steps};
    b.n_paths = r.i32();
    b.state_dim = r.i32();
    b.brownian_dim = r.i32();
    b.mark_dim = r.i32();
    b.truncation_k = r.i32();
    b.seed = r.u64();
    b.states = r.f64s();
    b.left_limits = r.f64s();
    b.brownian = r.f64s();
    b.jump_offsets = r.u64s();
    b.jump_times = r.f64s();
    b.jump_steps = r.i32s();
    b.jump_marks = r.f64s();
    b.jump_pre_states = r.f64s();
    b.jump_post_states = r.f64s();
    return b;
}

void write_field(const std::string& path, const ValueField& f) {
    Writer w(path);
    w.u32(0x4453424cu);
    w.u32(kVersion);
    w.u32(kTagField);
    w.i32(f.components());
    w.i32(f.state_dim());
    w.f64s(f.t_nodes());
    for (const auto& a : f.axes()) {
        w.f64(a.lo);
        w.f64(a.hi);
        w.i32(a.n);
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(f.components()) * f.t_nodes().size() * f.x_count());
    for (int c = 0; c < f.components(); ++c)
        for (std::size_t ti = 0; ti < f.t_nodes().size(); ++ti)
            for (std::size_t xi = 0; xi < f.x_count(); ++xi)
                values.push_back(f.value_at(c, static_cast<int>(ti), xi));
    w.f64s(values);
    for (int c = 0; c < f.components(); ++c) {
        w.f64(f.envelope(c).c);
        w.f64(f.envelope(c).p);
    }
}

ValueField read_field(const std::string& path) {
    Reader r(path);
    if (r.u32() != 0x4453424cu) throw QuadratureFailure("bad container magic");
    if (r.u32() != kVersion) throw QuadratureFailure("unsupported container version");
    if (r.u32() != kTagField) throw QuadratureFailure("container does not hold a value field");
    int components = r.i32();
    int state_dim = r.i32();
    auto t_nodes = r.f64s();
    std::vector<ValueField::Axis> axes;
    for (int d = 0; d < state_dim; ++d) {
        double lo = r.f64();
        double hi = r.f64();
        int n = r.i32();
        axes.push_back({lo, hi, n});
    }
    ValueField f(components, std::move(t_nodes), std::move(axes));
    auto values = r.f64s();
    std::size_t idx = 0;
    for (int c = 0; c < components; ++c)
        for (std::size_t ti = 0; ti < f.t_nodes().size(); ++ti)
            for (std::size_t xi = 0; xi < f.x_count(); ++xi)
                f.value_at(c, static_cast<int>(ti), xi) = values[idx++];
    for (int c = 0; c < components; ++c) {
        GrowthEnvelope env;
        env.c = r.f64();
        env.p = r.f64();
        f.set_envelope(c, env);
    }
    return f;
}

std::uint64_t content_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace levybsde
