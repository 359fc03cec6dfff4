#include "msct/stack_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace msct {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'C', 'T', 'S', 'T', 'K', '1'};

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    put_bytes(os, b, 8);
}

void get_bytes(std::istream& is, void* p, std::size_t n, const std::string& path) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) throw DataError("truncated stack file: " + path);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    get_bytes(is, b, 4, path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    get_bytes(is, b, 8, path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        os << v[i];
    }
    return os.str();
}

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

void write_header(std::ostream& os, StackDType dtype, const std::vector<std::uint64_t>& dims) {
    put_bytes(os, kMagic, 8);
    put_u32(os, 1u);
    std::uint8_t dt = static_cast<std::uint8_t>(dtype);
    std::uint8_t nd = static_cast<std::uint8_t>(dims.size());
    put_bytes(os, &dt, 1);
    put_bytes(os, &nd, 1);
    for (std::uint64_t d : dims) put_u64(os, d);
}

void read_header(std::istream& is, const std::string& path, StackDType& dtype, std::vector<std::uint64_t>& dims) {
    char magic[8];
    get_bytes(is, magic, 8, path);
    if (std::memcmp(magic, kMagic, 8) != 0) throw DataError("bad magic in stack file: " + path);
    std::uint32_t version = get_u32(is, path);
    if (version != 1u) throw DataError("unsupported stack version " + std::to_string(version) + ": " + path);
    std::uint8_t dt = 0, nd = 0;
    get_bytes(is, &dt, 1, path);
    get_bytes(is, &nd, 1, path);
    if (dt > 1) throw DataError("unknown dtype in stack file: " + path);
    if (nd < 1 || nd > 3) throw DataError("unsupported ndim in stack file: " + path);
    dtype = static_cast<StackDType>(dt);
    dims.resize(nd);
    for (auto& d : dims) d = get_u64(is, path);
}

}  // namespace

void SinogramStack::allocate() {
    if (dtype == StackDType::f32) {
        f32.assign(size(), 0.0f);
        u16.clear();
    } else {
        u16.assign(size(), 0);
        f32.clear();
    }
}

void SinogramStack::validate() const {
    if (width <= 0 || n_rows <= 0 || n_angles <= 0) throw DataError("stack has empty dimensions");
    std::size_t n = size();
    if (dtype == StackDType::f32 ? f32.size() != n : u16.size() != n)
        throw DataError("stack payload size does not match dimensions");
    auto check_rows = [&](const std::vector<double>& v, const char* what) {
        if (!v.empty() && v.size() != static_cast<std::size_t>(n_rows))
            throw DataError(std::string("stack sidecar ") + what + " length does not match row count");
    };
    check_rows(row_e_min, "row_e_min");
    check_rows(row_e_max, "row_e_max");
    check_rows(row_e_mean, "row_e_mean");
    check_rows(flat_field, "flat_field");
}

void write_sidecar(const std::string& path, const std::map<std::string, std::string>& kv) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
    if (!os) throw DataError("write failed: " + path);
}

std::map<std::string, std::string> read_sidecar(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("malformed sidecar line in " + path + ": " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

void write_stack(const std::string& path, const SinogramStack& stack) {
    stack.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    write_header(os, stack.dtype,
                 {static_cast<std::uint64_t>(stack.width), static_cast<std::uint64_t>(stack.n_rows),
                  static_cast<std::uint64_t>(stack.n_angles)});
    if (stack.dtype == StackDType::f32) {
        static_assert(sizeof(float) == 4);
        put_bytes(os, stack.f32.data(), stack.f32.size() * 4);
    } else {
        for (std::uint16_t v : stack.u16) {
            unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>(v >> 8)};
            put_bytes(os, b, 2);
        }
    }
    if (!os) throw DataError("write failed: " + path);
    os.close();

    std::map<std::string, std::string> kv;
    kv["preset"] = stack.preset;
    kv["seed"] = std::to_string(stack.seed);
    if (!stack.row_e_min.empty()) kv["row_e_min"] = join_doubles(stack.row_e_min);
    if (!stack.row_e_max.empty()) kv["row_e_max"] = join_doubles(stack.row_e_max);
    if (!stack.row_e_mean.empty()) kv["row_e_mean"] = join_doubles(stack.row_e_mean);
    if (!stack.flat_field.empty()) kv["flat_field"] = join_doubles(stack.flat_field);
    write_sidecar(path + ".meta", kv);
}

SinogramStack read_stack(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    StackDType dtype;
    std::vector<std::uint64_t> dims;
    read_header(is, path, dtype, dims);
    if (dims.size() != 3) throw DataError("expected ndim=3 stack: " + path);

    SinogramStack stack;
    stack.dtype = dtype;
    stack.width = static_cast<int>(dims[0]);
    stack.n_rows = static_cast<int>(dims[1]);
    stack.n_angles = static_cast<int>(dims[2]);
    if (stack.width <= 0 || stack.n_rows <= 0 || stack.n_angles <= 0)
        throw DataError("stack has empty dimensions: " + path);
    stack.allocate();
    if (dtype == StackDType::f32) {
        get_bytes(is, stack.f32.data(), stack.f32.size() * 4, path);
    } else {
        std::vector<unsigned char> raw(stack.u16.size() * 2);
        get_bytes(is, raw.data(), raw.size(), path);
        for (std::size_t i = 0; i < stack.u16.size(); ++i)
            stack.u16[i] = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
    }
    char extra;
    if (is.read(&extra, 1)) throw DataError("trailing bytes in stack file: " + path);

    std::ifstream meta_probe(path + ".meta");
    if (meta_probe) {
        auto kv = read_sidecar(path + ".meta");
        if (auto it = kv.find("preset"); it != kv.end()) stack.preset = it->second;
        if (auto it = kv.find("seed"); it != kv.end()) stack.seed = std::stoull(it->second);
        if (auto it = kv.find("row_e_min"); it != kv.end()) stack.row_e_min = split_doubles(it->second);
        if (auto it = kv.find("row_e_max"); it != kv.end()) stack.row_e_max = split_doubles(it->second);
        if (auto it = kv.find("row_e_mean"); it != kv.end()) stack.row_e_mean = split_doubles(it->second);
        if (auto it = kv.find("flat_field"); it != kv.end()) stack.flat_field = split_doubles(it->second);
    }
    stack.validate();
    return stack;
}

void write_image_f32(const std::string& path, const std::vector<float>& data, int width, int height) {
    if (width <= 0 || height <= 0 ||
        data.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw DataError("image payload size does not match dimensions");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    write_header(os, StackDType::f32, {static_cast<std::uint64_t>(width), static_cast<std::uint64_t>(height)});
    put_bytes(os, data.data(), data.size() * 4);
    if (!os) throw DataError("write failed: " + path);
}

std::vector<float> read_image_f32(const std::string& path, int& width, int& height) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    StackDType dtype;
    std::vector<std::uint64_t> dims;
    read_header(is, path, dtype, dims);
    if (dims.size() != 2 || dtype != StackDType::f32) throw DataError("expected ndim=2 f32 image: " + path);
    width = static_cast<int>(dims[0]);
    height = static_cast<int>(dims[1]);
    std::vector<float> data(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    get_bytes(is, data.data(), data.size() * 4, path);
    return data;
}

void write_pgm16(const std::string& path, const std::vector<double>& data, int width, int height, double window_lo,
                 double window_hi) {
    if (data.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw DataError("image payload size does not match dimensions");
    if (!(window_hi > window_lo)) throw DataError("PGM window must satisfy hi > lo");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << "P5\n" << width << ' ' << height << "\n65535\n";
    double scale = 65535.0 / (window_hi - window_lo);
    for (double v : data) {
        double t = (v - window_lo) * scale;
        t = std::clamp(t, 0.0, 65535.0);
        auto q = static_cast<std::uint16_t>(std::lround(t));
        unsigned char b[2] = {static_cast<unsigned char>(q >> 8), static_cast<unsigned char>(q & 0xff)};
        put_bytes(os, b, 2);
    }
    if (!os) throw DataError("write failed: " + path);
    os.close();
    std::map<std::string, std::string> kv;
    std::ostringstream lo, hi;
    lo.precision(17);
    hi.precision(17);
    lo << window_lo;
    hi << window_hi;
    kv["window_lo"] = lo.str();
    kv["window_hi"] = hi.str();
    write_sidecar(path + ".meta", kv);
}

}  // namespace msct
