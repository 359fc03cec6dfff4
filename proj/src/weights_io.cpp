#include "msct/weights_io.hpp"

#include <bit>
#include <fstream>
#include <map>
#include <sstream>

#include "msct/common.hpp"

namespace msct {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'C', 'T', 'W', 'T', 'S', '1'};
constexpr std::uint8_t kDTypeF64 = 0;

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
    if (static_cast<std::size_t>(is.gcount()) != n) throw DataError("truncated weights file: " + path);
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

}  // namespace

void write_weights(const std::string& path, const std::string& arch_spec,
                   const std::vector<Param*>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    put_bytes(os, kMagic, 8);
    put_u32(os, 1u);
    put_u64(os, fnv1a64(arch_spec));
    put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const Param* p : params) {
        put_u32(os, static_cast<std::uint32_t>(p->name.size()));
        put_bytes(os, p->name.data(), p->name.size());
        std::uint8_t dt = kDTypeF64;
        std::uint8_t nd = static_cast<std::uint8_t>(p->value.rank());
        put_bytes(os, &dt, 1);
        put_bytes(os, &nd, 1);
        for (int d = 0; d < p->value.rank(); ++d)
            put_u64(os, static_cast<std::uint64_t>(p->value.dim(d)));
        for (double x : p->value.v) put_u64(os, std::bit_cast<std::uint64_t>(x));
    }
    if (!os) throw DataError("write failed: " + path);
}

WeightsFile read_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    char magic[8];
    get_bytes(is, magic, 8, path);
    if (!std::equal(magic, magic + 8, kMagic)) throw DataError("bad magic in weights file: " + path);
    std::uint32_t version = get_u32(is, path);
    if (version != 1) throw DataError("unsupported weights version " + std::to_string(version));
    WeightsFile wf;
    wf.fingerprint = get_u64(is, path);
    std::uint32_t n_blocks = get_u32(is, path);
    wf.blocks.reserve(n_blocks);
    for (std::uint32_t i = 0; i < n_blocks; ++i) {
        std::uint32_t name_len = get_u32(is, path);
        if (name_len > 4096) throw DataError("implausible block name length in " + path);
        std::string name(name_len, '\0');
        get_bytes(is, name.data(), name_len, path);
        std::uint8_t dt = 0, nd = 0;
        get_bytes(is, &dt, 1, path);
        get_bytes(is, &nd, 1, path);
        if (dt != kDTypeF64) throw DataError("unsupported dtype in weights block " + name);
        std::vector<int> dims(nd);
        for (std::uint8_t d = 0; d < nd; ++d) {
            std::uint64_t v = get_u64(is, path);
            if (v == 0 || v > (1u << 30)) throw DataError("implausible dim in weights block " + name);
            dims[d] = static_cast<int>(v);
        }
        Tensor t(dims);
        for (double& x : t.v) x = std::bit_cast<double>(get_u64(is, path));
        wf.blocks.emplace_back(std::move(name), std::move(t));
    }
    return wf;
}

void load_weights(const std::string& path, const std::string& arch_spec,
                  const std::vector<Param*>& params) {
    WeightsFile wf = read_weights(path);
    std::uint64_t want = fnv1a64(arch_spec);
    if (wf.fingerprint != want) {
        std::ostringstream msg;
        msg << "weights fingerprint mismatch in " << path << ": file has " << std::hex
            << wf.fingerprint << ", architecture \"" << arch_spec << "\" wants " << want;
        throw DataError(msg.str());
    }
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : wf.blocks) {
        if (!by_name.emplace(name, &t).second)
            throw DataError("duplicate block \"" + name + "\" in " + path);
    }
    if (wf.blocks.size() != params.size())
        throw DataError("weights file " + path + " has " + std::to_string(wf.blocks.size()) +
                        " blocks, model expects " + std::to_string(params.size()));
    for (Param* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw DataError("missing block \"" + p->name + "\" in " + path);
        const Tensor& t = *it->second;
        if (t.shape != p->value.shape)
            throw DataError("shape mismatch for block \"" + p->name + "\" in " + path);
        p->value.v = t.v;
    }
}

void write_loss_history(const std::string& path, const std::vector<LossRecord>& history) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << "epoch,train_mse,val_mse\n";
    os.precision(17);
    for (const LossRecord& r : history) os << r.epoch << ',' << r.train_mse << ',' << r.val_mse << '\n';
    if (!os) throw DataError("write failed: " + path);
}

std::vector<LossRecord> read_loss_history(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open: " + path);
    std::vector<LossRecord> out;
    std::string line;
    if (!std::getline(is, line)) throw DataError("empty loss history: " + path);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        LossRecord r;
        if (!std::getline(ss, tok, ',')) throw DataError("bad loss history row: " + line);
        r.epoch = std::stoi(tok);
        if (!std::getline(ss, tok, ',')) throw DataError("bad loss history row: " + line);
        r.train_mse = std::stod(tok);
        if (!std::getline(ss, tok, ',')) throw DataError("bad loss history row: " + line);
        r.val_mse = std::stod(tok);
        out.push_back(r);
    }
    return out;
}

}  // namespace msct
