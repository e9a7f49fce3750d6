#include "crossalign/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "crossalign/errors.hpp"

namespace crossalign::ckpt {

namespace {

constexpr const char* kMagic = "crossalign-checkpoint 1";

// Explicit little-endian encoding so files are portable across hosts.
void put_f64_le(std::string& out, double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64_le(const char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
}

}  // namespace

const TensorEntry* CheckpointFile::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

std::string CheckpointFile::config_value(const std::string& key, const std::string& fallback) const {
    for (const auto& [k, v] : config)
        if (k == key) return v;
    return fallback;
}

void write_checkpoint(const std::string& path, const CheckpointFile& f) {
    std::ostringstream manifest;
    manifest << kMagic << '\n';
    manifest << "epoch " << f.epoch << '\n';
    manifest << "step " << f.step << '\n';
    manifest << "vocab_hash " << std::hex << f.vocab_hash << std::dec << '\n';
    manifest << "rng " << f.rng_state << '\n';
    manifest << "config " << f.config.size() << '\n';
    for (const auto& [k, v] : f.config) manifest << k << '=' << v << '\n';
    manifest << "tensors " << f.tensors.size() << '\n';
    std::string blob;
    for (const auto& t : f.tensors) {
        size_t expect = 1;
        for (int d : t.shape) expect *= static_cast<size_t>(d);
        if (expect != t.values.size())
            throw ContractError("write_checkpoint: shape/value mismatch for " + t.name);
        manifest << t.name << ' ' << t.shape.size();
        for (int d : t.shape) manifest << ' ' << d;
        manifest << ' ' << t.values.size() << '\n';
        for (double v : t.values) put_f64_le(blob, v);
    }
    manifest << "end\n";

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_checkpoint: cannot open " + path);
    const std::string head = manifest.str();
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("write_checkpoint: short write to " + path);
}

CheckpointFile read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_checkpoint: cannot open " + path);

    CheckpointFile f;
    std::string line;
    auto next_line = [&]() {
        if (!std::getline(in, line)) throw IoError("read_checkpoint: truncated manifest");
        return line;
    };
    if (next_line() != kMagic) throw IoError("read_checkpoint: bad format line in " + path);

    auto expect_field = [&](const std::string& key) {
        next_line();
        if (line.rfind(key + ' ', 0) != 0)
            throw IoError("read_checkpoint: expected '" + key + "' line");
        return line.substr(key.size() + 1);
    };
    f.epoch = std::stoi(expect_field("epoch"));
    f.step = std::stol(expect_field("step"));
    f.vocab_hash = std::stoull(expect_field("vocab_hash"), nullptr, 16);
    f.rng_state = expect_field("rng");

    const long n_cfg = std::stol(expect_field("config"));
    for (long i = 0; i < n_cfg; ++i) {
        next_line();
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("read_checkpoint: malformed config line");
        f.config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }

    const long n_tensors = std::stol(expect_field("tensors"));
    for (long i = 0; i < n_tensors; ++i) {
        next_line();
        std::istringstream ls(line);
        TensorEntry t;
        size_t rank = 0, count = 0;
        if (!(ls >> t.name >> rank)) throw IoError("read_checkpoint: malformed tensor line");
        t.shape.resize(rank);
        for (auto& d : t.shape)
            if (!(ls >> d) || d <= 0) throw IoError("read_checkpoint: malformed tensor shape");
        if (!(ls >> count)) throw IoError("read_checkpoint: malformed tensor count");
        size_t expect = 1;
        for (int d : t.shape) expect *= static_cast<size_t>(d);
        if (expect != count) throw IoError("read_checkpoint: tensor count disagrees with shape");
        t.values.resize(count);
        f.tensors.push_back(std::move(t));
    }
    if (next_line() != "end") throw IoError("read_checkpoint: missing end marker");

    for (auto& t : f.tensors) {
        std::vector<char> raw(t.values.size() * 8);
        in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size()))
            throw IoError("read_checkpoint: truncated tensor data for " + t.name);
        for (size_t i = 0; i < t.values.size(); ++i) t.values[i] = get_f64_le(raw.data() + 8 * i);
    }
    return f;
}

void pack_params(CheckpointFile& f, const model::ModelParams& p) {
    for (const auto& [name, t] : p.named_params()) {
        TensorEntry e;
        e.name = name;
        e.shape = t->shape;
        e.values = t->values;
        f.tensors.push_back(std::move(e));
    }
}

void unpack_params(const CheckpointFile& f, model::ModelParams& p) {
    for (auto& [name, t] : p.named_params()) {
        const TensorEntry* e = f.find(name);
        if (!e) throw IoError("unpack_params: checkpoint missing tensor " + name);
        if (e->shape != t->shape)
            throw IoError("unpack_params: shape mismatch for " + name);
        t->values = e->values;
    }
}

void pack_adam(CheckpointFile& f, const training::Adam& opt, const model::ModelParams& p) {
    for (auto& [name, blob] : opt.serialize(p.named_params())) {
        TensorEntry e;
        e.name = name;
        e.shape = {static_cast<int>(blob.size())};
        e.values = std::move(blob);
        f.tensors.push_back(std::move(e));
    }
}

void unpack_adam(const CheckpointFile& f, training::Adam& opt, const model::ModelParams& p) {
    std::map<std::string, std::vector<double>> blobs;
    for (const auto& t : f.tensors)
        if (t.name.rfind("adam.", 0) == 0) blobs[t.name] = t.values;
    opt.restore(p.named_params(), blobs);
}

model::Dims dims_from_config(const CheckpointFile& f) {
    model::Dims d;
    auto geti = [&f](const std::string& key) {
        const std::string v = f.config_value(key);
        if (v.empty()) throw IoError("checkpoint config missing key " + key);
        return std::stoi(v);
    };
    d.d_emb = geti("d_emb");
    d.d_y = geti("d_y");
    d.d_z = geti("d_z");
    d.n_filters = geti("n_filters");
    d.validate();
    return d;
}

int vocab_size_from_config(const CheckpointFile& f) {
    const std::string v = f.config_value("vocab_size");
    if (v.empty()) throw IoError("checkpoint config missing key vocab_size");
    return std::stoi(v);
}

}  // namespace crossalign::ckpt
