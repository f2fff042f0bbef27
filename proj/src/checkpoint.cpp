#include "qasir/finetune.hpp"

#include "byte_io.hpp"
#include "qasir/errors.hpp"

#include <map>

namespace qasir {

namespace {

constexpr char kMagic[5] = {'Q', 'C', 'K', 'P', 'T'};
constexpr std::uint16_t kVersion = 1;

struct RawTensor {
    std::vector<std::uint32_t> dims;
    std::vector<double> values;  // row-major
};

void put_scalar(detail::ByteWriter& w, const std::string& name, double v) {
    w.str16(name);
    w.uint(std::uint8_t{0});
    w.f32(v);
}

void put_tensor(detail::ByteWriter& w, const TensorView& t) {
    w.str16(t.name);
    const bool vector = t.cols == 1;
    w.uint(static_cast<std::uint8_t>(vector ? 1 : 2));
    w.uint(static_cast<std::uint32_t>(t.rows));
    if (!vector) {
        w.uint(static_cast<std::uint32_t>(t.cols));
    }
    for (Eigen::Index r = 0; r < t.rows; ++r) {
        for (Eigen::Index c = 0; c < t.cols; ++c) {
            w.f32(t.data[c * t.rows + r]);
        }
    }
}

class TensorTable {
public:
    explicit TensorTable(std::map<std::string, RawTensor> table) : table_(std::move(table)) {}

    bool has(const std::string& name) const { return table_.count(name) != 0; }

    double scalar(const std::string& name) const {
        const auto& t = get(name);
        if (!t.dims.empty()) {
            throw FormatError("checkpoint entry " + name + " should be a scalar", 0);
        }
        return t.values.front();
    }

    Eigen::MatrixXd matrix(const std::string& name) const {
        const auto& t = get(name);
        if (t.dims.size() != 2) {
            throw FormatError("checkpoint entry " + name + " should be a matrix", 0);
        }
        Eigen::MatrixXd m(t.dims[0], t.dims[1]);
        for (std::uint32_t r = 0; r < t.dims[0]; ++r) {
            for (std::uint32_t c = 0; c < t.dims[1]; ++c) {
                m(r, c) = t.values[static_cast<std::size_t>(r) * t.dims[1] + c];
            }
        }
        return m;
    }

    Eigen::VectorXd vector(const std::string& name) const {
        const auto& t = get(name);
        if (t.dims.size() != 1) {
            throw FormatError("checkpoint entry " + name + " should be a vector", 0);
        }
        return Eigen::Map<const Eigen::VectorXd>(t.values.data(), static_cast<Eigen::Index>(t.values.size()));
    }

private:
    const RawTensor& get(const std::string& name) const {
        const auto it = table_.find(name);
        if (it == table_.end()) {
            throw FormatError("checkpoint is missing " + name, 0);
        }
        return it->second;
    }

    std::map<std::string, RawTensor> table_;
};

AdapterParams read_adapter(const TensorTable& t, const std::string& prefix) {
    AdapterParams a;
    a.beta = t.scalar(prefix + ".beta");
    for (int l = 0;; ++l) {
        const std::string base = prefix + ".layers." + std::to_string(l);
        if (!t.has(base + ".weight")) {
            break;
        }
        a.layers.push_back({t.matrix(base + ".weight"), t.vector(base + ".bias")});
    }
    if (a.layers.empty()) {
        throw FormatError("checkpoint has no layers for " + prefix, 0);
    }
    return a;
}

} // namespace

std::vector<std::uint8_t> encode_checkpoint(const FineTuneParams& params) {
    FineTuneParams copy = params;
    const auto views = tensors(copy);
    const std::vector<std::pair<std::string, double>> scalars = {
        {"vision.beta", params.vision.beta},
        {"text.beta", params.text.beta},
        {"temporal.heads", params.temporal.heads},
        {"temporal.ln_eps", params.temporal.ln_eps},
        {"use.vision_adapter", params.use.vision_adapter ? 1.0 : 0.0},
        {"use.text_adapter", params.use.text_adapter ? 1.0 : 0.0},
        {"use.temporal_encoder", params.use.temporal_encoder ? 1.0 : 0.0},
    };
    detail::ByteWriter w;
    w.bytes(kMagic, sizeof kMagic);
    w.uint(kVersion);
    w.uint(static_cast<std::uint32_t>(scalars.size() + views.size()));
    for (const auto& [name, value] : scalars) {
        put_scalar(w, name, value);
    }
    for (const auto& v : views) {
        put_tensor(w, v);
    }
    return w.take();
}

FineTuneParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    r.need(sizeof kMagic, "magic");
    for (std::size_t i = 0; i < sizeof kMagic; ++i) {
        if (r.uint<std::uint8_t>("magic") != static_cast<std::uint8_t>(kMagic[i])) {
            throw FormatError("not a checkpoint (bad magic)", 0);
        }
    }
    const auto version = r.uint<std::uint16_t>("version");
    if (version != kVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 5);
    }
    const auto count = r.uint<std::uint32_t>("tensor count");
    std::map<std::string, RawTensor> table;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto at = r.offset();
        std::string name = r.str16("tensor name");
        RawTensor t;
        const auto rank = r.uint<std::uint8_t>("tensor rank");
        if (rank > 2) {
            throw FormatError("tensor " + name + " has unsupported rank " + std::to_string(rank), at);
        }
        std::size_t n = 1;
        for (std::uint8_t k = 0; k < rank; ++k) {
            t.dims.push_back(r.uint<std::uint32_t>("tensor dimension"));
            n *= t.dims.back();
        }
        r.need(n * 4, "tensor payload");
        t.values.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            t.values.push_back(r.f32("tensor payload"));
        }
        if (!table.emplace(std::move(name), std::move(t)).second) {
            throw FormatError("duplicate tensor in checkpoint", at);
        }
    }
    if (!r.done()) {
        throw FormatError("trailing bytes after checkpoint", r.offset());
    }

    const TensorTable t(std::move(table));
    FineTuneParams p;
    p.vision = read_adapter(t, "vision");
    p.text = read_adapter(t, "text");
    p.use.vision_adapter = t.scalar("use.vision_adapter") != 0.0;
    p.use.text_adapter = t.scalar("use.text_adapter") != 0.0;
    p.use.temporal_encoder = t.scalar("use.temporal_encoder") != 0.0;
    auto& e = p.temporal;
    e.heads = static_cast<int>(t.scalar("temporal.heads"));
    e.ln_eps = t.scalar("temporal.ln_eps");
    e.wq = t.matrix("temporal.wq");
    e.bq = t.vector("temporal.bq");
    e.wk = t.matrix("temporal.wk");
    e.bk = t.vector("temporal.bk");
    e.wv = t.matrix("temporal.wv");
    e.bv = t.vector("temporal.bv");
    e.wo = t.matrix("temporal.wo");
    e.bo = t.vector("temporal.bo");
    e.ff1_weight = t.matrix("temporal.ff1_weight");
    e.ff1_bias = t.vector("temporal.ff1_bias");
    e.ff2_weight = t.matrix("temporal.ff2_weight");
    e.ff2_bias = t.vector("temporal.ff2_bias");
    e.ln1_gain = t.vector("temporal.ln1_gain");
    e.ln1_bias = t.vector("temporal.ln1_bias");
    e.ln2_gain = t.vector("temporal.ln2_gain");
    e.ln2_bias = t.vector("temporal.ln2_bias");
    return p;
}

void save_checkpoint(const std::filesystem::path& path, const FineTuneParams& params) {
    write_file_bytes(path, encode_checkpoint(params));
}

FineTuneParams load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file_bytes(path));
}

} // namespace qasir
