#include "chive/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "chive/baseline.hpp"
#include "chive/digest.hpp"
#include "chive/errors.hpp"

namespace chive {

namespace {

constexpr char kMagic[8] = {'C', 'H', 'I', 'V', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::vector<unsigned char>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

void put_string(std::vector<unsigned char>& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

class Reader {
public:
    Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string string() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > size_) throw ParseError("checkpoint truncated");
    }
    const unsigned char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    std::vector<unsigned char> payload;
    payload.reserve(checkpoint.params.total_size() * 8 + 4096);

    put_string(payload, checkpoint.kind);
    put_string(payload, checkpoint.config.to_json_string());
    put_u64(payload, checkpoint.step);

    const ParameterStore& params = checkpoint.params;
    put_u32(payload, static_cast<std::uint32_t>(params.count()));
    for (std::size_t i = 0; i < params.count(); ++i) {
        const ParamEntry& entry = params.entry(i);
        put_string(payload, entry.name);
        put_u32(payload, entry.rows);
        put_u32(payload, entry.cols);
    }
    for (std::size_t i = 0; i < params.count(); ++i)
        for (double v : params.values(i)) put_f64(payload, v);

    const bool with_adam = !checkpoint.adam_m.empty();
    put_u32(payload, with_adam ? 1u : 0u);
    if (with_adam) {
        if (checkpoint.adam_m.size() != params.total_size() ||
            checkpoint.adam_v.size() != params.total_size())
            throw ShapeError("checkpoint: optimizer moment size mismatch");
        for (double v : checkpoint.adam_m) put_f64(payload, v);
        for (double v : checkpoint.adam_v) put_f64(payload, v);
    }

    std::vector<unsigned char> out;
    out.reserve(payload.size() + 16);
    out.insert(out.end(), kMagic, kMagic + 8);
    put_u32(out, kVersion);
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32(out, crc32(payload.data(), payload.size()));

    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write checkpoint: " + path);
    file.write(reinterpret_cast<const char*>(out.data()),
               static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open checkpoint: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw ParseError("not a checkpoint file: " + path);

    Reader header(bytes.data() + 8, 4);
    const std::uint32_t version = header.u32();
    if (version != kVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(version));

    const unsigned char* payload = bytes.data() + 12;
    const std::size_t payload_size = bytes.size() - 16;
    Reader tail(bytes.data() + bytes.size() - 4, 4);
    if (tail.u32() != crc32(payload, payload_size))
        throw ParseError("checkpoint checksum mismatch: " + path);

    Reader in(payload, payload_size);
    Checkpoint checkpoint;
    checkpoint.kind = in.string();
    checkpoint.config = ModelConfig::from_json_string(in.string());
    checkpoint.step = in.u64();

    const std::uint32_t count = in.u32();
    std::vector<std::pair<std::string, std::pair<std::uint32_t, std::uint32_t>>> table;
    table.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = in.string();
        const std::uint32_t rows = in.u32();
        const std::uint32_t cols = in.u32();
        table.emplace_back(std::move(name), std::make_pair(rows, cols));
    }
    for (const auto& [name, shape] : table) {
        const std::size_t idx = checkpoint.params.add(name, shape.first, shape.second);
        for (double& v : checkpoint.params.values(idx)) v = in.f64();
    }

    const std::uint32_t with_adam = in.u32();
    if (with_adam) {
        checkpoint.adam_m.resize(checkpoint.params.total_size());
        checkpoint.adam_v.resize(checkpoint.params.total_size());
        for (double& v : checkpoint.adam_m) v = in.f64();
        for (double& v : checkpoint.adam_v) v = in.f64();
    }
    return checkpoint;
}

std::unique_ptr<ProsodyModel> model_from_checkpoint(const Checkpoint& checkpoint) {
    std::unique_ptr<ProsodyModel> model;
    if (checkpoint.kind == kKindChive)
        model = std::make_unique<ChiveModel>(checkpoint.config);
    else if (checkpoint.kind == kKindBaseline)
        model = std::make_unique<BaselineModel>(checkpoint.config);
    else
        throw ParseError("unknown model kind in checkpoint: " + checkpoint.kind);

    ParameterStore& params = model->params();
    if (params.count() != checkpoint.params.count())
        throw ParseError("checkpoint parameter table does not match the model layout");
    for (std::size_t i = 0; i < params.count(); ++i) {
        const ParamEntry& expected = params.entry(i);
        const ParamEntry& stored = checkpoint.params.entry(i);
        if (expected.name != stored.name || expected.rows != stored.rows ||
            expected.cols != stored.cols)
            throw ParseError("checkpoint tensor mismatch at " + expected.name);
        auto dst = params.values(i);
        auto src = checkpoint.params.values(i);
        std::memcpy(dst.data(), src.data(), src.size() * sizeof(double));
    }
    return model;
}

std::unique_ptr<ProsodyModel> load_model(const std::string& path) {
    return model_from_checkpoint(load_checkpoint(path));
}

}  // namespace chive
