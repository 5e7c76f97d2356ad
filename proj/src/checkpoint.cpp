#include "hitrade/checkpoint.hpp"

#include "hitrade/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

namespace hitrade {

namespace {

constexpr std::array<char, 8> kMagic{'H', 'T', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::size_t kRoleBytes = 16;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64s(const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
    }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }
    std::span<const std::uint8_t> view() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::string_view source) : bytes_(bytes), source_(source) {}

    void need(std::size_t n, std::string_view what) const {
        if (pos_ + n > bytes_.size())
            throw CheckpointError(fmt::format("{}: truncated checkpoint while reading {}", source_, what));
    }
    std::span<const std::uint8_t> raw(std::size_t n, std::string_view what) {
        need(n, what);
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::uint32_t u32(std::string_view what) {
        auto b = raw(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
        return v;
    }
    std::uint64_t u64(std::string_view what) {
        auto b = raw(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
        return v;
    }
    double f64(std::string_view what) { return std::bit_cast<double>(u64(what)); }
    void f64s(Eigen::VectorXd& v, std::string_view what) {
        need(static_cast<std::size_t>(v.size()) * 8, what);
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64(what);
    }
    std::size_t position() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::string_view source_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.role.size() >= kRoleBytes) throw CheckpointError(fmt::format("role '{}' is too long", ckpt.role));
    const NetworkSpec& spec = ckpt.params.spec();
    const PpoHyperparams& hp = ckpt.hyperparams;
    Writer w;
    w.raw(kMagic.data(), kMagic.size());
    w.u32(kCheckpointVersion);
    std::array<char, kRoleBytes> role{};
    std::memcpy(role.data(), ckpt.role.data(), ckpt.role.size());
    w.raw(role.data(), role.size());
    w.u64(spec.input_dim);
    w.u64(spec.hidden1);
    w.u64(spec.hidden2);
    w.u64(spec.action_count);
    w.u64(hp.total_timesteps);
    w.u64(hp.n_steps);
    w.u64(hp.batch_size);
    w.u64(hp.n_epochs);
    w.f64(hp.learning_rate);
    w.f64(hp.gamma);
    w.f64(hp.gae_lambda);
    w.f64(hp.clip_range);
    w.f64(hp.entropy_coef);
    w.f64(hp.value_coef);
    w.f64(hp.max_grad_norm);
    w.u64(ckpt.seed);
    w.u64(ckpt.params.update_count);
    w.u64(static_cast<std::uint64_t>(ckpt.params.values.size()));
    w.f64s(ckpt.params.values);
    w.f64s(ckpt.params.adam_m);
    w.f64s(ckpt.params.adam_v);
    w.u64(fnv1a(w.view()));
    return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes, std::string_view source) {
    Reader r(bytes, source);
    auto magic = r.raw(kMagic.size(), "magic");
    if (!std::equal(magic.begin(), magic.end(), kMagic.begin(), kMagic.end(),
                    [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); }))
        throw CheckpointError(fmt::format("{}: not a checkpoint file (bad magic)", source));
    std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion)
        throw CheckpointError(fmt::format("{}: unsupported checkpoint version {}", source, version));

    Checkpoint ckpt;
    auto role = r.raw(kRoleBytes, "role");
    ckpt.role.assign(reinterpret_cast<const char*>(role.data()), strnlen(reinterpret_cast<const char*>(role.data()), kRoleBytes));

    NetworkSpec spec;
    spec.input_dim = r.u64("network spec");
    spec.hidden1 = r.u64("network spec");
    spec.hidden2 = r.u64("network spec");
    spec.action_count = r.u64("network spec");
    constexpr std::uint64_t kMaxWidth = 1u << 20;
    if (spec.input_dim == 0 || spec.input_dim > kMaxWidth || spec.hidden1 == 0 || spec.hidden1 > kMaxWidth ||
        spec.hidden2 == 0 || spec.hidden2 > kMaxWidth || spec.action_count < 2 || spec.action_count > kMaxWidth)
        throw CheckpointError(fmt::format("{}: corrupt network header", source));

    PpoHyperparams& hp = ckpt.hyperparams;
    hp.total_timesteps = r.u64("hyperparameters");
    hp.n_steps = r.u64("hyperparameters");
    hp.batch_size = r.u64("hyperparameters");
    hp.n_epochs = r.u64("hyperparameters");
    hp.learning_rate = r.f64("hyperparameters");
    hp.gamma = r.f64("hyperparameters");
    hp.gae_lambda = r.f64("hyperparameters");
    hp.clip_range = r.f64("hyperparameters");
    hp.entropy_coef = r.f64("hyperparameters");
    hp.value_coef = r.f64("hyperparameters");
    hp.max_grad_norm = r.f64("hyperparameters");
    ckpt.seed = r.u64("seed");
    std::uint64_t update_count = r.u64("update counter");
    std::uint64_t count = r.u64("parameter count");
    if (count != spec.parameter_count())
        throw CheckpointError(fmt::format("{}: parameter count {} does not match the network header ({})", source,
                                          count, spec.parameter_count()));
    const std::size_t expected_size = r.position() + 3 * count * 8 + 8;
    if (bytes.size() != expected_size)
        throw CheckpointError(fmt::format("{}: checkpoint is {} bytes, header implies {}", source, bytes.size(),
                                          expected_size));

    ckpt.params = PolicyParameters(spec);
    ckpt.params.update_count = update_count;
    r.f64s(ckpt.params.values, "parameters");
    r.f64s(ckpt.params.adam_m, "optimizer state");
    r.f64s(ckpt.params.adam_v, "optimizer state");
    const std::size_t body = r.position();
    std::uint64_t stored = r.u64("checksum");
    if (stored != fnv1a(bytes.first(body))) throw CheckpointError(fmt::format("{}: checksum mismatch", source));
    if (!ckpt.params.values.allFinite()) throw CheckpointError(fmt::format("{}: non-finite parameters", source));
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(fmt::format("{}: cannot open for writing", path.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(fmt::format("{}: write failed", path.string()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(fmt::format("{}: cannot open checkpoint", path.string()));
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes, path.string());
}

} // namespace hitrade
