#include "model_io.hpp"

#include <zlib.h>

#include "lbpnet/errors.hpp"

namespace lbpnet {

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes 32-bit lengths.
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        crc = ::crc32(crc, bytes.data() + off, n);
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

namespace detail {

void write_blobs(ByteWriter& w, const Blobs& blobs) {
    w.u32(static_cast<std::uint32_t>(blobs.size()));
    for (const auto& [name, values] : blobs) {
        w.str(name);
        w.u64(values.size());
        for (double v : values) w.f64(v);
    }
}

Blobs read_blobs(std::span<const std::uint8_t> payload, const std::string& what) {
    ByteReader<CorruptFileError> r(payload, what);
    Blobs blobs;
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name = r.str();
        const auto n = r.u64();
        if (n > r.remaining() / 8) throw CorruptFileError(what + ": blob '" + name + "' overruns its section");
        std::vector<double> values(n);
        for (auto& v : values) v = r.f64();
        blobs.emplace(std::move(name), std::move(values));
    }
    if (!r.at_end()) throw CorruptFileError(what + ": trailing bytes after parameter blobs");
    return blobs;
}

namespace {

template <typename M>
std::vector<double> flat(const M& m) {
    return {m.data(), m.data() + m.size()};
}

const std::vector<double>& blob(const Blobs& blobs, const std::string& name, std::size_t expected,
                                const std::string& what) {
    const auto it = blobs.find(name);
    if (it == blobs.end()) throw CorruptFileError(what + ": missing parameter blob '" + name + "'");
    if (it->second.size() != expected) {
        throw CorruptFileError(what + ": blob '" + name + "' has " + std::to_string(it->second.size()) +
                               " values, expected " + std::to_string(expected));
    }
    return it->second;
}

Eigen::VectorXd vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Blobs parameter_blobs(const std::vector<const Conv1x1*>& convs, const MlpHead& head) {
    Blobs b;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        if (!convs[i]) continue;
        const std::string p = "block" + std::to_string(i) + ".conv.";
        b[p + "weight"] = convs[i]->weights;
        b[p + "bias"] = convs[i]->bias;
    }
    b["head.fc1.weight"] = flat(head.w1);
    b["head.fc1.bias"] = flat(head.b1);
    b["head.bn.gamma"] = flat(head.gamma);
    b["head.bn.beta"] = flat(head.beta);
    b["head.bn.running_mean"] = flat(head.running_mean);
    b["head.bn.running_var"] = flat(head.running_var);
    b["head.fc2.weight"] = flat(head.w2);
    b["head.fc2.bias"] = flat(head.b2);
    return b;
}

MlpHead head_from_blobs(const Blobs& blobs, const HeadConfig& cfg, const std::string& what) {
    MlpHead h;
    h.config = cfg;
    const auto in = static_cast<std::size_t>(cfg.inputs);
    const auto hid = static_cast<std::size_t>(cfg.hidden);
    const auto cls = static_cast<std::size_t>(cfg.classes);
    const auto& w1 = blob(blobs, "head.fc1.weight", hid * in, what);
    h.w1 = Eigen::Map<const Matrix>(w1.data(), cfg.hidden, cfg.inputs);
    h.b1 = vec(blob(blobs, "head.fc1.bias", hid, what));
    h.gamma = vec(blob(blobs, "head.bn.gamma", hid, what));
    h.beta = vec(blob(blobs, "head.bn.beta", hid, what));
    h.running_mean = vec(blob(blobs, "head.bn.running_mean", hid, what));
    h.running_var = vec(blob(blobs, "head.bn.running_var", hid, what));
    const auto& w2 = blob(blobs, "head.fc2.weight", cls * hid, what);
    h.w2 = Eigen::Map<const Matrix>(w2.data(), cfg.classes, cfg.hidden);
    h.b2 = vec(blob(blobs, "head.fc2.bias", cls, what));
    return h;
}

Conv1x1 conv_from_blobs(const Blobs& blobs, std::size_t block, int in, int out, const std::string& what) {
    Conv1x1 c(in, out);
    const std::string p = "block" + std::to_string(block) + ".conv.";
    c.weights = blob(blobs, p + "weight", static_cast<std::size_t>(in) * out, what);
    c.bias = blob(blobs, p + "bias", static_cast<std::size_t>(out), what);
    return c;
}

std::vector<std::uint8_t> frame(std::string_view magic, std::uint16_t version, const ByteWriter& body) {
    ByteWriter w;
    w.tag(magic);
    w.u16(version);
    w.raw(body.bytes());
    const auto crc = crc32_of(w.bytes());
    w.u32(crc);
    return std::move(w.bytes());
}

std::span<const std::uint8_t> unframe(std::span<const std::uint8_t> bytes, std::string_view magic,
                                      std::uint16_t version, const std::string& what) {
    if (bytes.size() < 4) throw CorruptFileError(what + ": file too short");
    if (std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != magic) {
        throw BadMagicError(what + ": bad magic, expected '" + std::string(magic) + "'");
    }
    if (bytes.size() < 10) throw CorruptFileError(what + ": file too short");
    const std::uint16_t v = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
    if (v != version) {
        throw VersionMismatchError(what + ": format version " + std::to_string(v) + ", this build reads version " +
                                   std::to_string(version));
    }
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader<CorruptFileError> tail(bytes.last(4), what);
    if (tail.u32() != crc32_of(body)) throw CorruptFileError(what + ": checksum mismatch (corrupt or truncated)");
    return body.subspan(6);
}

void write_seed_section(ByteWriter& w, std::uint64_t seed) {
    ByteWriter s;
    s.u64(seed);
    s.str(CounterRng::kAlgorithm);
    w.section("SEED", s);
}

std::uint64_t read_seed_section(std::span<const std::uint8_t> payload, const std::string& what) {
    ByteReader<CorruptFileError> r(payload, what);
    const auto seed = r.u64();
    const auto algo = r.str();
    if (algo != CounterRng::kAlgorithm) {
        throw CorruptFileError(what + ": generator '" + algo + "' is not supported (need " +
                               std::string(CounterRng::kAlgorithm) + ")");
    }
    return seed;
}

}  // namespace detail
}  // namespace lbpnet
