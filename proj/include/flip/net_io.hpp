#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "flip/error.hpp"
#include "flip/net.hpp"
#include "flip/util.hpp"

namespace flip {

// Versioned binary checkpoint: magic, spec, raw float32 parameter payload.
namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 24)};
    out.append(b, 4);
}
inline void put_i32(std::string& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }
inline void put_u64(std::string& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw FormatError("checkpoint truncated", buf.size());
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        const std::uint64_t hi = u32();
        return lo | (hi << 32);
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
};

inline void put_layer(std::string& out, const LayerDesc& d) {
    out.push_back(static_cast<char>(d.kind));
    put_i32(out, d.in_c);
    put_i32(out, d.out_c);
    put_i32(out, d.k);
    put_i32(out, d.stride);
    put_i32(out, d.pad);
    put_i32(out, d.in_n);
    put_i32(out, d.out_n);
}

inline LayerDesc get_layer(ByteReader& r) {
    LayerDesc d;
    const std::uint8_t kind = r.u8();
    if (kind > 4) throw FormatError("checkpoint: unknown layer kind", r.pos - 1);
    d.kind = static_cast<LayerDesc::Kind>(kind);
    d.in_c = r.i32();
    d.out_c = r.i32();
    d.k = r.i32();
    d.stride = r.i32();
    d.pad = r.i32();
    d.in_n = r.i32();
    d.out_n = r.i32();
    return d;
}

}  // namespace detail

inline std::string encode_checkpoint(const Network<float>& net) {
    std::string out = "FLNC";
    detail::put_u32(out, 1);  // version
    const auto& spec = net.spec();
    detail::put_u32(out, static_cast<std::uint32_t>(spec.input_shape.size()));
    for (int d : spec.input_shape) detail::put_i32(out, d);
    detail::put_u32(out, static_cast<std::uint32_t>(spec.trunk.size()));
    for (const auto& d : spec.trunk) detail::put_layer(out, d);
    detail::put_u32(out, static_cast<std::uint32_t>(spec.heads.size()));
    for (const auto& head : spec.heads) {
        detail::put_u32(out, static_cast<std::uint32_t>(head.size()));
        for (const auto& d : head) detail::put_layer(out, d);
    }
    std::uint64_t total = 0;
    for (const auto* p : net.params()) total += p->numel();
    detail::put_u64(out, total);
    for (const auto* p : net.params())
        out.append(reinterpret_cast<const char*>(p->data.data()), p->data.size() * sizeof(float));
    return out;
}

inline Network<float> decode_checkpoint(const std::string& buf) {
    if (buf.size() < 8 || buf.compare(0, 4, "FLNC") != 0)
        throw FormatError("not a network checkpoint (bad magic)", 0);
    detail::ByteReader r{buf, 4};
    const std::uint32_t version = r.u32();
    if (version != 1) throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);

    NetworkSpec spec;
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError("checkpoint: absurd input rank", r.pos - 4);
    for (std::uint32_t i = 0; i < rank; ++i) spec.input_shape.push_back(r.i32());
    const std::uint32_t nt = r.u32();
    if (nt > 1024) throw FormatError("checkpoint: absurd trunk size", r.pos - 4);
    for (std::uint32_t i = 0; i < nt; ++i) spec.trunk.push_back(detail::get_layer(r));
    const std::uint32_t nh = r.u32();
    if (nh == 0 || nh > 64) throw FormatError("checkpoint: bad head count", r.pos - 4);
    for (std::uint32_t h = 0; h < nh; ++h) {
        const std::uint32_t nl = r.u32();
        if (nl > 1024) throw FormatError("checkpoint: absurd head size", r.pos - 4);
        spec.heads.emplace_back();
        for (std::uint32_t i = 0; i < nl; ++i) spec.heads.back().push_back(detail::get_layer(r));
    }

    Network<float> net(spec);
    const std::uint64_t total = r.u64();
    std::uint64_t expect = 0;
    for (const auto* p : net.params()) expect += p->numel();
    if (total != expect) throw FormatError("checkpoint: parameter count mismatch", r.pos - 8);
    r.need(total * sizeof(float));
    for (auto* p : net.params()) {
        std::memcpy(p->data.data(), buf.data() + r.pos, p->data.size() * sizeof(float));
        r.pos += p->data.size() * sizeof(float);
    }
    return net;
}

inline void save_checkpoint(const std::string& path, const Network<float>& net) {
    write_file(path, encode_checkpoint(net));
}

inline Network<float> load_checkpoint(const std::string& path) {
    return decode_checkpoint(read_file(path));
}

}  // namespace flip
