#include "scs/pcap.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace scs::pcap {

namespace {

void put_le32(codec::Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
}

void put_le16(codec::Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint32_t get_le32(codec::ByteView b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

}  // namespace

codec::Bytes to_bytes(const std::vector<CaptureRecord>& records) {
    codec::Bytes out;
    put_le32(out, kMagic);
    put_le16(out, kVersionMajor);
    put_le16(out, kVersionMinor);
    put_le32(out, 0);  // thiszone
    put_le32(out, 0);  // sigfigs
    put_le32(out, kSnapLen);
    put_le32(out, kLinkTypeEthernet);
    for (const auto& r : records) {
        const auto ts = static_cast<std::uint64_t>(r.time < 0 ? 0 : r.time);
        const auto len = static_cast<std::uint32_t>(r.frame->size());
        put_le32(out, static_cast<std::uint32_t>(ts / 1'000'000'000ULL));
        put_le32(out, static_cast<std::uint32_t>((ts % 1'000'000'000ULL) / 1'000ULL));
        put_le32(out, std::min(len, kSnapLen));
        put_le32(out, len);
        out.insert(out.end(), r.frame->begin(), r.frame->begin() + std::min(len, kSnapLen));
    }
    return out;
}

void write(std::ostream& out, const std::vector<CaptureRecord>& records) {
    const auto bytes = to_bytes(records);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_file(const std::string& path, const std::vector<CaptureRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    write(out, records);
}

std::vector<ReadRecord> read(codec::ByteView bytes) {
    if (bytes.size() < kGlobalHeaderSize || get_le32(bytes, 0) != kMagic) {
        throw std::runtime_error("not a little-endian microsecond pcap");
    }
    if (get_le32(bytes, 20) != kLinkTypeEthernet) {
        throw std::runtime_error("unexpected pcap linktype");
    }
    std::vector<ReadRecord> out;
    std::size_t pos = kGlobalHeaderSize;
    while (pos < bytes.size()) {
        if (bytes.size() - pos < 16) {
            throw std::runtime_error("truncated pcap record header");
        }
        ReadRecord r;
        r.ts_sec = get_le32(bytes, pos);
        r.ts_usec = get_le32(bytes, pos + 4);
        const std::uint32_t incl = get_le32(bytes, pos + 8);
        pos += 16;
        if (bytes.size() - pos < incl) {
            throw std::runtime_error("truncated pcap record");
        }
        r.frame.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + incl));
        pos += incl;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace scs::pcap
