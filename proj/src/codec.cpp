#include "scs/codec.hpp"

#include <charconv>
#include <cstdio>

namespace scs::codec {

namespace {

// goosePdu / savPdu tags (IEC 61850-8-1 / 9-2).
constexpr std::uint8_t kTagGoosePdu = 0x61;
constexpr std::uint8_t kTagGocbRef = 0x80;
constexpr std::uint8_t kTagTimeAllowedToLive = 0x81;
constexpr std::uint8_t kTagDatSet = 0x82;
constexpr std::uint8_t kTagGoId = 0x83;
constexpr std::uint8_t kTagTime = 0x84;
constexpr std::uint8_t kTagStNum = 0x85;
constexpr std::uint8_t kTagSqNum = 0x86;
constexpr std::uint8_t kTagTest = 0x87;
constexpr std::uint8_t kTagConfRev = 0x88;
constexpr std::uint8_t kTagNdsCom = 0x89;
constexpr std::uint8_t kTagNumDatSetEntries = 0x8A;
constexpr std::uint8_t kTagAllData = 0xAB;
constexpr std::uint8_t kTagDataBoolean = 0x83;

constexpr std::uint8_t kTagSavPdu = 0x60;
constexpr std::uint8_t kTagNoAsdu = 0x80;
constexpr std::uint8_t kTagSeqAsdu = 0xA2;
constexpr std::uint8_t kTagAsdu = 0x30;
constexpr std::uint8_t kTagSvId = 0x80;
constexpr std::uint8_t kTagSmpCnt = 0x82;
constexpr std::uint8_t kTagSvConfRev = 0x83;
constexpr std::uint8_t kTagSmpSynch = 0x85;
constexpr std::uint8_t kTagSeqData = 0x87;

constexpr std::uint8_t kUtcQuality = 0x0A;  // 10 bits of clock accuracy
constexpr std::uint64_t kNsPerSecond = 1'000'000'000ULL;

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(Bytes& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
    }
}

void put_length(Bytes& out, std::size_t len) {
    if (len < 0x80) {
        out.push_back(static_cast<std::uint8_t>(len));
    } else if (len <= 0xFF) {
        out.push_back(0x81);
        out.push_back(static_cast<std::uint8_t>(len));
    } else if (len <= 0xFFFF) {
        out.push_back(0x82);
        put_u16(out, static_cast<std::uint16_t>(len));
    } else {
        throw EncodeError("TLV value too long");
    }
}

void put_tlv(Bytes& out, std::uint8_t tag, const Bytes& value) {
    out.push_back(tag);
    put_length(out, value.size());
    out.insert(out.end(), value.begin(), value.end());
}

void put_text(Bytes& out, std::uint8_t tag, const std::string& text, const char* field) {
    if (text.size() > kMaxTextField) {
        throw EncodeError(std::string(field) + " exceeds " + std::to_string(kMaxTextField) + " bytes");
    }
    put_tlv(out, tag, Bytes(text.begin(), text.end()));
}

// Minimal two's-complement content octets for a non-negative value.
void put_unsigned(Bytes& out, std::uint8_t tag, std::uint32_t v) {
    Bytes content;
    std::uint64_t wide = v;
    int bytes = 1;
    while (bytes < 5 && (wide >> (8 * bytes - 1)) != 0) {
        ++bytes;
    }
    for (int i = bytes - 1; i >= 0; --i) {
        content.push_back(static_cast<std::uint8_t>((wide >> (8 * i)) & 0xFF));
    }
    put_tlv(out, tag, content);
}

void put_bool(Bytes& out, std::uint8_t tag, bool v) { put_tlv(out, tag, Bytes{static_cast<std::uint8_t>(v ? 1 : 0)}); }

Bytes frame_prefix(const FrameHeader& header, std::uint16_t ethertype) {
    Bytes out;
    out.reserve(160);
    out.insert(out.end(), header.dst.octets.begin(), header.dst.octets.end());
    out.insert(out.end(), header.src.octets.begin(), header.src.octets.end());
    put_u16(out, ethertype);
    return out;
}

Bytes finish_frame(Bytes prefix, std::uint16_t appid, const Bytes& apdu) {
    const std::size_t length = apdu.size() + kSessionHeaderSize;
    if (length > 0xFFFF) {
        throw EncodeError("frame too long");
    }
    put_u16(prefix, appid);
    put_u16(prefix, static_cast<std::uint16_t>(length));
    put_u16(prefix, 0);
    put_u16(prefix, 0);
    prefix.insert(prefix.end(), apdu.begin(), apdu.end());
    return prefix;
}

Bytes utc_time_bytes(std::uint64_t ns) {
    const std::uint64_t seconds = ns / kNsPerSecond;
    const std::uint64_t sub = ns % kNsPerSecond;
    std::uint64_t fraction = ((sub << 24) + kNsPerSecond / 2) / kNsPerSecond;
    if (fraction > 0xFFFFFF) {
        fraction = 0xFFFFFF;
    }
    Bytes out;
    put_u32(out, static_cast<std::uint32_t>(seconds));
    out.push_back(static_cast<std::uint8_t>(fraction >> 16));
    out.push_back(static_cast<std::uint8_t>(fraction >> 8));
    out.push_back(static_cast<std::uint8_t>(fraction));
    out.push_back(kUtcQuality);
    return out;
}

std::uint64_t utc_time_ns(std::uint32_t seconds, std::uint32_t fraction) {
    return static_cast<std::uint64_t>(seconds) * kNsPerSecond +
           ((static_cast<std::uint64_t>(fraction) * kNsPerSecond + (1ULL << 23)) >> 24);
}

// ---------------------------------------------------------------------------
// Decoding

struct Malformed {
    std::size_t offset;
    std::string message;
};

class Reader {
public:
    Reader(ByteView bytes, std::size_t pos, std::size_t end) : bytes_(bytes), pos_(pos), end_(end) {}

    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ >= end_; }

    std::uint8_t u8() {
        need(1, "unexpected end of data");
        return bytes_[pos_++];
    }

    std::uint16_t u16() {
        need(2, "unexpected end of data");
        std::uint16_t v = static_cast<std::uint16_t>((bytes_[pos_] << 8) | bytes_[pos_ + 1]);
        pos_ += 2;
        return v;
    }

    // Returns a sub-reader over the value of the next TLV, which must carry `tag`.
    Reader expect(std::uint8_t tag, const char* what) {
        const std::size_t tag_pos = pos_;
        const std::uint8_t got = u8();
        if (got != tag) {
            throw Malformed{tag_pos, std::string("expected ") + what};
        }
        const std::size_t len_pos = pos_;
        const std::size_t len = length();
        if (len > end_ - pos_) {
            throw Malformed{len_pos, std::string(what) + " length exceeds enclosing data"};
        }
        Reader inner(bytes_, pos_, pos_ + len);
        pos_ += len;
        return inner;
    }

    std::uint8_t peek_tag() const {
        if (pos_ >= end_) {
            throw Malformed{pos_, "unexpected end of data"};
        }
        return bytes_[pos_];
    }

    std::string text(std::size_t limit) {
        if (end_ - pos_ > limit) {
            throw Malformed{pos_, "text field too long"};
        }
        std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(end_));
        pos_ = end_;
        return s;
    }

    std::uint32_t unsigned_integer() {
        const std::size_t start = pos_;
        const std::size_t len = end_ - pos_;
        if (len == 0 || len > 5) {
            throw Malformed{start, "bad INTEGER length"};
        }
        if (bytes_[pos_] & 0x80) {
            throw Malformed{start, "negative INTEGER"};
        }
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < len; ++i) {
            v = (v << 8) | bytes_[pos_ + i];
        }
        if (v > 0xFFFFFFFFULL) {
            throw Malformed{start, "INTEGER out of range"};
        }
        pos_ = end_;
        return static_cast<std::uint32_t>(v);
    }

    bool boolean() {
        if (end_ - pos_ != 1) {
            throw Malformed{pos_, "bad BOOLEAN length"};
        }
        return bytes_[pos_++] != 0;
    }

    void fixed(std::size_t n) const {
        if (end_ - pos_ != n) {
            throw Malformed{pos_, "unexpected fixed-size field length"};
        }
    }

    void finish(const char* what) const {
        if (pos_ != end_) {
            throw Malformed{pos_, std::string("trailing bytes in ") + what};
        }
    }

private:
    void need(std::size_t n, const char* msg) const {
        if (pos_ > end_ || end_ - pos_ < n) {
            throw Malformed{pos_, msg};
        }
    }

    std::size_t length() {
        const std::size_t at = pos_;
        const std::uint8_t first = u8();
        if (first < 0x80) {
            return first;
        }
        if (first == 0x81) {
            return u8();
        }
        if (first == 0x82) {
            return u16();
        }
        throw Malformed{at, first == 0x80 ? "indefinite length not supported" : "unsupported length form"};
    }

    ByteView bytes_;
    std::size_t pos_;
    std::size_t end_;
};

GooseApdu decode_goose_pdu(Reader& r) {
    Reader pdu = r.expect(kTagGoosePdu, "goosePdu");
    GooseApdu g;
    { auto f = pdu.expect(kTagGocbRef, "gocbRef"); g.gocb_ref = f.text(kMaxTextField); }
    { auto f = pdu.expect(kTagTimeAllowedToLive, "timeAllowedToLive"); g.time_allowed_to_live_ms = f.unsigned_integer(); }
    { auto f = pdu.expect(kTagDatSet, "datSet"); g.dat_set = f.text(kMaxTextField); }
    { auto f = pdu.expect(kTagGoId, "goID"); g.go_id = f.text(kMaxTextField); }
    {
        auto f = pdu.expect(kTagTime, "t");
        f.fixed(8);
        const std::uint32_t seconds = (static_cast<std::uint32_t>(f.u16()) << 16) | f.u16();
        const std::uint32_t hi = f.u8();
        const std::uint32_t fraction = (hi << 16) | f.u16();
        f.u8();  // quality
        g.timestamp_ns = utc_time_ns(seconds, fraction);
    }
    { auto f = pdu.expect(kTagStNum, "stNum"); g.st_num = f.unsigned_integer(); }
    { auto f = pdu.expect(kTagSqNum, "sqNum"); g.sq_num = f.unsigned_integer(); }
    { auto f = pdu.expect(kTagTest, "simulation"); g.test = f.boolean(); }
    { auto f = pdu.expect(kTagConfRev, "confRev"); g.conf_rev = f.unsigned_integer(); }
    { auto f = pdu.expect(kTagNdsCom, "ndsCom"); g.nds_com = f.boolean(); }
    const std::size_t entries_pos = pdu.pos();
    { auto f = pdu.expect(kTagNumDatSetEntries, "numDatSetEntries"); g.num_dat_set_entries = f.unsigned_integer(); }
    {
        auto data = pdu.expect(kTagAllData, "allData");
        while (!data.at_end()) {
            auto member = data.expect(kTagDataBoolean, "boolean data member");
            g.all_data.push_back(member.boolean());
        }
    }
    pdu.finish("goosePdu");
    if (g.all_data.size() != g.num_dat_set_entries) {
        throw Malformed{entries_pos, "numDatSetEntries does not match allData"};
    }
    return g;
}

SvApdu decode_sav_pdu(Reader& r) {
    Reader pdu = r.expect(kTagSavPdu, "savPdu");
    {
        auto f = pdu.expect(kTagNoAsdu, "noASDU");
        const std::size_t at = f.pos();
        if (f.unsigned_integer() != 1) {
            throw Malformed{at, "only one ASDU per frame is supported"};
        }
    }
    Reader seq = pdu.expect(kTagSeqAsdu, "seqASDU");
    pdu.finish("savPdu");
    Reader asdu = seq.expect(kTagAsdu, "ASDU");
    seq.finish("seqASDU");

    SvApdu s;
    { auto f = asdu.expect(kTagSvId, "svID"); s.sv_id = f.text(kMaxTextField); }
    { auto f = asdu.expect(kTagSmpCnt, "smpCnt"); f.fixed(2); s.smp_cnt = f.u16(); }
    {
        auto f = asdu.expect(kTagSvConfRev, "confRev");
        f.fixed(4);
        s.conf_rev = (static_cast<std::uint32_t>(f.u16()) << 16) | f.u16();
    }
    {
        auto f = asdu.expect(kTagSmpSynch, "smpSynch");
        f.fixed(1);
        const std::size_t at = f.pos();
        const std::uint8_t v = f.u8();
        if (v > 2) {
            throw Malformed{at, "unsupported smpSynch value"};
        }
        s.smp_synch = static_cast<SmpSynch>(v);
    }
    {
        auto f = asdu.expect(kTagSeqData, "seqData");
        f.fixed(kSvChannels * 8);
        for (auto& sample : s.samples) {
            const std::uint32_t raw = (static_cast<std::uint32_t>(f.u16()) << 16) | f.u16();
            sample.value = static_cast<std::int32_t>(raw);
            sample.quality = (static_cast<std::uint32_t>(f.u16()) << 16) | f.u16();
        }
    }
    asdu.finish("ASDU");
    return s;
}

}  // namespace

MacAddress MacAddress::parse(std::string_view text) {
    MacAddress mac;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < 6; ++i) {
        if (pos + 2 > text.size()) {
            throw std::invalid_argument("bad MAC address: " + std::string(text));
        }
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + 2, value, 16);
        if (ec != std::errc{} || ptr != text.data() + pos + 2) {
            throw std::invalid_argument("bad MAC address: " + std::string(text));
        }
        mac.octets[i] = static_cast<std::uint8_t>(value);
        pos += 2;
        if (i < 5) {
            if (pos >= text.size() || (text[pos] != ':' && text[pos] != '-')) {
                throw std::invalid_argument("bad MAC address: " + std::string(text));
            }
            ++pos;
        }
    }
    if (pos != text.size()) {
        throw std::invalid_argument("bad MAC address: " + std::string(text));
    }
    return mac;
}

std::string MacAddress::to_string() const {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", octets[0], octets[1], octets[2], octets[3],
                  octets[4], octets[5]);
    return buf;
}

std::uint64_t MacAddress::as_u64() const {
    std::uint64_t v = 0;
    for (auto o : octets) {
        v = (v << 8) | o;
    }
    return v;
}

bool MacAddress::is_goose_multicast() const {
    return octets[0] == 0x01 && octets[1] == 0x0C && octets[2] == 0xCD && octets[3] == 0x01;
}

bool MacAddress::is_sv_multicast() const {
    return octets[0] == 0x01 && octets[1] == 0x0C && octets[2] == 0xCD && octets[3] == 0x04;
}

std::uint64_t quantize_utc_ns(std::uint64_t ns) {
    const Bytes b = utc_time_bytes(ns);
    const std::uint32_t seconds = (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
                                  (static_cast<std::uint32_t>(b[2]) << 8) | b[3];
    const std::uint32_t fraction = (static_cast<std::uint32_t>(b[4]) << 16) | (static_cast<std::uint32_t>(b[5]) << 8) | b[6];
    return utc_time_ns(seconds, fraction);
}

Bytes encode_goose(const GooseApdu& apdu, const FrameHeader& header) {
    if (apdu.num_dat_set_entries != apdu.all_data.size()) {
        throw EncodeError("numDatSetEntries must equal the allData length");
    }
    Bytes body;
    put_text(body, kTagGocbRef, apdu.gocb_ref, "gocbRef");
    put_unsigned(body, kTagTimeAllowedToLive, apdu.time_allowed_to_live_ms);
    put_text(body, kTagDatSet, apdu.dat_set, "datSet");
    put_text(body, kTagGoId, apdu.go_id, "goID");
    put_tlv(body, kTagTime, utc_time_bytes(apdu.timestamp_ns));
    put_unsigned(body, kTagStNum, apdu.st_num);
    put_unsigned(body, kTagSqNum, apdu.sq_num);
    put_bool(body, kTagTest, apdu.test);
    put_unsigned(body, kTagConfRev, apdu.conf_rev);
    put_bool(body, kTagNdsCom, apdu.nds_com);
    put_unsigned(body, kTagNumDatSetEntries, apdu.num_dat_set_entries);
    Bytes members;
    for (bool member : apdu.all_data) {
        put_bool(members, kTagDataBoolean, member);
    }
    put_tlv(body, kTagAllData, members);

    Bytes pdu;
    put_tlv(pdu, kTagGoosePdu, body);
    return finish_frame(frame_prefix(header, kEtherTypeGoose), header.appid, pdu);
}

Bytes encode_sv(const SvApdu& apdu, const FrameHeader& header) {
    Bytes asdu;
    put_text(asdu, kTagSvId, apdu.sv_id, "svID");
    {
        Bytes v;
        put_u16(v, apdu.smp_cnt);
        put_tlv(asdu, kTagSmpCnt, v);
    }
    {
        Bytes v;
        put_u32(v, apdu.conf_rev);
        put_tlv(asdu, kTagSvConfRev, v);
    }
    put_tlv(asdu, kTagSmpSynch, Bytes{static_cast<std::uint8_t>(apdu.smp_synch)});
    {
        Bytes v;
        v.reserve(kSvChannels * 8);
        for (const auto& sample : apdu.samples) {
            put_u32(v, static_cast<std::uint32_t>(sample.value));
            put_u32(v, sample.quality);
        }
        put_tlv(asdu, kTagSeqData, v);
    }

    Bytes seq;
    put_tlv(seq, kTagAsdu, asdu);
    Bytes body;
    put_unsigned(body, kTagNoAsdu, 1);
    put_tlv(body, kTagSeqAsdu, seq);
    Bytes pdu;
    put_tlv(pdu, kTagSavPdu, body);
    return finish_frame(frame_prefix(header, kEtherTypeSv), header.appid, pdu);
}

bool peek_header(ByteView bytes, HeaderView& out) {
    if (bytes.size() < kEthernetHeaderSize) {
        return false;
    }
    std::copy_n(bytes.begin(), 6, out.dst.octets.begin());
    std::copy_n(bytes.begin() + 6, 6, out.src.octets.begin());
    std::size_t pos = 12;
    out.ethertype = static_cast<std::uint16_t>((bytes[pos] << 8) | bytes[pos + 1]);
    pos += 2;
    if (out.ethertype == kEtherTypeVlan && bytes.size() >= pos + 4) {
        out.ethertype = static_cast<std::uint16_t>((bytes[pos + 2] << 8) | bytes[pos + 3]);
        pos += 4;
    }
    out.has_appid = false;
    out.appid = 0;
    if ((out.ethertype == kEtherTypeGoose || out.ethertype == kEtherTypeSv) && bytes.size() >= pos + 2) {
        out.appid = static_cast<std::uint16_t>((bytes[pos] << 8) | bytes[pos + 1]);
        out.has_appid = true;
    }
    return true;
}

Decoded decode_frame(ByteView bytes) {
    if (bytes.size() < kEthernetHeaderSize) {
        return DecodeError{bytes.size(), "frame shorter than an Ethernet header", 0};
    }
    MacAddress dst;
    MacAddress src;
    std::copy_n(bytes.begin(), 6, dst.octets.begin());
    std::copy_n(bytes.begin() + 6, 6, src.octets.begin());
    std::uint16_t ethertype = static_cast<std::uint16_t>((bytes[12] << 8) | bytes[13]);
    std::size_t pos = kEthernetHeaderSize;
    if (ethertype == kEtherTypeVlan) {
        if (bytes.size() < pos + 4) {
            return DecodeError{bytes.size(), "truncated VLAN tag", ethertype};
        }
        ethertype = static_cast<std::uint16_t>((bytes[pos + 2] << 8) | bytes[pos + 3]);
        pos += 4;
    }
    if (ethertype != kEtherTypeGoose && ethertype != kEtherTypeSv) {
        return OpaqueFrame{dst, src, ethertype, Bytes(bytes.begin(), bytes.end())};
    }

    try {
        Reader session(bytes, pos, bytes.size());
        const std::uint16_t appid = session.u16();
        const std::size_t length_pos = session.pos();
        const std::uint16_t length = session.u16();
        session.u16();
        session.u16();
        if (length < kSessionHeaderSize) {
            throw Malformed{length_pos, "length field smaller than the session header"};
        }
        if (pos + length > bytes.size()) {
            throw Malformed{length_pos, "length field exceeds the frame"};
        }
        Reader apdu(bytes, pos + kSessionHeaderSize, pos + length);
        FrameHeader header{dst, src, appid};
        if (ethertype == kEtherTypeGoose) {
            GooseFrame frame{header, length, decode_goose_pdu(apdu)};
            apdu.finish("GOOSE APDU");
            return frame;
        }
        SvFrame frame{header, length, decode_sav_pdu(apdu)};
        apdu.finish("SV APDU");
        return frame;
    } catch (const Malformed& m) {
        return DecodeError{m.offset, m.message, ethertype};
    }
}

}  // namespace scs::codec
