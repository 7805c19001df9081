#pragma once

// Ethernet framing and BER-TLV encode/decode for IEC 61850 GOOSE (8-1) and
// sampled values (9-2 light edition). See docs/wire_format.md for the tag table.

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace scs::codec {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline constexpr std::uint16_t kEtherTypeGoose = 0x88B8;
inline constexpr std::uint16_t kEtherTypeSv = 0x88BA;
inline constexpr std::uint16_t kEtherTypeVlan = 0x8100;

inline constexpr std::size_t kEthernetHeaderSize = 14;
inline constexpr std::size_t kSessionHeaderSize = 8;  // APPID, Length, Reserved1, Reserved2
inline constexpr std::size_t kMaxTextField = 65;
inline constexpr std::size_t kSvChannels = 8;

struct MacAddress {
    std::array<std::uint8_t, 6> octets{};

    static MacAddress parse(std::string_view text);
    std::string to_string() const;
    std::uint64_t as_u64() const;

    bool is_goose_multicast() const;
    bool is_sv_multicast() const;

    auto operator<=>(const MacAddress&) const = default;
};

// Addressing fields a publisher supplies; ethertype follows from the APDU kind.
struct FrameHeader {
    MacAddress dst;
    MacAddress src;
    std::uint16_t appid = 0;

    bool operator==(const FrameHeader&) const = default;
};

struct GooseApdu {
    std::string gocb_ref;
    std::uint32_t time_allowed_to_live_ms = 0;
    std::string dat_set;
    std::string go_id;
    std::uint64_t timestamp_ns = 0;
    std::uint32_t st_num = 1;
    std::uint32_t sq_num = 0;
    bool test = false;
    std::uint32_t conf_rev = 1;
    bool nds_com = false;
    std::uint32_t num_dat_set_entries = 0;
    std::vector<bool> all_data;

    bool operator==(const GooseApdu&) const = default;
};

enum class SmpSynch : std::uint8_t { none = 0, local = 1, global = 2 };

struct SvSample {
    std::int32_t value = 0;
    std::uint32_t quality = 0;

    bool operator==(const SvSample&) const = default;
};

// Channel order: Ia, Ib, Ic, In (mA), Va, Vb, Vc, Vn (10 mV units).
struct SvApdu {
    std::string sv_id;
    std::uint16_t smp_cnt = 0;
    std::uint32_t conf_rev = 1;
    SmpSynch smp_synch = SmpSynch::global;
    std::array<SvSample, kSvChannels> samples{};

    bool operator==(const SvApdu&) const = default;
};

struct GooseFrame {
    FrameHeader header;
    std::uint16_t length = 0;
    GooseApdu apdu;
};

struct SvFrame {
    FrameHeader header;
    std::uint16_t length = 0;
    SvApdu apdu;
};

struct OpaqueFrame {
    MacAddress dst;
    MacAddress src;
    std::uint16_t ethertype = 0;
    Bytes bytes;
};

struct DecodeError {
    std::size_t offset = 0;
    std::string message;
    std::uint16_t ethertype = 0;
};

using Decoded = std::variant<GooseFrame, SvFrame, OpaqueFrame, DecodeError>;

class EncodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Bytes encode_goose(const GooseApdu& apdu, const FrameHeader& header);
Bytes encode_sv(const SvApdu& apdu, const FrameHeader& header);

// Never throws; malformed 61850 payloads come back as DecodeError.
Decoded decode_frame(ByteView bytes);

// Cheap header peek used by the switch matcher and host filters.
struct HeaderView {
    MacAddress dst;
    MacAddress src;
    std::uint16_t ethertype = 0;
    std::uint16_t appid = 0;
    bool has_appid = false;
};
bool peek_header(ByteView bytes, HeaderView& out);

// Round to the nearest instant representable in an 8-byte UtcTime field.
std::uint64_t quantize_utc_ns(std::uint64_t ns);

}  // namespace scs::codec
