#pragma once

// Classic libpcap capture files: magic 0xa1b2c3d4, version 2.4, linktype 1 (Ethernet),
// microsecond timestamps taken from the virtual clock.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "scs/codec.hpp"
#include "scs/event_log.hpp"

namespace scs::pcap {

inline constexpr std::uint32_t kMagic = 0xa1b2c3d4;
inline constexpr std::uint16_t kVersionMajor = 2;
inline constexpr std::uint16_t kVersionMinor = 4;
inline constexpr std::uint32_t kSnapLen = 65535;
inline constexpr std::uint32_t kLinkTypeEthernet = 1;
inline constexpr std::size_t kGlobalHeaderSize = 24;

struct CaptureRecord {
    SimTime time = 0;
    std::uint64_t frame_id = 0;
    std::shared_ptr<const codec::Bytes> frame;
};

void write(std::ostream& out, const std::vector<CaptureRecord>& records);
codec::Bytes to_bytes(const std::vector<CaptureRecord>& records);
void write_file(const std::string& path, const std::vector<CaptureRecord>& records);

struct ReadRecord {
    std::uint32_t ts_sec = 0;
    std::uint32_t ts_usec = 0;
    codec::Bytes frame;
};

// Parses a capture produced by `write`; throws std::runtime_error on a bad header or truncation.
std::vector<ReadRecord> read(codec::ByteView bytes);

}  // namespace scs::pcap
