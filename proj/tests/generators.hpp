#pragma once

// Random value generators shared by the property-style tests.

#include <random>
#include <string>

#include "scs/codec.hpp"

namespace scs::testing {

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
    static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789$/_.";
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, sizeof(kAlphabet) - 2);
    std::string s(len(rng), ' ');
    for (auto& c : s) c = kAlphabet[pick(rng)];
    return s;
}

inline std::uint32_t random_u32(std::mt19937_64& rng) {
    // Bias toward encoding-length boundaries.
    switch (rng() % 4) {
        case 0: return static_cast<std::uint32_t>(rng() % 256);
        case 1: return static_cast<std::uint32_t>(rng() % 65536);
        case 2: return 0x7FFFFFFFu + static_cast<std::uint32_t>(rng() % 3);
        default: return static_cast<std::uint32_t>(rng());
    }
}

inline codec::MacAddress random_mac(std::mt19937_64& rng) {
    codec::MacAddress m;
    for (auto& o : m.octets) o = static_cast<std::uint8_t>(rng());
    return m;
}

inline codec::FrameHeader random_header(std::mt19937_64& rng) {
    return {random_mac(rng), random_mac(rng), static_cast<std::uint16_t>(rng())};
}

inline codec::GooseApdu random_goose(std::mt19937_64& rng) {
    codec::GooseApdu g;
    g.gocb_ref = random_text(rng, codec::kMaxTextField);
    g.time_allowed_to_live_ms = random_u32(rng);
    g.dat_set = random_text(rng, codec::kMaxTextField);
    g.go_id = random_text(rng, codec::kMaxTextField);
    g.timestamp_ns = codec::quantize_utc_ns(rng() % (0xFFFFFFFFULL * 1'000'000'000ULL));
    g.st_num = random_u32(rng);
    g.sq_num = random_u32(rng);
    g.test = rng() & 1;
    g.conf_rev = random_u32(rng);
    g.nds_com = rng() & 1;
    const std::size_t n = rng() % 40;
    for (std::size_t i = 0; i < n; ++i) g.all_data.push_back(rng() & 1);
    g.num_dat_set_entries = static_cast<std::uint32_t>(n);
    return g;
}

inline codec::SvApdu random_sv(std::mt19937_64& rng) {
    codec::SvApdu s;
    s.sv_id = random_text(rng, codec::kMaxTextField);
    s.smp_cnt = static_cast<std::uint16_t>(rng() % 4800);
    s.conf_rev = random_u32(rng);
    s.smp_synch = static_cast<codec::SmpSynch>(rng() % 3);
    for (auto& sample : s.samples) {
        sample.value = static_cast<std::int32_t>(rng());
        sample.quality = static_cast<std::uint32_t>(rng() % 0x4000);
    }
    return s;
}

}  // namespace scs::testing
