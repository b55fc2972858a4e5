#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pumpwatch/panel.hpp"

namespace pumpwatch {

// Deterministic synthetic market with injected coordinated pumps.
//
// Tokens are partitioned into contiguous clusters that share a latent
// activity process (AR(1)), so trade counts co-move within a cluster and a
// correlation graph has real structure to recover. Two kinds of spikes sit
// on top of that baseline and draw from the same multiplier ranges:
//
//  * pumps hit ONE token (activity, buy pressure, price run-up, then a
//    partial dump) and label their first hour;
//  * hype bursts hit EVERY member of a cluster at once, carry no label and
//    never dump.
//
// A single token's candles therefore look the same during either event;
// whether its neighbors spiked too is what tells them apart, which is
// exactly the signal a graph model can use and a per-token model cannot.
struct SynthConfig {
    std::int64_t n_tokens = 20;
    std::int64_t n_hours = 4000;
    std::int64_t n_pumps = 40;
    std::int64_t n_clusters = 4;

    double trades_mult_lo = 10.0, trades_mult_hi = 18.0;  // spike hour multiplier
    double vol_mult_lo = 8.0, vol_mult_hi = 15.0;
    double spillover = 0.08;  // fraction of the pump boost partners receive

    double drift = 0.0;        // hourly log-price drift
    double price_vol = 0.015;  // hourly log-price stddev

    double latent_phi = 0.92;    // cluster activity AR(1) coefficient
    double latent_sigma = 0.25;  // AR(1) innovation stddev (log scale)
    double idio_sigma = 0.2;     // per-token activity noise (log scale)
    double burst_rate = 1.0 / 200.0;        // per-cluster burst starts per hour
    double burst_lo = 0.7, burst_hi = 1.3;  // per-member burst intensity jitter

    std::int64_t start_ts = 1609459200;  // 2021-01-01T00:00:00Z
    std::uint64_t seed = 42;

    void validate() const;
};

SynthConfig synth_config_from_kv(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> synth_config_to_kv(const SynthConfig& cfg);

struct SynthEvent {
    std::int64_t token = 0;
    std::string symbol;
    std::int64_t ts = 0;
    std::int64_t cluster = 0;
    double spike_factor = 0.0;  // trades multiplier at the labeled hour
    std::int64_t duration = 1;  // boosted hours
};

struct SynthResult {
    Panel panel;
    std::vector<SynthEvent> events;  // sorted by (ts, token)
};

// All randomness comes from one splitmix-seeded stream, so equal configs
// generate bit-identical panels. Throws ConfigInfeasible when the requested
// pumps cannot be placed with the minimum per-token spacing.
SynthResult generate(const SynthConfig& cfg);

// Ground-truth CSV: symbol,timestamp_utc,cluster,spike_factor.
void write_truth_csv(const std::string& path, const std::vector<SynthEvent>& events);

}  // namespace pumpwatch
