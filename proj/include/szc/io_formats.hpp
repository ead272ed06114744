#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "szc/agents.hpp"
#include "szc/dynamics.hpp"
#include "szc/neural.hpp"
#include "szc/protocol.hpp"
#include "szc/spectrum.hpp"

namespace szc {

// Shortest round-trip decimal form, locale independent (std::to_chars).
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// {"T": ..., "knots": [{"t": ..., "alpha": ...}, ...],
//  "alpha_unit": "E0L", "interpolation": "natural-cubic"}
std::string protocol_to_json(const Protocol& protocol);
Protocol protocol_from_json(const std::string& text);  // errors name the offending field
void save_protocol(const Protocol& protocol, const std::filesystem::path& path);
Protocol load_protocol(const std::filesystem::path& path);

// {"arch": [...], "activation": "relu", "layers": [{"w": [[...]], "b": [...]}],
//  "output": {"type": "linear" | "tanh_scaled", "scale": ...}, "adam": { ... }}
std::string network_to_json(const DenseNet& net, const AdamState* adam = nullptr);
DenseNet network_from_json(const std::string& text, AdamState* adam = nullptr);
void save_network(const DenseNet& net, const std::filesystem::path& path,
                  const AdamState* adam = nullptr);
DenseNet load_network(const std::filesystem::path& path, AdamState* adam = nullptr);

// CSV builders; every table carries a header row.
std::string spectrum_csv(const Spectrum& spectrum);                       // n,E_n,k_n
std::string trajectory_csv(const std::vector<AmplitudeState>& trajectory);  // t,alpha,occ_1..occ_N
std::string sweep_csv(const std::vector<SweepRow>& rows);  // d,occ1_T,occ2_T,occ_higher_T
std::string reward_history_csv(const std::vector<EpisodeStat>& history);
// episode,cumulative_reward,epsilon_or_sigma

}  // namespace szc
