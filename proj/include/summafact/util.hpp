#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace summafact {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);

/// Replaces every occurrence of `{key}` in `tmpl` with `value`.
std::string render_placeholder(std::string_view tmpl, std::string_view key,
                               std::string_view value);

/// Fixed-point decimal formatting ("%.4f" by default); "-0.0000" is
/// normalized to "0.0000" so emitted artifacts stay byte-stable.
std::string format_fixed(double value, int places = 4);

/// Rounds to `places` decimals for JSON emission.
double round_to(double value, int places = 4);

std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a, used to seed per-token mock embeddings.
std::uint64_t fnv1a64(std::string_view data);

/// SplitMix64 step; deterministic stream for mock vectors.
std::uint64_t splitmix64(std::uint64_t& state);

std::string read_file(const std::string& path);

}  // namespace summafact
