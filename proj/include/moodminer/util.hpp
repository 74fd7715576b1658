#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace moodminer {

// All randomness flows from one master seed. Components derive their own
// stream by hashing the component name into the seed, so adding a new
// consumer never shifts the draws of an existing one.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component);
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::string_view component) {
  return Rng(derive_seed(master, component));
}
inline Rng make_rng(std::uint64_t master, std::string_view component,
                    std::uint64_t index) {
  return Rng(derive_seed(master, component, index));
}

// FNV-1a, used for input fingerprints in run manifests and leakage checks.
std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64(std::string_view s);
std::string hash_file_hex(const std::string& path);  // throws on I/O error

// Epoch seconds <-> ISO-8601 (UTC, second resolution).
// parse_instant accepts "YYYY-MM-DDTHH:MM:SS[Z]", "YYYY-MM-DD HH:MM:SS",
// "YYYY-MM-DD", or a plain integer of epoch seconds.
std::optional<std::int64_t> parse_instant(std::string_view text);
std::string format_instant(std::int64_t epoch_seconds);

// Minimal CSV helpers. The schemas used here never need quoting.
std::vector<std::string> split_csv_line(std::string_view line, char delim = ',');
std::string trim(std::string_view s);
std::string lower(std::string_view s);

double logsumexp(const double* v, std::size_t n);
double clamp_prob(double p);        // into [1e-6, 1 - 1e-6]
double logit(double x);             // after clamping into [1e-3, 1 - 1e-3]
double sigmoid(double x);

// Number of worker threads: MOODMINER_THREADS, 0 or unset meaning auto.
unsigned worker_threads();

// Runs fn(i) for i in [0, n) across worker threads. Callers that need
// determinism write into per-index slots and reduce sequentially afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Formats a double with enough digits to round-trip exactly.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);  // throws on I/O error

std::int64_t days_to_seconds(double days);
double seconds_to_hours(std::int64_t s);
double seconds_to_minutes(std::int64_t s);

}  // namespace moodminer
