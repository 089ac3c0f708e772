// Small shared helpers: number formatting, hashing, parallel loops.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace eqf {

// Shortest decimal string that parses back to exactly the same double.
std::string format_exact(double v);

// Fixed 12-significant-digit formatting used for report outputs.
std::string format_sig12(double v);

// Round a double to 12 significant decimal digits (for JSON report payloads).
double round_sig12(double v);

// FNV-1a 64-bit, hex-encoded; used for config manifests.
std::string fnv1a_hex(std::string_view bytes);

// Thread budget: EQFORWARD_THREADS if set (>0), else hardware concurrency.
int thread_budget();

// Runs fn(i) for i in [0, n); parallel when the budget allows, ordered
// results are the caller's responsibility (fn writes into its own slot).
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace eqf
