// Copyright 2026-present the Squrve project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace squrve {

/// FNV-1a 64-bit. Stable across platforms; used for mock-backend prompt
/// keying, the hashing embedder, and config digests.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t basis = 0xcbf29ce484222325ull) {
  std::uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

/// ASCII lowercase fold. Identifier comparison in benchmark SQL is
/// case-insensitive; stored casing is preserved for display.
std::string lower_ascii(std::string_view s);

/// Strips one layer of surrounding identifier quotes (`x`, "x", [x], 'x').
std::string strip_quotes(std::string_view s);

/// Lowercase fold plus quote stripping; the normal form used for every
/// schema-element comparison.
std::string normalize_identifier(std::string_view s);

std::string trim(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

std::vector<std::string> split(std::string_view s, char sep);

/// Current wall-clock time as ISO-8601 UTC ("2026-01-02T03:04:05Z").
std::string iso8601_now();

/// Reads a whole file; throws IoError when unreadable.
std::string read_file(const std::string& path);

/// Writes a whole file, creating parent directories; throws IoError.
void write_file(const std::string& path, std::string_view content);

}  // namespace squrve
