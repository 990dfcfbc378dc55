#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace qdm {

/// Shortest round-trip decimal form; identical input gives identical text.
std::string format_number(double value);

/// RFC 4180 quoting when the field needs it.
std::string csv_field(std::string_view text);

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t value);

}  // namespace qdm
