#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "qdm/protocols.hpp"

namespace qdm::cli {

inline constexpr int kCacheFormatVersion = 1;

std::string spectral_cache_key(const AxialBasis& basis, const MaterialParams& material,
                               const SpectralTableOptions& options);

void save_tables(const std::filesystem::path& file, const std::string& key,
                 const SpectralTables& tables);

/// Empty when the file is missing, has another key or version, or is damaged.
std::optional<SpectralTables> load_tables(const std::filesystem::path& file,
                                          const std::string& key);

/// Provider for build_model that reads and fills `directory`.
TablesProvider caching_provider(const std::filesystem::path& directory);

}  // namespace qdm::cli
