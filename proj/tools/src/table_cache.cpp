#include "qdm/cli/table_cache.hpp"

#include <charconv>
#include <fstream>
#include <mutex>
#include <sstream>
#include <system_error>

#include "qdm/csv.hpp"
#include "qdm/error.hpp"

namespace qdm::cli {
namespace {

void put(std::string& out, double x) {
  out += ' ';
  out += format_number(x);
}

void put_matrix(std::string& out, const TransitionMatrix& m) {
  for (int r = 0; r < kTransitionCount; ++r) {
    for (int c = 0; c < kTransitionCount; ++c) {
      put(out, m(r, c).real());
      put(out, m(r, c).imag());
    }
  }
}

bool read_matrix(std::istringstream& in, TransitionMatrix& m) {
  for (int r = 0; r < kTransitionCount; ++r) {
    for (int c = 0; c < kTransitionCount; ++c) {
      double re, im;
      if (!(in >> re >> im)) return false;
      m(r, c) = cplx(re, im);
    }
  }
  return true;
}

std::mutex& cache_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::string spectral_cache_key(const AxialBasis& basis, const MaterialParams& material,
                               const SpectralTableOptions& options) {
  std::string text = "v" + std::to_string(kCacheFormatVersion);
  for (double x : {material.effective_mass, material.eps_r, material.density,
                   material.sound_longitudinal, material.sound_transverse,
                   material.deformation_potential, material.piezo_constant,
                   material.oscillator_length, material.well_depth, material.dot_height,
                   options.max_energy, options.knee, basis.grid.z_min, basis.grid.z_max,
                   basis.midpoint}) {
    put(text, x);
  }
  text += ' ' + std::to_string(options.n_points) + ' ' + std::to_string(options.theta_nodes) + ' ' +
          std::to_string(basis.grid.n_points);
  std::uint64_t h = fnv1a(text);
  const auto mix = [&](const std::vector<double>& v) {
    const std::string_view bytes(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    h ^= fnv1a(bytes) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  };
  mix(basis.xi_bottom);
  mix(basis.xi_top);
  return hex64(h);
}

void save_tables(const std::filesystem::path& file, const std::string& key,
                 const SpectralTables& tables) {
  std::string out = "qdm-spectral-cache " + std::to_string(kCacheFormatVersion) + "\n";
  out += "key " + key + "\n";
  out += "grid";
  put(out, tables.grid.max_energy());
  out += ' ' + std::to_string(tables.grid.size());
  put(out, tables.grid.knee());
  out += "\nzero_slope";
  put_matrix(out, tables.zero_slope);
  out += '\n';
  const auto e = tables.grid.energies();
  for (std::size_t i = 0; i < e.size(); ++i) {
    out += "row";
    put(out, e[i]);
    for (const auto& ch : tables.channels) put_matrix(out, ch[i]);
    out += '\n';
  }
  std::filesystem::create_directories(file.parent_path());
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw ConfigError("cannot write cache file '" + tmp + "'");
    f << out;
  }
  std::filesystem::rename(tmp, file);
}

std::optional<SpectralTables> load_tables(const std::filesystem::path& file,
                                          const std::string& key) {
  std::ifstream f(file);
  if (!f) return std::nullopt;
  std::string line;
  if (!std::getline(f, line) || line != "qdm-spectral-cache " + std::to_string(kCacheFormatVersion)) {
    return std::nullopt;
  }
  if (!std::getline(f, line) || line != "key " + key) return std::nullopt;
  if (!std::getline(f, line)) return std::nullopt;
  std::istringstream g(line);
  std::string tag;
  double max_energy, knee;
  std::size_t n;
  if (!(g >> tag >> max_energy >> n >> knee) || tag != "grid" || n < 16) return std::nullopt;

  SpectralTables t;
  if (!std::getline(f, line)) return std::nullopt;
  std::istringstream z(line);
  if (!(z >> tag) || tag != "zero_slope" || !read_matrix(z, t.zero_slope)) return std::nullopt;

  std::vector<double> energies;
  for (auto& ch : t.channels) ch.resize(n);
  t.total.assign(n, TransitionMatrix::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(f, line)) return std::nullopt;
    std::istringstream r(line);
    double e;
    if (!(r >> tag >> e) || tag != "row") return std::nullopt;
    energies.push_back(e);
    for (auto& ch : t.channels) {
      if (!read_matrix(r, ch[i])) return std::nullopt;
    }
    for (const auto& ch : t.channels) t.total[i] += ch[i];
  }
  // Rebuild the grid and insist it reproduces the stored nodes exactly.
  try {
    t.grid = SpectralGrid(max_energy, n, knee);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  const auto rebuilt = t.grid.energies();
  for (std::size_t i = 0; i < n; ++i) {
    if (rebuilt[i] != energies[i]) return std::nullopt;
  }
  return t;
}

TablesProvider caching_provider(const std::filesystem::path& directory) {
  return [directory](const AxialBasis& basis, const MaterialParams& material,
                     const SpectralTableOptions& options) -> std::shared_ptr<const SpectralTables> {
    const std::string key = spectral_cache_key(basis, material, options);
    const auto file = directory / ("spectral_" + key + ".txt");
    {
      std::lock_guard lock(cache_mutex());
      if (auto hit = load_tables(file, key)) return std::make_shared<const SpectralTables>(std::move(*hit));
    }
    auto built = std::make_shared<const SpectralTables>(spectral_density_tables(basis, material, options));
    std::lock_guard lock(cache_mutex());
    save_tables(file, key, *built);
    return built;
  };
}

}  // namespace qdm::cli
