#pragma once

#include <map>
#include <string>
#include <vector>

#include "lrlcm/diagnostics.hpp"
#include "lrlcm/model.hpp"
#include "lrlcm/sampler.hpp"
#include "lrlcm/simulation.hpp"

namespace lrlcm {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Dataset CSV: responses in long format `n,t,y_1..y_J` (NA rows for missing),
// covariates `n,t,x_1..x_D`. Respondent and time ids are 1-based and must
// cover a full N x T grid.
// ---------------------------------------------------------------------------

Dataset load_dataset(const std::string& y_path, const std::string& x_path,
                     const std::vector<int>& M);
void save_dataset(const Dataset& data, const std::string& y_path,
                  const std::string& x_path);

// ---------------------------------------------------------------------------
// Chain container: plain-text header (magic, version, JSON metadata) followed
// by little-endian float64 blocks. Round-trips are byte-exact.
// ---------------------------------------------------------------------------

void save_chain(const Chain& chain, const std::string& path);
Chain load_chain(const std::string& path);

// ---------------------------------------------------------------------------
// Flat key-value config with one section per command. Unknown keys are
// rejected; values keep their raw text until typed access.
// ---------------------------------------------------------------------------

class RunConfig {
public:
  static RunConfig parse_file(const std::string& path);
  static RunConfig parse_text(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_num(const std::string& section, const std::string& key) const;
  double get_num_or(const std::string& section, const std::string& key,
                    double fallback) const;
  long long get_int_or(const std::string& section, const std::string& key,
                       long long fallback) const;

  /// Throws if the section holds keys outside `allowed`.
  void require_known_keys(const std::string& section,
                          const std::vector<std::string>& allowed) const;
  bool has_section(const std::string& section) const;

  const std::string& raw_text() const { return raw_; }

private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string raw_;
};

/// FNV-1a hash of the config text, recorded in run manifests.
std::string config_hash(const std::string& text);

void write_manifest(const std::string& out_dir, const std::string& command,
                    std::uint64_t seed, const std::string& cfg_hash);

// ---------------------------------------------------------------------------
// Matrix CSV helpers (simulate's truth files, diagnostic tables).
// ---------------------------------------------------------------------------

void save_matrix_csv(const arma::mat& m, const std::string& path,
                     const std::vector<std::string>& col_names = {});
arma::mat load_matrix_csv(const std::string& path, bool has_header);

// ---------------------------------------------------------------------------
// Batch commands. Each returns 0 on success and writes its artifacts under
// the configured output directory.
// ---------------------------------------------------------------------------

struct CliOverrides {
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string out_dir;  // empty = use config
  int threads = 0;      // 0 = use config / hardware
};

int cmd_simulate(const RunConfig& cfg, const CliOverrides& ov);
int cmd_fit(const RunConfig& cfg, const CliOverrides& ov);
int cmd_diagnose(const RunConfig& cfg, const CliOverrides& ov);
int cmd_waic(const RunConfig& cfg, const CliOverrides& ov);
int cmd_recover(const RunConfig& cfg, const CliOverrides& ov);

}  // namespace lrlcm
