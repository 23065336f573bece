#include "lrlcm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lrlcm/dist.hpp"
#include "lrlcm/identify.hpp"

namespace lrlcm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing text");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": cannot parse number '" + s + "'");
  }
}

long long parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing text");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": cannot parse integer '" + s + "'");
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first) {
      t.header = fields;
      first = false;
    } else {
      if (fields.size() != t.header.size())
        throw std::invalid_argument(path + ": ragged row at line " +
                                    std::to_string(line_no) + " (" +
                                    std::to_string(fields.size()) + " fields, expected " +
                                    std::to_string(t.header.size()) + ")");
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) throw std::invalid_argument(path + ": empty file");
  return t;
}

}  // namespace

Dataset load_dataset(const std::string& y_path, const std::string& x_path,
                     const std::vector<int>& M) {
  const CsvTable yt = read_csv(y_path);
  const CsvTable xt = read_csv(x_path);
  const int J = static_cast<int>(M.size());
  if (static_cast<int>(yt.header.size()) != 2 + J)
    throw std::invalid_argument(y_path + ": expected columns n,t,y_1..y_" +
                                std::to_string(J) + ", found " +
                                std::to_string(yt.header.size()));
  if (xt.header.size() < 2)
    throw std::invalid_argument(x_path + ": expected columns n,t,x_1..x_D");
  const int D = static_cast<int>(xt.header.size()) - 2;

  int N = 0, T = 0;
  for (const auto& r : yt.rows) {
    N = std::max(N, static_cast<int>(parse_int(r[0], y_path)));
    T = std::max(T, static_cast<int>(parse_int(r[1], y_path)));
  }
  if (N <= 0 || T <= 0) throw std::invalid_argument(y_path + ": no data rows");
  if (yt.rows.size() != static_cast<std::size_t>(N) * T)
    throw std::invalid_argument(y_path + ": expected " + std::to_string(N * T) +
                                " rows for a full N x T grid, found " +
                                std::to_string(yt.rows.size()));
  if (xt.rows.size() != yt.rows.size())
    throw std::invalid_argument(x_path + ": row count differs from " + y_path);

  Dataset d;
  d.Y.set_size(N, T, J);
  d.Y.fill(kMissing - 1);  // sentinel to detect duplicate/missing grid cells
  d.X.set_size(N, T, D);
  d.mask.set_size(N, T);
  d.mask.zeros();

  for (std::size_t i = 0; i < yt.rows.size(); ++i) {
    const auto& r = yt.rows[i];
    const std::string where = y_path + " row " + std::to_string(i + 2);
    const int n = static_cast<int>(parse_int(r[0], where)) - 1;
    const int t = static_cast<int>(parse_int(r[1], where)) - 1;
    if (n < 0 || n >= N || t < 0 || t >= T)
      throw std::invalid_argument(where + ": (n,t) id out of range");
    if (d.Y(n, t, 0) != kMissing - 1)
      throw std::invalid_argument(where + ": duplicate (n,t) row");
    int na_count = 0;
    for (int j = 0; j < J; ++j)
      if (trim(r[2 + j]) == "NA") ++na_count;
    if (na_count == J) {
      d.mask(n, t) = 1;
      for (int j = 0; j < J; ++j) d.Y(n, t, j) = kMissing;
    } else if (na_count > 0) {
      throw std::invalid_argument(where +
                                  ": partial NA row (missingness is per time point)");
    } else {
      for (int j = 0; j < J; ++j) {
        const long long y = parse_int(trim(r[2 + j]), where);
        if (y < 0 || y >= M[j])
          throw std::invalid_argument(
              where + ": item " + std::to_string(j + 1) + " value " +
              std::to_string(y) + " outside 0.." + std::to_string(M[j] - 1));
        d.Y(n, t, j) = static_cast<arma::sword>(y);
      }
    }
  }

  arma::umat seen(N, T, arma::fill::zeros);
  for (std::size_t i = 0; i < xt.rows.size(); ++i) {
    const auto& r = xt.rows[i];
    const std::string where = x_path + " row " + std::to_string(i + 2);
    const int n = static_cast<int>(parse_int(r[0], where)) - 1;
    const int t = static_cast<int>(parse_int(r[1], where)) - 1;
    if (n < 0 || n >= N || t < 0 || t >= T)
      throw std::invalid_argument(where + ": (n,t) id out of range");
    if (seen(n, t)) throw std::invalid_argument(where + ": duplicate (n,t) row");
    seen(n, t) = 1;
    for (int dd = 0; dd < D; ++dd)
      d.X(n, t, dd) = parse_double(trim(r[2 + dd]), where);
  }
  return d;
}

void save_dataset(const Dataset& data, const std::string& y_path,
                  const std::string& x_path) {
  std::ofstream y(y_path);
  if (!y) throw std::runtime_error("cannot write " + y_path);
  y << "n,t";
  for (int j = 0; j < data.J(); ++j) y << ",y_" << (j + 1);
  y << "\n";
  for (int n = 0; n < data.N(); ++n)
    for (int t = 0; t < data.T(); ++t) {
      y << (n + 1) << "," << (t + 1);
      for (int j = 0; j < data.J(); ++j) {
        if (data.mask(n, t))
          y << ",NA";
        else
          y << "," << data.Y(n, t, j);
      }
      y << "\n";
    }

  std::ofstream x(x_path);
  if (!x) throw std::runtime_error("cannot write " + x_path);
  x << "n,t";
  for (int dd = 0; dd < static_cast<int>(data.X.n_slices); ++dd)
    x << ",x_" << (dd + 1);
  x << "\n";
  for (int n = 0; n < data.N(); ++n)
    for (int t = 0; t < data.T(); ++t) {
      x << (n + 1) << "," << (t + 1);
      for (int dd = 0; dd < static_cast<int>(data.X.n_slices); ++dd)
        x << "," << fmt_double(data.X(n, t, dd));
      x << "\n";
    }
}

// --- Chain container --------------------------------------------------------

namespace {

constexpr const char* kChainMagic = "LRLCM-CHAIN v1";

void write_block(std::ofstream& out, const arma::mat& m) {
  out.write(reinterpret_cast<const char*>(m.memptr()),
            static_cast<std::streamsize>(m.n_elem * sizeof(double)));
}

arma::mat read_block(std::ifstream& in, arma::uword rows, arma::uword cols,
                     const std::string& path) {
  arma::mat m(rows, cols);
  in.read(reinterpret_cast<char*>(m.memptr()),
          static_cast<std::streamsize>(m.n_elem * sizeof(double)));
  if (!in)
    throw std::runtime_error(path + ": corrupt or truncated chain file");
  return m;
}

}  // namespace

void save_chain(const Chain& chain, const std::string& path) {
  nlohmann::json meta;
  meta["K"] = chain.K;
  meta["L"] = chain.L;
  meta["D"] = chain.D;
  meta["M"] = chain.M;
  meta["meas_order"] = chain.meas_order;
  meta["trans_order"] = chain.trans_order;
  meta["N"] = chain.N;
  meta["T"] = chain.T;
  meta["S"] = chain.n_draws();
  meta["sweep_order"] = chain.sweep_order;
  meta["column_convention"] = chain.column_convention;
  meta["config"] = {{"burn_in", chain.config.burn_in},
                    {"post_burn_in", chain.config.post_burn_in},
                    {"thin", chain.config.thin},
                    {"sigma_beta2", chain.config.sigma_beta2},
                    {"omega0", chain.config.omega0},
                    {"omega1", chain.config.omega1},
                    {"rate_a", chain.config.rate_a},
                    {"v0", chain.config.v0},
                    {"sigma_kappa2", chain.config.sigma_kappa2},
                    {"seed", chain.config.seed}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kChainMagic << "\n" << meta.dump() << "\nBINARY\n";
  write_block(out, chain.beta);
  write_block(out, chain.delta);
  write_block(out, chain.kappa);
  write_block(out, chain.gamma);
  write_block(out, chain.lambda);
  write_block(out, chain.xi);
  write_block(out, chain.R);
  write_block(out, chain.omega);
  write_block(out, chain.loglik);
  write_block(out, chain.kappa_accept_rate);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Chain load_chain(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open chain file: " + path);
  std::string magic, meta_line, marker;
  std::getline(in, magic);
  if (magic != kChainMagic)
    throw std::runtime_error(path + ": not a chain file or version mismatch (got '" +
                             magic + "')");
  std::getline(in, meta_line);
  std::getline(in, marker);
  if (marker != "BINARY")
    throw std::runtime_error(path + ": corrupt chain header");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_line);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": corrupt chain metadata: " + e.what());
  }

  Chain c;
  c.K = meta.at("K").get<int>();
  c.L = meta.at("L").get<int>();
  c.D = meta.at("D").get<int>();
  c.M = meta.at("M").get<std::vector<int>>();
  c.meas_order = meta.at("meas_order").get<int>();
  c.trans_order = meta.at("trans_order").get<int>();
  c.N = meta.at("N").get<int>();
  c.T = meta.at("T").get<int>();
  c.sweep_order = meta.at("sweep_order").get<std::string>();
  c.column_convention = meta.at("column_convention").get<std::string>();
  const auto& cf = meta.at("config");
  c.config.burn_in = cf.at("burn_in").get<int>();
  c.config.post_burn_in = cf.at("post_burn_in").get<int>();
  c.config.thin = cf.at("thin").get<int>();
  c.config.sigma_beta2 = cf.at("sigma_beta2").get<double>();
  c.config.omega0 = cf.at("omega0").get<double>();
  c.config.omega1 = cf.at("omega1").get<double>();
  c.config.rate_a = cf.at("rate_a").get<double>();
  c.config.v0 = cf.at("v0").get<double>();
  c.config.sigma_kappa2 = cf.at("sigma_kappa2").get<double>();
  c.config.seed = cf.at("seed").get<std::uint64_t>();

  const int S = meta.at("S").get<int>();
  const ModelSpec spec = c.spec();
  int kap_len = 0;
  for (int m : c.M) kap_len += m + 1;
  c.beta = read_block(in, S, spec.H() * spec.J(), path);
  c.delta = read_block(in, S, spec.H() * spec.J(), path);
  c.kappa = read_block(in, S, kap_len, path);
  c.gamma = read_block(in, S, c.K * (c.L + 1), path);
  c.lambda = read_block(in, S, c.D * c.K, path);
  c.xi = read_block(in, S, spec.H_otr() * c.K, path);
  c.R = read_block(in, S, c.K * c.K, path);
  c.omega = arma::vec(read_block(in, S, 1, path));
  c.loglik = read_block(in, S, c.N, path);
  c.kappa_accept_rate = arma::vec(read_block(in, spec.J(), 1, path));
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error(path + ": trailing bytes after chain payload");
  return c;
}

// --- Config -----------------------------------------------------------------

RunConfig RunConfig::parse_text(const std::string& text) {
  RunConfig cfg;
  cfg.raw_ = text;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      cfg.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": key outside any [section]");
    if (cfg.sections_[section].count(key))
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": duplicate key '" + key + "'");
    cfg.sections_[section][key] = value;
  }
  return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

bool RunConfig::has_section(const std::string& section) const {
  return sections_.count(section) > 0;
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key) > 0;
}

std::string RunConfig::get(const std::string& section,
                           const std::string& key) const {
  if (!has(section, key))
    throw std::invalid_argument("config: missing key '" + key + "' in [" +
                                section + "]");
  return sections_.at(section).at(key);
}

std::string RunConfig::get_or(const std::string& section,
                              const std::string& key,
                              const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

double RunConfig::get_num(const std::string& section,
                          const std::string& key) const {
  return parse_double(get(section, key), "config [" + section + "] " + key);
}

double RunConfig::get_num_or(const std::string& section, const std::string& key,
                             double fallback) const {
  return has(section, key) ? get_num(section, key) : fallback;
}

long long RunConfig::get_int_or(const std::string& section,
                                const std::string& key,
                                long long fallback) const {
  return has(section, key)
             ? parse_int(get(section, key), "config [" + section + "] " + key)
             : fallback;
}

void RunConfig::require_known_keys(
    const std::string& section, const std::vector<std::string>& allowed) const {
  auto it = sections_.find(section);
  if (it == sections_.end())
    throw std::invalid_argument("config: missing section [" + section + "]");
  for (const auto& [key, value] : it->second) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw std::invalid_argument("config: unknown key '" + key + "' in [" +
                                  section + "]");
  }
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    std::uint64_t seed, const std::string& cfg_hash) {
  std::ofstream out(out_dir + "/manifest.txt");
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
  out << "command: " << command << "\n"
      << "version: " << kVersion << "\n"
      << "seed: " << seed << "\n"
      << "config_hash: " << cfg_hash << "\n";
}

void save_matrix_csv(const arma::mat& m, const std::string& path,
                     const std::vector<std::string>& col_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (!col_names.empty()) {
    for (std::size_t i = 0; i < col_names.size(); ++i)
      out << (i ? "," : "") << col_names[i];
    out << "\n";
  }
  for (arma::uword r = 0; r < m.n_rows; ++r) {
    for (arma::uword c = 0; c < m.n_cols; ++c)
      out << (c ? "," : "") << fmt_double(m(r, c));
    out << "\n";
  }
}

arma::mat load_matrix_csv(const std::string& path, bool has_header) {
  const CsvTable t = has_header ? read_csv(path) : CsvTable{};
  std::vector<std::vector<std::string>> rows;
  if (has_header) {
    rows = t.rows;
  } else {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw std::invalid_argument(path + ": no rows");
  arma::mat m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size())
      throw std::invalid_argument(path + ": ragged row " + std::to_string(r + 1));
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(r, c) = parse_double(trim(rows[r][c]),
                             path + " row " + std::to_string(r + 1));
  }
  return m;
}

// --- Commands ---------------------------------------------------------------

namespace {

std::vector<int> parse_M(const RunConfig& cfg, const std::string& section,
                         int J_hint) {
  if (cfg.has(section, "M")) {
    std::vector<int> M;
    for (const auto& tok : split_csv_line(cfg.get(section, "M")))
      M.push_back(static_cast<int>(parse_int(trim(tok), "config M")));
    return M;
  }
  const int cats = static_cast<int>(cfg.get_int_or(section, "categories", 2));
  if (J_hint <= 0)
    throw std::invalid_argument("config: cannot infer item count; provide M");
  return std::vector<int>(J_hint, cats);
}

int count_items_in_header(const std::string& y_path) {
  std::ifstream in(y_path);
  if (!in) throw std::runtime_error("cannot open file: " + y_path);
  std::string header;
  std::getline(in, header);
  return static_cast<int>(split_csv_line(header).size()) - 2;
}

ScenarioSpec scenario_from_config(const RunConfig& cfg,
                                  const std::string& section) {
  ScenarioSpec sc;
  sc.N = static_cast<int>(cfg.get_int_or(section, "N", sc.N));
  sc.T = static_cast<int>(cfg.get_int_or(section, "T", sc.T));
  sc.K = static_cast<int>(cfg.get_int_or(section, "K", sc.K));
  sc.L = static_cast<int>(cfg.get_int_or(section, "L", sc.L));
  sc.rho = cfg.get_num_or(section, "rho", sc.rho);
  sc.missing_rate = cfg.get_num_or(section, "missing_rate", sc.missing_rate);
  sc.replications =
      static_cast<int>(cfg.get_int_or(section, "replications", sc.replications));
  sc.seed = static_cast<std::uint64_t>(cfg.get_int_or(section, "seed", 1));
  sc.categories = static_cast<int>(cfg.get_int_or(section, "categories", 3));
  return sc;
}

ChainConfig chain_from_config(const RunConfig& cfg, const std::string& section) {
  ChainConfig cc;
  cc.burn_in = static_cast<int>(cfg.get_int_or(section, "burn_in", cc.burn_in));
  cc.post_burn_in =
      static_cast<int>(cfg.get_int_or(section, "post_burn_in", cc.post_burn_in));
  cc.thin = static_cast<int>(cfg.get_int_or(section, "thin", cc.thin));
  cc.sigma_beta2 = cfg.get_num_or(section, "sigma_beta2", cc.sigma_beta2);
  cc.omega0 = cfg.get_num_or(section, "omega0", cc.omega0);
  cc.omega1 = cfg.get_num_or(section, "omega1", cc.omega1);
  cc.rate_a = cfg.get_num_or(section, "rate_a", cc.rate_a);
  cc.v0 = cfg.get_num_or(section, "v0", cc.v0);
  cc.sigma_kappa2 = cfg.get_num_or(section, "sigma_kappa2", cc.sigma_kappa2);
  cc.seed = static_cast<std::uint64_t>(cfg.get_int_or(section, "seed", 0));
  return cc;
}

std::string ensure_out_dir(const RunConfig& cfg, const std::string& section,
                           const CliOverrides& ov) {
  std::string dir = !ov.out_dir.empty() ? ov.out_dir
                                        : cfg.get_or(section, "out", "");
  if (dir.empty())
    throw std::invalid_argument("config: missing output directory ('out')");
  std::filesystem::create_directories(dir);
  return dir;
}

void save_truth(const ParamSet& truth, const ModelSpec& spec,
                const std::string& dir) {
  save_matrix_csv(truth.meas.beta, dir + "/truth_beta.csv");
  save_matrix_csv(arma::conv_to<arma::mat>::from(truth.meas.delta),
                  dir + "/truth_delta.csv");
  arma::mat kap(spec.J(), spec.M()[0] + 1);
  for (int j = 0; j < spec.J(); ++j) kap.row(j) = truth.meas.kappa[j].t();
  save_matrix_csv(kap, dir + "/truth_kappa.csv");
  save_matrix_csv(truth.str.gamma, dir + "/truth_gamma.csv");
  save_matrix_csv(truth.str.lambda, dir + "/truth_lambda.csv");
  save_matrix_csv(truth.str.xi, dir + "/truth_xi.csv");
  save_matrix_csv(truth.str.R, dir + "/truth_R.csv");
}

}  // namespace

int cmd_simulate(const RunConfig& cfg, const CliOverrides& ov) {
  cfg.require_known_keys("simulate",
                         {"N", "T", "K", "L", "rho", "missing_rate", "seed",
                          "categories", "out"});
  ScenarioSpec sc = scenario_from_config(cfg, "simulate");
  if (ov.has_seed) sc.seed = ov.seed;
  const std::string dir = ensure_out_dir(cfg, "simulate", ov);
  const ModelSpec spec = scenario_spec(sc);

  RngStream prng(sc.seed, 0);
  const ParamSet truth = generate_params(sc, prng);
  RngStream drng(sc.seed, 1);
  GeneratedData gen = generate_data(truth, sc, drng);
  Dataset data = sc.missing_rate > 0.0
                     ? apply_missingness(gen.data, sc.missing_rate, drng)
                     : gen.data;

  save_dataset(data, dir + "/y.csv", dir + "/x.csv");
  save_truth(truth, spec, dir);
  arma::mat alpha(sc.N * sc.T, 2 + sc.K);
  for (int n = 0; n < sc.N; ++n)
    for (int t = 0; t < sc.T; ++t) {
      alpha(n * sc.T + t, 0) = n + 1;
      alpha(n * sc.T + t, 1) = t + 1;
      for (int k = 0; k < sc.K; ++k)
        alpha(n * sc.T + t, 2 + k) = gen.alpha(n, t, k);
    }
  std::vector<std::string> names = {"n", "t"};
  for (int k = 0; k < sc.K; ++k) names.push_back("alpha_" + std::to_string(k + 1));
  save_matrix_csv(alpha, dir + "/truth_alpha.csv", names);
  write_manifest(dir, "simulate", sc.seed, config_hash(cfg.raw_text()));
  std::cout << "simulate: wrote " << spec.J() << " items x " << sc.N << " x "
            << sc.T << " to " << dir << "\n";
  return 0;
}

int cmd_fit(const RunConfig& cfg, const CliOverrides& ov) {
  cfg.require_known_keys(
      "fit", {"y", "x", "K", "L", "M", "categories", "meas_order",
              "trans_order", "burn_in", "post_burn_in", "thin", "sigma_beta2",
              "omega0", "omega1", "rate_a", "v0", "sigma_kappa2", "seed",
              "out", "ident_points"});
  const std::string y_path = cfg.get("fit", "y");
  const std::string x_path = cfg.get("fit", "x");
  const int K = static_cast<int>(cfg.get_int_or("fit", "K", 2));
  const int L = static_cast<int>(cfg.get_int_or("fit", "L", 2));
  const int J = count_items_in_header(y_path);
  const std::vector<int> M = parse_M(cfg, "fit", J);
  const Dataset data = load_dataset(y_path, x_path, M);
  const int meas_order =
      static_cast<int>(cfg.get_int_or("fit", "meas_order", std::min(2, K)));
  const int trans_order =
      static_cast<int>(cfg.get_int_or("fit", "trans_order", 1));
  const ModelSpec spec(K, L, M, meas_order, trans_order,
                       static_cast<int>(data.X.n_slices));
  ChainConfig cc = chain_from_config(cfg, "fit");
  if (ov.has_seed) cc.seed = ov.seed;
  const std::string dir = ensure_out_dir(cfg, "fit", ov);

  // Data-only identifiability conditions are checkable up front (warn only).
  if (spec.total_categories() < spec.n_classes())
    std::cerr << "warning: sum M_j < L^K, condition C2 fails\n";
  if (data.N() < spec.D() + spec.H_otr())
    std::cerr << "warning: N < D + H_otr, condition C5 fails\n";

  const Chain chain = run_chain(data, spec, cc);
  save_chain(chain, dir + "/chain.bin");

  arma::mat acc(spec.J(), 2);
  for (int j = 0; j < spec.J(); ++j) {
    acc(j, 0) = j + 1;
    acc(j, 1) = chain.kappa_accept_rate[j];
  }
  save_matrix_csv(acc, dir + "/acceptance.csv", {"item", "kappa_accept_rate"});

  // Full condition report at the posterior means, with the design matrices
  // rebuilt from a posterior draw of the latent states.
  {
    const ReplicationEstimate est = estimate_from_chain(chain);
    MeasurementParams m;
    m.beta = est.beta;
    m.delta = est.delta;
    m.delta.row(0).ones();
    m.kappa = chain.kappa_draw(chain.n_draws() - 1);
    m.omega = arma::mean(chain.omega);
    StructuralParams s;
    s.gamma = est.gamma;
    for (int k = 0; k < K; ++k) {
      s.gamma(k, 0) = -kInf;
      s.gamma(k, 1) = 0.0;
      s.gamma(k, L) = kInf;
    }
    s.lambda = est.lambda;
    s.xi = est.xi;
    s.R = est.R;
    // Latents for W: refit initialization is enough for the rank checks.
    MwgSampler sampler(data, spec, cc);
    sampler.init();
    const auto W = build_design_per_time(data, sampler.state().alpha, spec);
    const std::size_t pts =
        static_cast<std::size_t>(cfg.get_int_or("fit", "ident_points", 512));
    IdentReport rep;
    try {
      rep = check_identifiability(m, s, W, spec, pts);
    } catch (const std::exception& e) {
      std::cerr << "warning: identifiability check failed to run: " << e.what()
                << "\n";
    }
    std::ofstream repf(dir + "/identifiability.txt");
    repf << rep.to_text();
    if (!rep.generic_ok())
      std::cerr << "warning: identifiability conditions not all satisfied "
                   "(see identifiability.txt)\n";
  }

  write_manifest(dir, "fit", cc.seed, config_hash(cfg.raw_text()));
  std::cout << "fit: " << chain.n_draws() << " retained draws -> " << dir
            << "/chain.bin\n";
  return 0;
}

int cmd_diagnose(const RunConfig& cfg, const CliOverrides& ov) {
  cfg.require_known_keys("diagnose", {"chain", "out", "level"});
  const Chain chain = load_chain(cfg.get("diagnose", "chain"));
  const double level = cfg.get_num_or("diagnose", "level", 0.95);
  const std::string dir = ensure_out_dir(cfg, "diagnose", ov);
  const ChainSummary sum = summarize_chain(chain, level);
  const ModelSpec spec = chain.spec();

  auto dump_param = [&](const ParamSummary& p, const std::string& fname) {
    arma::mat m(p.mean.n_elem, 4);
    m.col(0) = p.mean;
    m.col(1) = p.lo;
    m.col(2) = p.hi;
    for (arma::uword i = 0; i < p.mean.n_elem; ++i)
      m(i, 3) = static_cast<double>(p.zero_in_ci[i]);
    save_matrix_csv(m, dir + "/" + fname, {"mean", "lo", "hi", "zero_in_ci"});
  };
  dump_param(sum.beta, "summary_beta.csv");
  dump_param(sum.gamma, "summary_gamma.csv");
  dump_param(sum.lambda, "summary_lambda.csv");
  dump_param(sum.xi, "summary_xi.csv");
  dump_param(sum.R, "summary_R.csv");
  dump_param(sum.eta, "summary_eta.csv");
  {
    arma::mat dm(sum.delta_mean.n_elem, 2);
    dm.col(0) = sum.delta_mean;
    for (arma::uword i = 0; i < sum.delta_mode.n_elem; ++i)
      dm(i, 1) = static_cast<double>(sum.delta_mode[i]);
    save_matrix_csv(dm, dir + "/summary_delta.csv", {"mean", "mode"});
  }

  // Per-element convergence diagnostics across every stored series.
  std::ofstream gw(dir + "/geweke_iact.csv");
  gw << "parameter,element,geweke_z,iact,ess\n";
  int n_tested = 0, n_flagged = 0;
  auto scan = [&](const arma::mat& draws, const std::string& name) {
    for (arma::uword c = 0; c < draws.n_cols; ++c) {
      const arma::vec series = draws.col(c);
      gw << name << "," << (c + 1) << ",";
      if (!series.is_finite() || series.max() == series.min() ||
          series.n_elem < 100) {
        gw << "NA,NA,NA\n";
        continue;
      }
      const double z = geweke_z(series);
      const double tau = iact(series);
      gw << fmt_double(z) << "," << fmt_double(tau) << ","
         << fmt_double(series.n_elem / tau) << "\n";
      ++n_tested;
      if (std::fabs(z) > 1.96) ++n_flagged;
    }
  };
  scan(chain.beta, "beta");
  scan(chain.lambda, "lambda");
  scan(chain.xi, "xi");
  scan(chain.R, "R");
  scan(arma::mat(chain.omega), "omega");
  if (spec.L() > 2) scan(chain.gamma, "gamma");
  gw.close();

  std::ofstream rep(dir + "/report.txt");
  rep << "draws: " << chain.n_draws() << "\n"
      << "series tested: " << n_tested << "\n"
      << "series with |geweke z| > 1.96: " << n_flagged << " ("
      << (n_tested ? 100.0 * n_flagged / n_tested : 0.0) << "%)\n";
  rep << "kappa acceptance rates per item:";
  for (arma::uword j = 0; j < chain.kappa_accept_rate.n_elem; ++j)
    rep << " " << chain.kappa_accept_rate[j];
  rep << "\n";
  write_manifest(dir, "diagnose", chain.config.seed,
                 config_hash(cfg.raw_text()));
  std::cout << "diagnose: " << n_tested << " series -> " << dir << "\n";
  return 0;
}

int cmd_waic(const RunConfig& cfg, const CliOverrides& ov) {
  cfg.require_known_keys("waic", {"chains", "out"});
  std::vector<std::string> paths;
  for (const auto& tok : split_csv_line(cfg.get("waic", "chains")))
    paths.push_back(trim(tok));
  if (paths.empty()) throw std::invalid_argument("waic: no chain paths given");
  const std::string dir = ensure_out_dir(cfg, "waic", ov);

  struct Row {
    std::string path;
    WaicResult w;
  };
  std::vector<Row> rows;
  for (const auto& p : paths) rows.push_back({p, waic(load_chain(p).loglik)});
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.w.waic < b.w.waic; });

  std::ofstream out(dir + "/waic.csv");
  out << "chain,waic,lppd,p_waic\n";
  for (const auto& r : rows)
    out << r.path << "," << fmt_double(r.w.waic) << "," << fmt_double(r.w.lppd)
        << "," << fmt_double(r.w.p_waic) << "\n";
  write_manifest(dir, "waic", 0, config_hash(cfg.raw_text()));
  std::cout << "waic: " << rows.size() << " model(s), best " << rows[0].path
            << " (" << rows[0].w.waic << ")\n";
  return 0;
}

int cmd_recover(const RunConfig& cfg, const CliOverrides& ov) {
  cfg.require_known_keys(
      "recover", {"N", "T", "K", "L", "rho", "missing_rate", "replications",
                  "seed", "categories", "threads", "out", "burn_in",
                  "post_burn_in", "thin", "sigma_beta2", "omega0", "omega1",
                  "rate_a", "v0", "sigma_kappa2"});
  ScenarioSpec sc = scenario_from_config(cfg, "recover");
  if (ov.has_seed) sc.seed = ov.seed;
  ChainConfig cc = chain_from_config(cfg, "recover");
  int threads = ov.threads > 0
                    ? ov.threads
                    : static_cast<int>(cfg.get_int_or("recover", "threads", 1));
  const std::string dir = ensure_out_dir(cfg, "recover", ov);

  const StudyResult res = run_recovery_study(sc, cc, threads);
  const ModelSpec spec = scenario_spec(sc);
  save_truth(res.truth, spec, dir);

  arma::mat out(1, 11);
  out(0, 0) = res.report.gamma;
  out(0, 1) = res.report.eta;
  out(0, 2) = res.report.R;
  out(0, 3) = res.report.lambda;
  out(0, 4) = res.report.xi;
  out(0, 5) = res.report.beta;
  out(0, 6) = res.report.delta;
  out(0, 7) = res.report.delta0;
  out(0, 8) = res.report.delta1;
  out(0, 9) = res.report.beta0;
  out(0, 10) = res.report.beta1;
  save_matrix_csv(out, dir + "/recovery.csv",
                  {"gamma", "eta", "R", "lambda", "xi", "beta", "delta",
                   "delta0", "delta1", "beta0", "beta1"});
  arma::mat acc(spec.J(), 2);
  for (int j = 0; j < spec.J(); ++j) {
    acc(j, 0) = j + 1;
    acc(j, 1) = res.kappa_accept_rate_mean[j];
  }
  save_matrix_csv(acc, dir + "/kappa_acceptance.csv",
                  {"item", "mean_accept_rate"});
  write_manifest(dir, "recover", sc.seed, config_hash(cfg.raw_text()));
  std::cout << "recover: " << sc.replications << " replications -> " << dir
            << "/recovery.csv\n";
  return 0;
}

}  // namespace lrlcm
