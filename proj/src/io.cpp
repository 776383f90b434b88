#include "mstr/io.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <system_error>

namespace mstr {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct LineReader {
  std::istream& is;
  std::string source;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  std::size_t line_start = 0;

  bool next(std::string& line) {
    if (!std::getline(is, line)) return false;
    line_start = offset;
    offset += line.size() + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(source + ": line " + std::to_string(line_no) + " (byte " + std::to_string(line_start) +
                         "): " + what,
                     line_start);
  }
};

long parse_long(const std::string& field, const LineReader& rd, const char* name) {
  const std::string f = trim(field);
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(f.c_str(), &end, 10);
  if (f.empty() || *end != '\0' || errno != 0) rd.fail(std::string("invalid integer for ") + name + ": '" + f + "'");
  return v;
}

double parse_double(const std::string& field, const LineReader& rd) {
  const std::string f = trim(field);
  char* end = nullptr;
  const double v = std::strtod(f.c_str(), &end);
  if (f.empty() || *end != '\0') rd.fail("invalid number '" + f + "'");
  return v;
}

std::string shape_string(std::initializer_list<Index> dims) {
  std::string out;
  for (Index d : dims) out += (out.empty() ? "" : "x") + std::to_string(d);
  return out;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

json labels_json(const std::vector<int>& s) {
  json out = json::array();
  for (int v : s) out.push_back(v + 1);
  return out;
}

Eigen::VectorXd json_vec(const json& j, Index expected) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Index>(v.size()) != expected) {
    throw std::out_of_range("expected " + std::to_string(expected) + " values, got " + std::to_string(v.size()));
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), expected);
}

Eigen::MatrixXd json_mat(const json& j, Index rows, Index cols) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) throw std::out_of_range("matrix row count mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) m.row(r) = json_vec(j[static_cast<std::size_t>(r)], cols).transpose();
  return m;
}

std::vector<int> json_labels(const json& j, Index regimes) {
  std::vector<int> s;
  for (const auto& v : j) {
    const int l = v.get<int>();
    if (l < 1 || l > regimes) throw std::out_of_range("regime label " + std::to_string(l) + " out of range");
    s.push_back(l - 1);
  }
  return s;
}

template <typename Fn>
void for_each_record(std::istream& is, const std::string& source, Fn fn) {
  LineReader rd{is, source};
  std::string line;
  while (rd.next(line)) {
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      const std::size_t at = rd.line_start + (e.byte > 0 ? e.byte - 1 : 0);
      throw ParseError(source + ": malformed record on line " + std::to_string(rd.line_no) + " at byte offset " +
                           std::to_string(at),
                       at);
    }
    try {
      fn(rec);
    } catch (const json::exception& e) {
      rd.fail(std::string("bad record: ") + e.what());
    } catch (const std::out_of_range& e) {
      rd.fail(std::string("bad record: ") + e.what());
    }
  }
}

}  // namespace

void write_panel_csv(std::ostream& os, const NetworkPanel& panel) {
  os << "# I=" << panel.I << ",J=" << panel.J << ",K=" << panel.K << ",T=" << panel.T << "\n";
  os << "t,i,j,k\n";
  for (Index t = 0; t < panel.T; ++t) {
    for (Index k = 0; k < panel.K; ++k) {
      for (Index j = 0; j < panel.J; ++j) {
        for (Index i = 0; i < panel.I; ++i) {
          if (panel(i, j, k, t)) os << t + 1 << ',' << i + 1 << ',' << j + 1 << ',' << k + 1 << '\n';
        }
      }
    }
  }
}

NetworkPanel read_panel_csv(std::istream& is, const std::string& source) {
  LineReader rd{is, source};
  std::string line;
  if (!rd.next(line) || line.rfind('#', 0) != 0) rd.fail("expected a '# I=..,J=..,K=..,T=..' shape line");
  Index dims[4] = {-1, -1, -1, -1};
  const char* keys[4] = {"I", "J", "K", "T"};
  for (const auto& item : split_csv(line.substr(1))) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) rd.fail("malformed shape entry '" + trim(item) + "'");
    const std::string key = trim(item.substr(0, eq));
    bool known = false;
    for (int m = 0; m < 4; ++m) {
      if (key == keys[m]) {
        dims[m] = parse_long(item.substr(eq + 1), rd, keys[m]);
        known = true;
      }
    }
    if (!known) rd.fail("unknown shape key '" + key + "'");
  }
  for (int m = 0; m < 4; ++m) {
    if (dims[m] < 1) rd.fail(std::string("shape line must give a positive ") + keys[m]);
  }

  if (!rd.next(line)) rd.fail("missing column header");
  const auto header = split_csv(line);
  const bool valued = header.size() == 5;
  if ((header.size() != 4 && !valued) || trim(header[0]) != "t" || trim(header[1]) != "i" ||
      trim(header[2]) != "j" || trim(header[3]) != "k" || (valued && trim(header[4]) != "x")) {
    rd.fail("expected header 't,i,j,k' or 't,i,j,k,x'");
  }

  NetworkPanel panel(dims[0], dims[1], dims[2], dims[3], 0);
  while (rd.next(line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) rd.fail("expected " + std::to_string(header.size()) + " fields");
    const long idx[4] = {parse_long(f[0], rd, "t"), parse_long(f[1], rd, "i"), parse_long(f[2], rd, "j"),
                         parse_long(f[3], rd, "k")};
    const Index bound[4] = {panel.T, panel.I, panel.J, panel.K};
    const char* name[4] = {"t", "i", "j", "k"};
    for (int m = 0; m < 4; ++m) {
      if (idx[m] < 1 || idx[m] > bound[m]) {
        throw ValidationError(source + ": line " + std::to_string(rd.line_no) + ": " + name[m] + "=" +
                              std::to_string(idx[m]) + " outside 1.." + std::to_string(bound[m]));
      }
    }
    long value = 1;
    if (valued) {
      value = parse_long(f[4], rd, "x");
      if (value < 0 || value > 255) {
        throw ValidationError(source + ": line " + std::to_string(rd.line_no) + ": non-binary entry " +
                              std::to_string(value));
      }
    }
    panel(idx[1] - 1, idx[2] - 1, idx[3] - 1, idx[0] - 1) = static_cast<std::uint8_t>(value);
  }
  return panel;
}

void write_covariates_csv(std::ostream& os, const Eigen::MatrixXd& z) {
  os << "t";
  for (Index q = 0; q < z.cols(); ++q) os << ",z" << q + 1;
  os << "\n" << std::setprecision(17);
  for (Index t = 0; t < z.rows(); ++t) {
    os << t + 1;
    for (Index q = 0; q < z.cols(); ++q) os << ',' << z(t, q);
    os << '\n';
  }
}

Eigen::MatrixXd read_covariates_csv(std::istream& is, const std::string& source) {
  LineReader rd{is, source};
  std::string line;
  if (!rd.next(line)) rd.fail("empty file");
  const auto header = split_csv(line);
  if (header.size() < 2 || trim(header[0]) != "t") rd.fail("expected header 't,z1,...,zQ'");
  const Index Q = static_cast<Index>(header.size()) - 1;
  std::vector<double> values;
  Index T = 0;
  while (rd.next(line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (static_cast<Index>(f.size()) != Q + 1) {
      rd.fail("expected " + std::to_string(Q + 1) + " fields, got " + std::to_string(f.size()));
    }
    if (parse_long(f[0], rd, "t") != T + 1) rd.fail("rows must be ordered t = 1, 2, ...");
    for (Index q = 0; q < Q; ++q) values.push_back(parse_double(f[static_cast<std::size_t>(q + 1)], rd));
    ++T;
  }
  Eigen::MatrixXd z(T, Q);
  for (Index t = 0; t < T; ++t) {
    for (Index q = 0; q < Q; ++q) z(t, q) = values[static_cast<std::size_t>(t * Q + q)];
  }
  return z;
}

NetworkPanel load_panel(const std::filesystem::path& panel_csv, const std::filesystem::path& covariates_csv) {
  std::ifstream pf(panel_csv);
  if (!pf) throw ValidationError("cannot open panel file " + panel_csv.string());
  std::ifstream cf(covariates_csv);
  if (!cf) throw ValidationError("cannot open covariate file " + covariates_csv.string());
  NetworkPanel panel = read_panel_csv(pf, panel_csv.string());
  Eigen::MatrixXd z = read_covariates_csv(cf, covariates_csv.string());
  if (z.rows() != panel.T) {
    throw ValidationError("dimension mismatch: panel " + panel_csv.string() + " has shape IxJxKxT = " +
                          shape_string({panel.I, panel.J, panel.K, panel.T}) + " but covariates " +
                          covariates_csv.string() + " have shape TxQ = " + shape_string({z.rows(), z.cols()}));
  }
  panel.Q = z.cols();
  panel.z = std::move(z);
  panel.validate();
  return panel;
}

void save_panel(const std::filesystem::path& dir, const NetworkPanel& panel) {
  std::ostringstream p, c;
  write_panel_csv(p, panel);
  write_covariates_csv(c, panel.z);
  write_atomic(dir / "panel.csv", p.str());
  write_atomic(dir / "covariates.csv", c.str());
}

json to_json(const RegimeParams& p) {
  json out;
  out["rho"] = vec_json(p.rho);
  out["xi"] = mat_json(p.xi);
  json regimes = json::array();
  for (const auto& m : p.marginals) {
    json modes = json::array();
    for (Index h = 0; h < m.order(); ++h) {
      json ranks = json::array();
      for (Index r = 0; r < m.rank(); ++r) ranks.push_back(vec_json(m.marginal(h, r)));
      modes.push_back(ranks);
    }
    regimes.push_back(modes);
  }
  out["gamma"] = regimes;
  return out;
}

json to_json(const ShrinkageState& s) {
  json out;
  out["tau"] = s.tau;
  out["psi"] = vec_json(s.psi);
  out["phi"] = vec_json(s.phi);
  out["lambda"] = vec_json(s.lambda);
  json w = json::array();
  for (const auto& wl : s.w) w.push_back(mat_json(wl));
  out["w"] = w;
  return out;
}

json to_json(const PooledParams& p) {
  json out;
  json g = json::array();
  for (Index l = 0; l < p.g.cols(); ++l) g.push_back(vec_json(p.g.col(l)));
  out["g"] = g;
  out["w"] = vec_json(p.w);
  out["tau"] = p.tau;
  out["lambda"] = vec_json(p.lambda);
  out["rho"] = vec_json(p.rho);
  out["xi"] = mat_json(p.xi);
  return out;
}

json truth_json(const Simulation& sim) {
  const auto& p = sim.panel;
  json out;
  out["seed"] = sim.truth.seed;
  out["dims"] = {{"I", p.I}, {"J", p.J}, {"K", p.K}, {"T", p.T}, {"Q", p.Q}};
  out["regimes"] = sim.truth.params.regimes();
  out["rank"] = sim.truth.params.rank();
  out["params"] = to_json(sim.truth.params);
  out["shrinkage"] = to_json(sim.truth.shrink);
  out["s"] = labels_json(sim.truth.s);
  std::vector<int> degree;
  for (Index t = 0; t < p.T; ++t) degree.push_back(static_cast<int>(p.edge_count(t)));
  out["degree"] = degree;
  return out;
}

json gamma_legend(const PanelDims& dims, Index regimes, Index rank) {
  json out;
  out["order"] = {"regime", "mode", "rank", "entry"};
  out["modes"] = {dims.I, dims.J, dims.K, dims.Q};
  out["regimes"] = regimes;
  out["rank"] = rank;
  out["size"] = regimes * rank * (dims.I + dims.J + dims.K + dims.Q);
  out["w_order"] = {"regime", "mode", "rank"};
  return out;
}

json draw_record(const Draw& d) {
  json out;
  out["iteration"] = d.iteration;
  out["loglik"] = d.loglik;
  out["tau"] = d.shrink.tau;
  out["psi"] = vec_json(d.shrink.psi);
  out["phi"] = vec_json(d.shrink.phi);
  out["lambda"] = vec_json(d.shrink.lambda);
  out["rho"] = vec_json(d.params.rho);
  out["xi"] = mat_json(d.params.xi);
  out["s"] = labels_json(d.s);
  std::vector<double> w, gamma;
  for (const auto& wl : d.shrink.w) {
    for (Index h = 0; h < wl.rows(); ++h) {
      for (Index r = 0; r < wl.cols(); ++r) w.push_back(wl(h, r));
    }
  }
  for (const auto& m : d.params.marginals) {
    for (Index h = 0; h < m.order(); ++h) {
      for (Index r = 0; r < m.rank(); ++r) {
        const auto col = m.marginal(h, r);
        gamma.insert(gamma.end(), col.data(), col.data() + col.size());
      }
    }
  }
  out["w"] = w;
  out["gamma"] = gamma;
  return out;
}

json draw_record(const PooledDraw& d) {
  json out;
  out["iteration"] = d.iteration;
  out["loglik"] = d.loglik;
  out["tau"] = d.params.tau;
  out["lambda"] = vec_json(d.params.lambda);
  out["w"] = vec_json(d.params.w);
  out["rho"] = vec_json(d.params.rho);
  out["xi"] = mat_json(d.params.xi);
  out["s"] = labels_json(d.s);
  out["g"] = std::vector<double>(d.params.g.data(), d.params.g.data() + d.params.g.size());
  return out;
}

std::vector<Draw> read_draws(std::istream& is, const PanelDims& dims, Index regimes, Index rank) {
  const Shape modes{dims.I, dims.J, dims.K, dims.Q};
  const Index per_regime = rank * (dims.I + dims.J + dims.K + dims.Q);
  std::vector<Draw> draws;
  for_each_record(is, "draws", [&](const json& rec) {
    Draw d;
    d.iteration = rec.at("iteration").get<long>();
    d.loglik = rec.at("loglik").get<double>();
    d.shrink.tau = rec.at("tau").get<double>();
    d.shrink.psi = json_vec(rec.at("psi"), rank);
    d.shrink.phi = json_vec(rec.at("phi"), rank);
    d.shrink.lambda = json_vec(rec.at("lambda"), regimes);
    d.params.rho = json_vec(rec.at("rho"), regimes);
    d.params.xi = json_mat(rec.at("xi"), regimes, regimes);
    d.s = json_labels(rec.at("s"), regimes);
    const Eigen::VectorXd w = json_vec(rec.at("w"), regimes * 4 * rank);
    const Eigen::VectorXd g = json_vec(rec.at("gamma"), regimes * per_regime);
    Index wi = 0, gi = 0;
    for (Index l = 0; l < regimes; ++l) {
      Eigen::MatrixXd wl(4, rank);
      for (Index h = 0; h < 4; ++h) {
        for (Index r = 0; r < rank; ++r) wl(h, r) = w[wi++];
      }
      d.shrink.w.push_back(wl);
      Marginals m(modes, rank);
      for (Index h = 0; h < 4; ++h) {
        for (Index r = 0; r < rank; ++r) {
          m.marginal(h, r) = g.segment(gi, m.dim(h));
          gi += m.dim(h);
        }
      }
      d.params.marginals.push_back(std::move(m));
    }
    draws.push_back(std::move(d));
  });
  return draws;
}

std::vector<PooledDraw> read_pooled_draws(std::istream& is, Index Q, Index regimes) {
  std::vector<PooledDraw> draws;
  for_each_record(is, "draws", [&](const json& rec) {
    PooledDraw d;
    d.iteration = rec.at("iteration").get<long>();
    d.loglik = rec.at("loglik").get<double>();
    d.params.tau = rec.at("tau").get<double>();
    d.params.lambda = json_vec(rec.at("lambda"), regimes);
    d.params.w = json_vec(rec.at("w"), regimes);
    d.params.rho = json_vec(rec.at("rho"), regimes);
    d.params.xi = json_mat(rec.at("xi"), regimes, regimes);
    d.s = json_labels(rec.at("s"), regimes);
    const Eigen::VectorXd g = json_vec(rec.at("g"), Q * regimes);
    d.params.g = Eigen::Map<const Eigen::MatrixXd>(g.data(), Q, regimes);
    draws.push_back(std::move(d));
  });
  return draws;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
    os.flush();
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace mstr
