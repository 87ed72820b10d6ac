#include "cpjm/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cpjm {

namespace {

using nlohmann::json;

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

double parse_double(const std::string& s, const std::string& file, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw DataError(file + ":" + std::to_string(line) +
                    ": cannot parse number '" + s + "'");
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  return is;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_dataset_csv(const std::vector<SubjectRecord>& data,
                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const int px = data.empty() ? 0 : static_cast<int>(data.front().x.cols());
  const int pw = data.empty() ? 0 : static_cast<int>(data.front().w.size());
  {
    auto os = open_out(dir / "longitudinal.csv");
    os << "subject_id,visit_time,y";
    for (int k = 0; k < px; ++k) os << ",x" << (k + 1);
    os << "\n";
    for (const auto& s : data) {
      for (int j = 0; j < s.n_visits(); ++j) {
        os << s.id << "," << format_double(s.s(j)) << ","
           << format_double(s.y(j));
        for (int k = 0; k < px; ++k) os << "," << format_double(s.x(j, k));
        os << "\n";
      }
    }
  }
  {
    auto os = open_out(dir / "survival.csv");
    os << "subject_id,time,event";
    for (int k = 0; k < pw; ++k) os << ",w" << (k + 1);
    os << "\n";
    for (const auto& s : data) {
      os << s.id << "," << format_double(s.t_obs) << "," << (s.event ? 1 : 0);
      for (int k = 0; k < pw; ++k) os << "," << format_double(s.w(k));
      os << "\n";
    }
  }
}

std::vector<SubjectRecord> read_dataset_csv(
    const std::filesystem::path& longitudinal_csv,
    const std::filesystem::path& survival_csv) {
  struct LongRow {
    double s, y;
    std::vector<double> x;
  };
  std::map<std::string, std::vector<LongRow>> long_rows;
  int px = -1;
  {
    auto is = open_in(longitudinal_csv);
    const std::string fname = longitudinal_csv.string();
    std::string line;
    int lineno = 0;
    if (!std::getline(is, line)) throw DataError(fname + ": empty file");
    ++lineno;
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "subject_id" ||
        header[1] != "visit_time" || header[2] != "y") {
      throw DataError(fname + ":1: bad header");
    }
    px = static_cast<int>(header.size()) - 3;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (static_cast<int>(f.size()) != 3 + px) {
        throw DataError(fname + ":" + std::to_string(lineno) +
                        ": wrong field count");
      }
      LongRow row;
      row.s = parse_double(f[1], fname, lineno);
      row.y = parse_double(f[2], fname, lineno);
      for (int k = 0; k < px; ++k) {
        row.x.push_back(parse_double(f[3 + k], fname, lineno));
      }
      long_rows[f[0]].push_back(std::move(row));
    }
  }

  std::vector<SubjectRecord> data;
  std::map<std::string, std::size_t> index;
  {
    auto is = open_in(survival_csv);
    const std::string fname = survival_csv.string();
    std::string line;
    int lineno = 0;
    if (!std::getline(is, line)) throw DataError(fname + ": empty file");
    ++lineno;
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "subject_id" ||
        header[1] != "time" || header[2] != "event") {
      throw DataError(fname + ":1: bad header");
    }
    const int pw = static_cast<int>(header.size()) - 3;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (static_cast<int>(f.size()) != 3 + pw) {
        throw DataError(fname + ":" + std::to_string(lineno) +
                        ": wrong field count");
      }
      SubjectRecord s;
      s.id = f[0];
      if (index.count(s.id) > 0) {
        throw DataError(fname + ":" + std::to_string(lineno) +
                        ": duplicate subject " + s.id);
      }
      s.t_obs = parse_double(f[1], fname, lineno);
      const double ev = parse_double(f[2], fname, lineno);
      if (ev != 0.0 && ev != 1.0) {
        throw DataError(fname + ":" + std::to_string(lineno) +
                        ": event must be 0 or 1");
      }
      s.event = ev == 1.0;
      s.w.resize(pw);
      for (int k = 0; k < pw; ++k) {
        s.w(k) = parse_double(f[3 + k], fname, lineno);
      }
      index[s.id] = data.size();
      data.push_back(std::move(s));
    }
  }

  for (const auto& [id, rows] : long_rows) {
    if (index.find(id) == index.end()) {
      throw DataError("subject " + id +
                      " appears in the longitudinal file only");
    }
  }
  for (auto& s : data) {
    const auto it = long_rows.find(s.id);
    if (it == long_rows.end()) {
      throw DataError("subject " + s.id + " has no longitudinal rows");
    }
    const auto& rows = it->second;
    const int n = static_cast<int>(rows.size());
    s.s.resize(n);
    s.y.resize(n);
    s.x.resize(n, static_cast<int>(rows.front().x.size()));
    for (int j = 0; j < n; ++j) {
      s.s(j) = rows[j].s;
      s.y(j) = rows[j].y;
      for (std::size_t k = 0; k < rows[j].x.size(); ++k) {
        s.x(j, static_cast<int>(k)) = rows[j].x[k];
      }
    }
    s.validate();
  }
  return data;
}

void write_truth_json(const ModelParams& truth, double censor_rate,
                      std::uint64_t seed, const std::filesystem::path& path) {
  json j;
  j["seed"] = seed;
  j["censor_rate"] = censor_rate;
  json p;
  p["gamma"] = std::vector<double>(truth.gamma.data(),
                                   truth.gamma.data() + truth.gamma.size());
  p["eta"] = truth.eta;
  p["alpha"] = truth.alpha;
  p["beta"] = std::vector<double>(truth.beta.data(),
                                  truth.beta.data() + truth.beta.size());
  p["sigma_y"] = truth.sigma_y;
  p["mu_omega"] = truth.mu_omega;
  p["mu_b"] = {truth.mu_b(0), truth.mu_b(1), truth.mu_b(2)};
  p["sd_r"] = {truth.sd_r(0), truth.sd_r(1), truth.sd_r(2), truth.sd_r(3)};
  std::vector<std::vector<double>> corr(4, std::vector<double>(4));
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) corr[i][k] = truth.Gamma_r(i, k);
  p["corr"] = corr;
  j["params"] = p;
  auto os = open_out(path);
  os << j.dump(2) << "\n";
}

ModelParams read_truth_json(const std::filesystem::path& path,
                            double* censor_rate, std::uint64_t* seed) {
  auto is = open_in(path);
  json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": bad JSON: " + std::string(e.what()));
  }
  if (censor_rate != nullptr) *censor_rate = j.value("censor_rate", 0.0);
  if (seed != nullptr) *seed = j.value("seed", 0ULL);
  const json& p = j.at("params");
  ModelParams out;
  const auto gvec = p.at("gamma").get<std::vector<double>>();
  out.gamma = Eigen::Map<const Eigen::VectorXd>(gvec.data(), gvec.size());
  out.eta = p.at("eta").get<double>();
  out.alpha = p.at("alpha").get<double>();
  const auto bvec = p.at("beta").get<std::vector<double>>();
  out.beta = Eigen::Map<const Eigen::VectorXd>(bvec.data(), bvec.size());
  out.sigma_y = p.at("sigma_y").get<double>();
  out.mu_omega = p.at("mu_omega").get<double>();
  const auto mb = p.at("mu_b").get<std::vector<double>>();
  out.mu_b << mb.at(0), mb.at(1), mb.at(2);
  const auto sd = p.at("sd_r").get<std::vector<double>>();
  out.sd_r << sd.at(0), sd.at(1), sd.at(2), sd.at(3);
  const auto corr = p.at("corr").get<std::vector<std::vector<double>>>();
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) out.Gamma_r(i, k) = corr.at(i).at(k);
  out.validate();
  return out;
}

void write_draws_csv(const PosteriorDraws& draws,
                     const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "chain,iteration";
  for (const auto& n : draws.names) os << "," << n;
  os << "\n";
  for (int c = 0; c < draws.num_chains(); ++c) {
    for (int i = 0; i < draws.num_samples(); ++i) {
      os << (c + 1) << "," << (i + 1);
      for (int k = 0; k < draws.chains[c].cols(); ++k) {
        os << "," << format_double(draws.chains[c](i, k));
      }
      os << "\n";
    }
  }
}

PosteriorDraws read_draws_csv(const std::filesystem::path& path) {
  auto is = open_in(path);
  const std::string fname = path.string();
  std::string line;
  if (!std::getline(is, line)) throw DataError(fname + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "chain" || header[1] != "iteration") {
    throw DataError(fname + ":1: bad header");
  }
  PosteriorDraws out;
  out.names.assign(header.begin() + 2, header.end());
  std::vector<std::vector<Eigen::VectorXd>> rows_per_chain;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw DataError(fname + ":" + std::to_string(lineno) +
                      ": wrong field count");
    }
    const int chain = static_cast<int>(parse_double(f[0], fname, lineno));
    if (chain < 1) throw DataError(fname + ": bad chain index");
    if (static_cast<int>(rows_per_chain.size()) < chain) {
      rows_per_chain.resize(chain);
    }
    Eigen::VectorXd v(out.names.size());
    for (std::size_t k = 0; k < out.names.size(); ++k) {
      v(k) = parse_double(f[2 + k], fname, lineno);
    }
    rows_per_chain[chain - 1].push_back(std::move(v));
  }
  if (rows_per_chain.empty()) throw DataError(fname + ": no draws");
  for (const auto& rows : rows_per_chain) {
    if (rows.size() != rows_per_chain.front().size()) {
      throw DataError(fname + ": chains have unequal lengths");
    }
    Eigen::MatrixXd m(rows.size(), out.names.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      m.row(i) = rows[i].transpose();
    }
    out.chains.push_back(std::move(m));
  }
  out.diagnostics.resize(out.chains.size());
  return out;
}

std::vector<SummaryRow> summarize_draws(const PosteriorDraws& draws) {
  std::vector<SummaryRow> rows;
  const bool can_diag = draws.num_chains() >= 2 && draws.num_samples() >= 50;
  for (const auto& name : draws.names) {
    SummaryRow r;
    r.name = name;
    Eigen::VectorXd x = draws.pooled(name);
    r.mean = x.mean();
    r.sd = std::sqrt((x.array() - r.mean).square().sum() /
                     std::max<long>(1, x.size() - 1));
    std::vector<double> v(x.data(), x.data() + x.size());
    std::sort(v.begin(), v.end());
    const auto quantile = [&](double q) {
      const double idx = q * (v.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(idx);
      const std::size_t hi = std::min(lo + 1, v.size() - 1);
      return (1.0 - (idx - lo)) * v[lo] + (idx - lo) * v[hi];
    };
    r.q025 = quantile(0.025);
    r.q50 = quantile(0.5);
    r.q975 = quantile(0.975);
    r.rhat_value = can_diag ? rhat(draws, name) : 0.0;
    r.ess_value = draws.num_chains() * draws.num_samples() >= 100
                      ? ess(draws, name)
                      : 0.0;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows,
                       const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "parameter,mean,sd,q2.5,q50,q97.5,rhat,ess\n";
  for (const auto& r : rows) {
    os << r.name << "," << format_double(r.mean) << "," << format_double(r.sd)
       << "," << format_double(r.q025) << "," << format_double(r.q50) << ","
       << format_double(r.q975) << "," << format_double(r.rhat_value) << ","
       << format_double(r.ess_value) << "\n";
  }
}

}  // namespace cpjm
