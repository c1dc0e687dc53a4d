#pragma once

#include <Eigen/Core>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "canreg/efficiency.hpp"
#include "canreg/errors.hpp"
#include "canreg/restore.hpp"
#include "canreg/score_expansion.hpp"

namespace canreg {

// 17 significant digits: doubles survive a write/parse round trip exactly.
inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& field, int row, const std::string& column) {
  const std::string s = strip(field);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw ValidationError("row " + std::to_string(row) + ", column '" + column +
                          "': cannot parse value '" + s + "'");
  return v;
}

}  // namespace detail

//! Reads a dataset with header u,x1,...,xq,y; the values are the observed
//! (distorted) variables.
inline ObservedSample read_observed_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "': empty file");
  auto header = detail::split(line, ',');
  for (auto& h : header) h = detail::strip(h);
  if (header.size() < 3 || header.front() != "u")
    throw ValidationError("'" + path + "': missing column 'u' (expected header u,x1..xq,y)");
  if (header.back() != "y") throw ValidationError("'" + path + "': missing column 'y'");
  const int q = static_cast<int>(header.size()) - 2;
  for (int r = 0; r < q; ++r) {
    const std::string expected = "x" + std::to_string(r + 1);
    if (header[static_cast<std::size_t>(r) + 1] != expected)
      throw ValidationError("'" + path + "': missing column '" + expected + "'");
  }

  std::vector<std::vector<double>> rows;
  int row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (detail::strip(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != header.size())
      throw ValidationError("'" + path + "': row " + std::to_string(row_number) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c)
      values[c] = detail::parse_double(fields[c], row_number, header[c]);
    for (std::size_t c = 0; c < values.size(); ++c)
      if (!std::isfinite(values[c]))
        throw ValidationError("'" + path + "': non-finite value at row " +
                              std::to_string(row_number) + ", column '" + header[c] + "'");
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ValidationError("'" + path + "': no data rows");

  ObservedSample sample;
  const int n = static_cast<int>(rows.size());
  sample.u.resize(n);
  sample.x.resize(n, q);
  sample.y.resize(n);
  for (int i = 0; i < n; ++i) {
    sample.u[i] = rows[static_cast<std::size_t>(i)][0];
    for (int r = 0; r < q; ++r) sample.x(i, r) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(r) + 1];
    sample.y[i] = rows[static_cast<std::size_t>(i)].back();
  }
  return sample;
}

inline void write_observed_csv(const std::string& path, const ObservedSample& sample) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << "u";
  for (int r = 0; r < sample.q(); ++r) out << ",x" << (r + 1);
  out << ",y\n";
  for (int i = 0; i < sample.n(); ++i) {
    out << format_value(sample.u[i]);
    for (int r = 0; r < sample.q(); ++r) out << ',' << format_value(sample.x(i, r));
    out << ',' << format_value(sample.y[i]) << '\n';
  }
}

inline void write_latent_csv(const std::string& path, const LatentSample& sample) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  const int q = sample.q();
  out << "u";
  for (int r = 0; r < q; ++r) out << ",x" << (r + 1);
  out << ",y,eps,psi";
  for (int r = 0; r < q; ++r) out << ",phi" << (r + 1);
  for (int r = 0; r < q; ++r) out << ",xt" << (r + 1);
  out << ",yt\n";
  for (int i = 0; i < sample.n(); ++i) {
    out << format_value(sample.u[i]);
    for (int r = 0; r < q; ++r) out << ',' << format_value(sample.x(i, r));
    out << ',' << format_value(sample.y[i]) << ',' << format_value(sample.eps[i]) << ','
        << format_value(sample.psi[i]);
    for (int r = 0; r < q; ++r) out << ',' << format_value(sample.phi(i, r));
    for (int r = 0; r < q; ++r) out << ',' << format_value(sample.xt(i, r));
    out << ',' << format_value(sample.yt[i]) << '\n';
  }
}

//! Key=value description of a linear-model moment set. Vector values are
//! comma separated; `exx` is row-major including the intercept row/column.
inline MomentSet read_moment_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string s = detail::strip(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ValidationError("'" + path + "': line " + std::to_string(line_number) + " is not key=value");
    kv[detail::strip(s.substr(0, eq))] = detail::strip(s.substr(eq + 1));
  }
  auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError("'" + path + "': missing key '" + key + "'");
    return it->second;
  };
  auto parse_list = [&](const std::string& key) {
    const auto fields = detail::split(need(key), ',');
    Eigen::VectorXd v(static_cast<int>(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i)
      v[static_cast<int>(i)] = detail::parse_double(fields[i], 0, key);
    return v;
  };
  auto parse_scalar = [&](const std::string& key) { return detail::parse_double(need(key), 0, key); };

  const int q = static_cast<int>(parse_scalar("q"));
  if (q < 1) throw ValidationError("'" + path + "': q must be >= 1");
  const Eigen::VectorXd ex = parse_list("ex");
  const Eigen::VectorXd exx_flat = parse_list("exx");
  if (ex.size() != q || exx_flat.size() != (q + 1) * (q + 1))
    throw ValidationError("'" + path + "': ex must have q entries and exx (q+1)^2 entries");
  Eigen::MatrixXd exx(q + 1, q + 1);
  for (int i = 0; i <= q; ++i)
    for (int j = 0; j <= q; ++j) exx(i, j) = exx_flat[i * (q + 1) + j];
  const Eigen::VectorXd beta =
      kv.count("beta") ? parse_list("beta") : Eigen::VectorXd::Ones(q + 1);
  return make_moment_set(ex, exx, parse_scalar("var_psi"), parse_list("e_psiphi"),
                         parse_list("var_phi"), parse_scalar("sigma2"), beta,
                         "file:" + path);
}

}  // namespace canreg
