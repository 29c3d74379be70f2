#include "ldnhim/grid_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ldnhim/errors.hpp"

namespace ldnhim {
namespace {

std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  if (t == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ShapeError("not a number: '" + t + "'");
  }
  if (used != t.size()) throw ShapeError("not a number: '" + t + "'");
  return x;
}

double component(const CellValue& c, FieldComponent which) {
  switch (which) {
    case FieldComponent::Forward: return c.forward;
    case FieldComponent::Backward: return c.backward;
    case FieldComponent::Total: break;
  }
  return c.total;
}

}  // namespace

void write_csv(std::ostream& os, const GridField& grid, const Manifest& manifest) {
  for (const auto& [k, v] : manifest) os << "# " << k << '=' << v << '\n';
  os << "u,v,valid,ld_total,ld_forward,ld_backward\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int j = 0; j < grid.nv; ++j) {
    const std::string v = fmt17(grid.v_at(j));
    for (int i = 0; i < grid.nu; ++i) {
      const bool ok = grid.valid(i, j);
      const CellValue c = ok ? grid.values[grid.index(i, j)] : CellValue{nan, nan, nan};
      os << fmt17(grid.u_at(i)) << ',' << v << ',' << (ok ? 1 : 0) << ',' << fmt17(c.total)
         << ',' << fmt17(c.forward) << ',' << fmt17(c.backward) << '\n';
    }
  }
}

CsvGrid read_csv(std::istream& is) {
  CsvGrid g;
  std::string line;
  bool header = false;
  std::vector<double> us, vs;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string::npos) g.manifest.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (!header) {
      if (trim(line) != "u,v,valid,ld_total,ld_forward,ld_backward") {
        throw ShapeError("unexpected CSV header: " + line);
      }
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw ShapeError("CSV row needs 6 fields: " + line);
    us.push_back(parse_double(f[0]));
    vs.push_back(parse_double(f[1]));
    g.valid.push_back(parse_double(f[2]) != 0.0 ? 1 : 0);
    g.values.push_back({parse_double(f[3]), parse_double(f[4]), parse_double(f[5])});
  }
  if (!header) throw ShapeError("CSV has no header");
  if (us.empty()) return g;
  // v-outer: the first row of cells ends where v changes.
  std::size_t nu = 1;
  while (nu < vs.size() && vs[nu] == vs[0]) ++nu;
  if (us.size() % nu != 0) throw ShapeError("CSV rows do not form a rectangle");
  g.nu = static_cast<int>(nu);
  g.nv = static_cast<int>(us.size() / nu);
  g.u.assign(us.begin(), us.begin() + g.nu);
  for (int j = 0; j < g.nv; ++j) g.v.push_back(vs[static_cast<std::size_t>(j) * nu]);
  return g;
}

void write_pgm(std::ostream& os, const GridField& grid, FieldComponent which) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int j = 0; j < grid.nv; ++j) {
    for (int i = 0; i < grid.nu; ++i) {
      if (!grid.valid(i, j)) continue;
      const double x = component(grid.values[grid.index(i, j)], which);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  os << "P5\n" << grid.nu << ' ' << grid.nv << "\n255\n";
  std::vector<char> row(static_cast<std::size_t>(grid.nu));
  for (int j = grid.nv - 1; j >= 0; --j) {
    for (int i = 0; i < grid.nu; ++i) {
      unsigned char px = 0;
      if (grid.valid(i, j)) {
        const double x = component(grid.values[grid.index(i, j)], which);
        const double s = hi > lo ? (x - lo) / (hi - lo) : 0.0;
        px = static_cast<unsigned char>(1 + std::lround(s * 254.0));
      }
      row[static_cast<std::size_t>(i)] = static_cast<char>(px);
    }
    os.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

Eigen::MatrixXd read_matrix(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::stringstream ss(line);
    std::vector<double> row;
    for (std::string tok; ss >> tok;) row.push_back(parse_double(tok));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ShapeError("matrix file is empty");
  const std::size_t n = rows.size();
  Eigen::MatrixXd m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != n) {
      throw ShapeError("matrix is not square: row " + std::to_string(r + 1) + " has " +
                       std::to_string(rows[r].size()) + " entries, expected " +
                       std::to_string(n));
    }
    for (std::size_t c = 0; c < n; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

std::map<std::string, std::string> read_config(std::istream& is) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParameterDomainError("config line " + std::to_string(lineno) + " has no '='");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ParameterDomainError("config line " + std::to_string(lineno) + " has an empty key");
    }
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

}  // namespace ldnhim
