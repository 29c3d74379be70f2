#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ldnhim/features.hpp"
#include "ldnhim/sections.hpp"

namespace ldnhim {

using Manifest = std::vector<std::pair<std::string, std::string>>;

// Header u,v,valid,ld_total,ld_forward,ld_backward; v-outer rows, 17
// significant digits, nan in masked cells. Manifest entries go first as
// "# key=value" lines.
void write_csv(std::ostream& os, const GridField& grid, const Manifest& manifest = {});

struct CsvGrid {
  Manifest manifest;
  int nu = 0;
  int nv = 0;
  std::vector<double> u, v;
  std::vector<std::uint8_t> valid;
  std::vector<CellValue> values;
};

// Reads what write_csv writes. The grid shape comes from the distinct u and v
// columns. Throws ShapeError on malformed input.
CsvGrid read_csv(std::istream& is);

// Binary 8-bit PGM, top row at v_max. Valid cells are scaled min-max to
// 1..255; masked cells are 0.
void write_pgm(std::ostream& os, const GridField& grid,
               FieldComponent which = FieldComponent::Total);

// Whitespace-separated square matrix, one row per line. Blank lines and
// '#' comments are skipped. Throws ShapeError.
Eigen::MatrixXd read_matrix(std::istream& is);

// Flat key=value text with '#' comments. Throws ParameterDomainError on a
// line without '='.
std::map<std::string, std::string> read_config(std::istream& is);

}  // namespace ldnhim
