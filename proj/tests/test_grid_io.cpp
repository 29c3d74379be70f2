#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "ldnhim/errors.hpp"
#include "ldnhim/grid_io.hpp"
#include "test_util.hpp"

using namespace ldnhim;

namespace {

GridField small_grid() {
  LDParams lp;
  lp.tau = 1.0;
  const SystemModel d2 = build_system(ModelKind::Decoupled2, {});
  return grid_ld(d2, find_section("decoupled2/q1p1"), 0.2, {}, 7, 5, lp, 1);
}

}  // namespace

TEST_CASE("CSV round trip") {
  const GridField g = small_grid();
  std::ostringstream os;
  write_csv(os, g, {{"model", "decoupled2"}, {"h", "0.2"}});
  const std::string text = os.str();
  CHECK(text.rfind("# model=decoupled2\n# h=0.2\nu,v,valid,ld_total,ld_forward,ld_backward\n", 0) ==
        0);
  CHECK(text.find("nan") != std::string::npos);

  std::istringstream is(text);
  const CsvGrid c = read_csv(is);
  CHECK(c.manifest == Manifest{{"model", "decoupled2"}, {"h", "0.2"}});
  REQUIRE(c.nu == 7);
  REQUIRE(c.nv == 5);
  for (int i = 0; i < 7; ++i) CHECK(c.u[static_cast<std::size_t>(i)] == g.u_at(i));
  for (int j = 0; j < 5; ++j) CHECK(c.v[static_cast<std::size_t>(j)] == g.v_at(j));
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 7; ++i) {
      const std::size_t k = g.index(i, j);
      CHECK((c.valid[k] != 0) == g.valid(i, j));
      if (g.valid(i, j)) {
        CHECK(c.values[k].total == g.values[k].total);
        CHECK(c.values[k].forward == g.values[k].forward);
        CHECK(c.values[k].backward == g.values[k].backward);
      } else {
        CHECK(std::isnan(c.values[k].total));
      }
    }
  }
}

TEST_CASE("CSV reader rejects malformed input") {
  std::istringstream no_header("1,2,1,3,4,5\n");
  CHECK_THROWS_AS(read_csv(no_header), ShapeError);
  std::istringstream short_row("u,v,valid,ld_total,ld_forward,ld_backward\n1,2,1,3\n");
  CHECK_THROWS_AS(read_csv(short_row), ShapeError);
  std::istringstream bad_number("u,v,valid,ld_total,ld_forward,ld_backward\n1,2,1,x,4,5\n");
  CHECK_THROWS_AS(read_csv(bad_number), ShapeError);
}

TEST_CASE("PGM heatmap") {
  const GridField g = small_grid();
  std::ostringstream os;
  write_pgm(os, g);
  const std::string s = os.str();
  const std::string head = "P5\n7 5\n255\n";
  REQUIRE(s.size() == head.size() + 35);
  CHECK(s.compare(0, head.size(), head) == 0);
  int lo = 256, hi = -1;
  for (int r = 0; r < 5; ++r) {
    const int j = 4 - r;  // first image row is the top of the grid
    for (int i = 0; i < 7; ++i) {
      const auto px = static_cast<unsigned char>(s[head.size() + static_cast<std::size_t>(r * 7 + i)]);
      if (!g.valid(i, j)) {
        CHECK(px == 0);
      } else {
        CHECK(px >= 1);
        lo = std::min(lo, static_cast<int>(px));
        hi = std::max(hi, static_cast<int>(px));
      }
    }
  }
  CHECK(lo == 1);
  CHECK(hi == 255);
}

TEST_CASE("matrix files") {
  std::istringstream ok(
      "# two_dof\n0 0 1 0\n0 0 0 1\n\n-1 0 1 1  # row 3\n0 -1 1 1\n");
  const Eigen::MatrixXd m = read_matrix(ok);
  CHECK(m == testutil::printed_matrices(2)[0]);
  std::istringstream ragged("1 0 0\n0 1\n0 0 1\n");
  CHECK_THROWS_AS(read_matrix(ragged), ShapeError);
  std::istringstream wide("1 0 0\n0 1 0\n");
  CHECK_THROWS_AS(read_matrix(wide), ShapeError);
  std::istringstream junk("1 a\n0 1\n");
  CHECK_THROWS_AS(read_matrix(junk), ShapeError);
  std::istringstream empty("# nothing\n");
  CHECK_THROWS_AS(read_matrix(empty), ShapeError);
}

TEST_CASE("config files") {
  std::istringstream ok("# sweep\nmodel = coupled2\n\ntau=5\n");
  const auto c = read_config(ok);
  CHECK(c.at("model") == "coupled2");
  CHECK(c.at("tau") == "5");
  CHECK(c.size() == 2);
  std::istringstream bad("model coupled2\n");
  CHECK_THROWS_AS(read_config(bad), ParameterDomainError);
}
