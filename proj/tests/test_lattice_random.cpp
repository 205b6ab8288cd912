#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "rshe/csv.hpp"
#include "rshe/lattice.hpp"
#include "rshe/random_stream.hpp"

using namespace rshe;

TEST_CASE("riesz spec accepts 0 < beta < min(d, 2)") {
  CHECK_NOTHROW(RieszSpec::make(1, 0.5));
  CHECK_NOTHROW(RieszSpec::make(3, 1.9));
  CHECK_THROWS_AS(RieszSpec::make(1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(RieszSpec::make(1, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(RieszSpec::make(3, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(RieszSpec::make(2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(RieszSpec::make(4, 0.5), std::invalid_argument);
}

TEST_CASE("lattice geometry") {
  const Lattice lat(1, 512, 20.0);
  CHECK(lat.spacing() == 0.078125);
  CHECK(lat.points_per_axis() * lat.spacing() == 2.0 * lat.half_extent());
  CHECK(lat.center(0)[0] == doctest::Approx(-20.0 + 0.0390625));
  CHECK(lat.center(511)[0] == doctest::Approx(20.0 - 0.0390625));

  const Lattice sq(2, 8, 4.0);
  CHECK(sq.size() == 64);
  CHECK(sq.cell_volume() == 1.0);
  for (std::size_t i = 0; i < sq.size(); ++i) CHECK(sq.flatten(sq.unflatten(i)) == i);
  CHECK(sq.unflatten(9) == MultiIndex{1, 1, 0});
  CHECK(sq.min_image(5) == -3);
  CHECK(sq.min_image(4) == 4);
  CHECK(sq.min_image_distance(sq.flatten({3, 4, 0})) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(sq.min_image_distance(sq.flatten({7, 0, 0})) == doctest::Approx(1.0));
  CHECK(sq.shifted(sq.flatten({7, 2, 0}), {1, -3, 0}) == sq.flatten({0, 7, 0}));
}

TEST_CASE("philox known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are pure functions of their key") {
  RandomStream a(42, 3, 17), b(42, 3, 17);
  for (int i = 0; i < 1000; ++i) CHECK(a.normal() == b.normal());

  std::set<std::uint32_t> firsts;
  for (std::uint32_t replica = 0; replica < 4; ++replica) {
    for (std::uint32_t step = 0; step < 4; ++step) firsts.insert(RandomStream(42, replica, step).next_u32());
  }
  firsts.insert(RandomStream(43, 0, 0).next_u32());
  firsts.insert(RandomStream(42, 0, 0, StreamPurpose::diagnostic).next_u32());
  CHECK(firsts.size() == 18);
}

TEST_CASE("uniform and normal draws") {
  RandomStream s(7, 0, 0, StreamPurpose::test);
  const int n = 200000;
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.005));

  std::vector<double> z(n);
  s.fill_normal(z);
  double m1 = 0, m2 = 0, m4 = 0;
  for (double v : z) {
    m1 += v;
    m2 += v * v;
    m4 += v * v * v * v;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  CHECK(std::abs(m1) < 4.0 / std::sqrt(n));
  CHECK(m2 == doctest::Approx(1.0).epsilon(0.015));
  CHECK(m4 == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("csv formatting") {
  CHECK(csv::format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(csv::format_double(7.5424723326565077)) == 7.5424723326565077);
  CHECK(csv::format_double(std::nan("")) == "nan");
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,b") == "\"a,b\"");
  CHECK(csv::escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  std::ostringstream os;
  csv::write_row(os, {"x", "1,2"});
  CHECK(os.str() == "x,\"1,2\"\r\n");
}
