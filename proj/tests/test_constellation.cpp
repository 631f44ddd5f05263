#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mimo/constellation.hpp"

using mimo::Complex;
using mimo::ConfigError;
using mimo::Constellation;
using mimo::ConstellationId;

namespace {

struct FixtureRow {
  std::string name;
  int label;
  double re, im;
  std::string bits;
};

std::vector<FixtureRow> load_fixture() {
  std::ifstream in(std::string(TEST_FIXTURE_DIR) + "/constellation_gray.csv");
  REQUIRE(in.good());
  std::vector<FixtureRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    FixtureRow row;
    std::string field;
    std::getline(ss, row.name, ',');
    std::getline(ss, field, ',');
    row.label = std::stoi(field);
    std::getline(ss, field, ',');
    row.re = std::stod(field);
    std::getline(ss, field, ',');
    row.im = std::stod(field);
    std::getline(ss, row.bits, ',');
    rows.push_back(std::move(row));
  }
  return rows;
}

const std::vector<std::string> kNames = {
    "phi", "bpsk", "qpsk", "qam16", "qam64", "qam256", "qam1024"};

}  // namespace

TEST_CASE("points and bit labels match the frozen reference table") {
  const auto rows = load_fixture();
  CHECK(rows.size() == 1 + 2 + 4 + 16 + 64 + 256 + 1024);
  for (const auto& row : rows) {
    const auto& cons = Constellation::by_name(row.name);
    const Complex p = cons.point(row.label);
    CHECK(p.real() == doctest::Approx(row.re).epsilon(1e-14));
    CHECK(p.imag() == doctest::Approx(row.im).epsilon(1e-14));
    CHECK(static_cast<int>(row.bits.size()) == cons.bits_per_symbol());
    for (int k = 0; k < cons.bits_per_symbol(); ++k) {
      CHECK(cons.bit(row.label, k) == row.bits[static_cast<size_t>(k)] - '0');
    }
  }
}

TEST_CASE("unit average energy") {
  for (const auto& name : kNames) {
    const auto& cons = Constellation::by_name(name);
    if (cons.bits_per_symbol() == 0) continue;
    double e = 0.0;
    for (const auto& p : cons.points()) e += std::norm(p);
    CHECK(e / cons.size() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("slicing returns the label of every exact point") {
  for (const auto& name : kNames) {
    const auto& cons = Constellation::by_name(name);
    for (int label = 0; label < cons.size(); ++label) {
      CHECK(cons.slice(cons.point(label)) == label);
    }
  }
}

TEST_CASE("slicing tolerates sub-half-spacing perturbations") {
  const auto& cons = Constellation::by_name("qam64");
  const double spacing = std::abs(cons.point(0).real() - cons.point(8).real());
  const double eps = 0.49 * spacing;
  for (int label = 0; label < cons.size(); ++label) {
    const Complex p = cons.point(label);
    CHECK(cons.slice(p + Complex(eps, -eps)) == label);
    CHECK(cons.slice(p + Complex(-eps, eps)) == label);
  }
}

TEST_CASE("axis neighbors differ in exactly one bit") {
  for (const auto& name : kNames) {
    const auto& cons = Constellation::by_name(name);
    const int q = cons.bits_per_symbol();
    if (q < 2) continue;
    for (int a = 0; a < cons.size(); ++a) {
      for (int b = a + 1; b < cons.size(); ++b) {
        const Complex d = cons.point(a) - cons.point(b);
        const bool axis_neighbor =
            (std::abs(d.real()) < 1e-12 || std::abs(d.imag()) < 1e-12) &&
            std::abs(d) < 1.01 * std::abs(cons.point(0) - cons.point(1));
        if (!axis_neighbor) continue;
        int hamming = 0;
        for (int k = 0; k < q; ++k) {
          hamming += cons.bit(a, k) != cons.bit(b, k);
        }
        CHECK(hamming == 1);
      }
    }
  }
}

TEST_CASE("midpoint slicing picks the smaller axis codeword") {
  const auto& q16 = Constellation::by_name("qam16");
  // The origin sits between the inner levels on both axes; both inner
  // levels map to codewords 01 and 11, so 01 wins on each axis.
  CHECK(q16.slice(Complex(0.0, 0.0)) == 0b0101);
  const double s = std::abs(q16.point(0).real()) / 3.0;  // level spacing / 2
  // Between the two most negative in-phase levels: codewords 00 and 01.
  CHECK(q16.slice(Complex(-2.0 * s, -3.0 * s)) == 0b0000);

  const auto& bpsk = Constellation::by_name("bpsk");
  CHECK(bpsk.slice(Complex(0.0, 0.0)) == 0);
}

TEST_CASE("bit partitions split the alphabet in half") {
  const auto& cons = Constellation::by_name("qam64");
  for (int k = 0; k < cons.bits_per_symbol(); ++k) {
    const auto& zeros = cons.labels_with_bit(k, 0);
    const auto& ones = cons.labels_with_bit(k, 1);
    CHECK(zeros.size() == static_cast<size_t>(cons.size() / 2));
    CHECK(ones.size() == static_cast<size_t>(cons.size() / 2));
    for (int label : zeros) CHECK(cons.bit(label, k) == 0);
    for (int label : ones) CHECK(cons.bit(label, k) == 1);
  }
}

TEST_CASE("layered-bound distance parameter") {
  CHECK(Constellation::get(ConstellationId::kPhi).min_bit_error_distance() == 0.0);
  CHECK(Constellation::get(ConstellationId::kBpsk).min_bit_error_distance() == 2.0);
  CHECK(Constellation::get(ConstellationId::kQpsk).min_bit_error_distance() == 1.0);
  CHECK(Constellation::get(ConstellationId::kQam16).min_bit_error_distance() == 0.5);
}

TEST_CASE("name lookup") {
  for (const auto& name : kNames) {
    CHECK(Constellation::by_name(name).name() == name);
  }
  CHECK_THROWS_AS(Constellation::by_name("qam32"), ConfigError);
  CHECK(Constellation::by_name("phi").size() == 1);
  CHECK(Constellation::by_name("phi").bits_per_symbol() == 0);
  CHECK(Constellation::by_name("phi").point(0) == Complex(0.0, 0.0));
}
