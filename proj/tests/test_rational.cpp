#include <catch2/catch_amalgamated.hpp>

#include <limits>

#include "reflforge/rational.hpp"

using reflforge::Rational;

TEST_CASE("rational normalizes on construction") {
  CHECK(Rational(2, 4) == Rational(1, 2));
  CHECK(Rational(-2, 4) == Rational(1, -2));
  CHECK(Rational(-2, 4).den() == 2);
  CHECK(Rational(-2, 4).num() == -1);
  CHECK(Rational(0, 7) == Rational(0));
  CHECK_THROWS_AS(Rational(1, 0), std::domain_error);
}

TEST_CASE("rational arithmetic is exact") {
  CHECK(Rational(1, 3) + Rational(1, 6) == Rational(1, 2));
  CHECK(Rational(1, 2) - Rational(1, 2) == Rational(0));
  CHECK(Rational(2, 3) * Rational(3, 4) == Rational(1, 2));
  CHECK(Rational(1, 3) / Rational(2, 3) == Rational(1, 2));
  CHECK(-Rational(1, 3) == Rational(-1, 3));
  CHECK_THROWS_AS(Rational(1, 2) / Rational(0), std::domain_error);

  // (3-1)/4 style step values stay exact through averaging.
  Rational sum;
  for (const auto& v : {Rational(1), Rational(1, 2), Rational(0)}) sum += v;
  CHECK(sum / Rational(3) == Rational(1, 2));
}

TEST_CASE("rational ordering uses cross products") {
  CHECK(Rational(1, 3) < Rational(1, 2));
  CHECK(Rational(-1, 2) < Rational(-1, 3));
  CHECK(Rational(2, 4) <= Rational(1, 2));
  CHECK(Rational(5, 3) > Rational(3, 2));
}

TEST_CASE("rational serializes as num/den and parses back") {
  CHECK(Rational(1, 3).to_string() == "1/3");
  CHECK(Rational(-2, 6).to_string() == "-1/3");
  CHECK(Rational::parse("1/3") == Rational(1, 3));
  CHECK(Rational::parse("-7") == Rational(-7));
  CHECK(Rational::parse("4/-6") == Rational(-2, 3));
  CHECK_FALSE(Rational::parse("").has_value());
  CHECK_FALSE(Rational::parse("a/b").has_value());
  CHECK_FALSE(Rational::parse("1/0").has_value());

  // No float drift on awkward thirds.
  const Rational v(1, 3);
  CHECK(Rational::parse(v.to_string()) == v);
}

TEST_CASE("rational overflow is detected, not wrapped") {
  const auto big = std::numeric_limits<std::int64_t>::max();
  CHECK_THROWS_AS(Rational(big, 1) + Rational(big, 1), std::overflow_error);
  CHECK_THROWS_AS(Rational(big, 1) * Rational(big, 1), std::overflow_error);
}

TEST_CASE("rational to_double") {
  CHECK(Rational(1, 2).to_double() == 0.5);
  CHECK(Rational(-1, 4).to_double() == -0.25);
}
