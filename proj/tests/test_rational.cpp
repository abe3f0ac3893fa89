#include <catch2/catch_amalgamated.hpp>

#include "homog/rational.hpp"

using homog::classify_regime;
using homog::Rational;
using homog::Regime;

TEST_CASE("parsing and normalization") {
    CHECK(Rational::parse("5/2") == Rational(5, 2));
    CHECK(Rational::parse("-3") == Rational(-3));
    CHECK(Rational::parse(" 7 / 4 ") == Rational(7, 4));
    CHECK(Rational(2, 4) == Rational(1, 2));
    CHECK(Rational(1, -2) == Rational(-1, 2));
    CHECK(Rational(-6, -4) == Rational(3, 2));
    CHECK(Rational(0, 7) == Rational(0));
    CHECK(Rational(5, 2).str() == "5/2");
    CHECK(Rational(-1, 2).str() == "-1/2");
    CHECK(Rational(4, 2).str() == "2");
}

TEST_CASE("parse failures") {
    CHECK_THROWS_AS(Rational::parse("a"), std::invalid_argument);
    CHECK_THROWS_AS(Rational::parse(""), std::invalid_argument);
    CHECK_THROWS_AS(Rational::parse("2/"), std::invalid_argument);
    CHECK_THROWS_AS(Rational::parse("1/0"), std::invalid_argument);
    CHECK_THROWS_AS(Rational::parse("1.5"), std::invalid_argument);
}

TEST_CASE("arithmetic and ordering") {
    CHECK(Rational(1, 2) + Rational(1, 3) == Rational(5, 6));
    CHECK(Rational(1, 2) - Rational(1, 3) == Rational(1, 6));
    CHECK(Rational(2, 3) * Rational(9, 4) == Rational(3, 2));
    CHECK(Rational(5, 2) < Rational(3));
    CHECK(Rational(7, 3) > Rational(2));
    CHECK(Rational(1, 2) <= Rational(2, 4));
    CHECK(Rational(1, 2) >= Rational(2, 4));
    CHECK(Rational(5, 2).value() == 2.5);
    // ordering is exact even where doubles would tie
    CHECK(Rational(1000000000000000000, 3) < Rational(1000000000000000001, 3));
}

TEST_CASE("regime classification is exact") {
    const Rational one(1);
    CHECK(classify_regime(one, Rational(2)) == Regime::SubCritical);
    CHECK(classify_regime(one, Rational(5, 2)) == Regime::SubCritical);
    CHECK(classify_regime(one, Rational(3)) == Regime::Critical);
    CHECK(classify_regime(one, Rational(7, 2)) == Regime::SuperCritical);

    // fractional capacity exponent: critical line sits at q + 2 exactly
    CHECK(classify_regime(Rational(1, 2), Rational(5, 2)) == Regime::Critical);
    CHECK(classify_regime(Rational(1, 2), Rational(49, 20)) == Regime::SubCritical);
    CHECK(classify_regime(Rational(1, 2), Rational(51, 20)) == Regime::SuperCritical);
    CHECK(classify_regime(Rational(0), Rational(2)) == Regime::Critical);

    // near-tie that floating point comparison would misclassify
    CHECK(classify_regime(Rational(1000000000, 3), Rational(1000000006, 3)) ==
          Regime::Critical);
    CHECK(classify_regime(Rational(1000000000, 3), Rational(1000000005, 3)) ==
          Regime::SubCritical);
}

TEST_CASE("regime names round-trip") {
    for (Regime g : {Regime::SubCritical, Regime::Critical, Regime::SuperCritical})
        CHECK(homog::regime_from_name(homog::regime_name(g)) == g);
    CHECK_THROWS_AS(homog::regime_from_name("weird"), std::invalid_argument);
}
