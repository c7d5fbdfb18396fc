#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "wfl/rng.hpp"

using namespace wfl;

TEST_CASE("derived streams are stable across runs", "[rng]") {
    // frozen first outputs; any change here breaks every recorded experiment
    RngSpec d = derive_stream(RngSpec{42, 0}, {3, 7});
    CHECK(d.master_seed == 42);
    CHECK(d.stream_id == 14538685048029728414ULL);
    StreamRng g(d);
    CHECK(g.next_u64() == 13134777463555469266ULL);
    CHECK(g.next_u64() == 9546729664470183806ULL);
    CHECK(g.next_u64() == 12503447500050850039ULL);
}

TEST_CASE("stream derivation separates labels and seeds", "[rng]") {
    CHECK(derive_stream(RngSpec{42, 0}, {0}).stream_id == 7175312947680778460ULL);
    CHECK(derive_stream(RngSpec{42, 0}, {1}).stream_id == 14339430525631324142ULL);
    CHECK(derive_stream(RngSpec{42, 0}, {0}).stream_id !=
          derive_stream(RngSpec{42, 0}, {1}).stream_id);
    CHECK(derive_stream(RngSpec{42, 0}, {0, 1}).stream_id !=
          derive_stream(RngSpec{42, 0}, {1, 0}).stream_id);
    // derivation only hashes the stream id; the master seed rides along and
    // separates the generators at construction time instead
    CHECK(derive_stream(RngSpec{42, 0}, {5}).master_seed == 42ULL);
    CHECK(StreamRng(derive_stream(RngSpec{42, 0}, {5})).next_u64() !=
          StreamRng(derive_stream(RngSpec{43, 0}, {5})).next_u64());
    CHECK(derive_stream(RngSpec{42, 1}, {5}).stream_id !=
          derive_stream(RngSpec{42, 2}, {5}).stream_id);
    CHECK_THROWS_AS(derive_stream(RngSpec{42, 0}, std::initializer_list<std::uint64_t>{}),
                    std::invalid_argument);
}

TEST_CASE("identical specs replay identical sequences", "[rng]") {
    StreamRng a(RngSpec{5, 9}), b(RngSpec{5, 9});
    for (int i = 0; i < 64; ++i) REQUIRE(a.next_u64() == b.next_u64());
    StreamRng c(RngSpec{6, 9});
    bool differs = false;
    StreamRng a2(RngSpec{5, 9});
    for (int i = 0; i < 8; ++i) differs |= a2.next_u64() != c.next_u64();
    CHECK(differs);
}

TEST_CASE("uniform01 stays in the half-open unit interval", "[rng]") {
    StreamRng g(RngSpec{7, 1});
    double mean = 0;
    for (int i = 0; i < 10000; ++i) {
        double u = g.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        mean += u;
    }
    mean /= 10000;
    CHECK(std::fabs(mean - 0.5) < 0.01);
}

TEST_CASE("uniform respects custom bounds", "[rng]") {
    StreamRng g(RngSpec{7, 5});
    for (int i = 0; i < 1000; ++i) {
        double u = g.uniform(-3.0, 5.0);
        REQUIRE(u >= -3.0);
        REQUIRE(u < 5.0);
    }
}

TEST_CASE("bernoulli hit rate tracks its parameter", "[rng]") {
    StreamRng g(RngSpec{7, 2});
    long hits = 0;
    for (int i = 0; i < 100000; ++i) hits += g.bernoulli(0.5);
    CHECK(std::fabs(hits / 100000.0 - 0.5) <= 0.005);

    StreamRng e(RngSpec{7, 6});
    for (int i = 0; i < 1000; ++i) {
        REQUIRE_FALSE(e.bernoulli(0.0));
        REQUIRE(e.bernoulli(1.0));
    }
    CHECK_THROWS_AS(e.bernoulli(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(e.bernoulli(1.1), std::invalid_argument);
}

TEST_CASE("uniform_int covers its range without visible bias", "[rng]") {
    StreamRng g(RngSpec{7, 4});
    std::vector<long> freq(7, 0);
    for (int i = 0; i < 70000; ++i) {
        auto v = g.uniform_int(7);
        REQUIRE(v < 7);
        ++freq[v];
    }
    for (long c : freq) CHECK(std::fabs(c / 70000.0 - 1.0 / 7.0) < 0.01);
    CHECK(g.uniform_int(1) == 0);
    CHECK_THROWS_AS(g.uniform_int(0), std::invalid_argument);
}

TEST_CASE("normal draws have the expected first two moments", "[rng]") {
    StreamRng g(RngSpec{7, 3});
    std::vector<double> xs(20000);
    double mean = 0;
    for (auto& x : xs) {
        x = g.normal();
        REQUIRE(std::isfinite(x));
        mean += x;
    }
    mean /= xs.size();
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.size() - 1;
    CHECK(std::fabs(mean) < 0.05);
    CHECK(std::fabs(var - 1.0) < 0.05);
}
