#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pktmatch/core.hpp"

using namespace pktmatch;

namespace {
Observation pk(int size, Direction dir) { return {0.0, size, dir}; }
constexpr auto Up = Direction::Upstream;
constexpr auto Down = Direction::Downstream;
}  // namespace

TEST_CASE("fuzzy_match examples") {
    CHECK(fuzzy_match(pk(254, Down), pk(254, Down), 1));
    CHECK_FALSE(fuzzy_match(pk(254, Down), pk(255, Down), 1));
    CHECK(fuzzy_match(pk(254, Down), pk(257, Down), 5));
    for (int eps : {1, 2, 5, 100}) CHECK_FALSE(fuzzy_match(pk(254, Down), pk(254, Up), eps));
}

TEST_CASE("fuzzy_match boundary is strict") {
    CHECK_FALSE(fuzzy_match(pk(100, Up), pk(105, Up), 5));
    CHECK(fuzzy_match(pk(100, Up), pk(104, Up), 5));
    CHECK(fuzzy_match(pk(104, Up), pk(100, Up), 5));
}

TEST_CASE("fuzzy_match properties over a grid") {
    for (int a = 90; a <= 110; ++a) {
        for (int b = 90; b <= 110; ++b) {
            for (auto da : {Up, Down}) {
                for (auto db : {Up, Down}) {
                    for (int eps = 1; eps <= 8; ++eps) {
                        const bool m = fuzzy_match(pk(a, da), pk(b, db), eps);
                        CHECK(m == fuzzy_match(pk(b, db), pk(a, da), eps));
                        if (m) CHECK(fuzzy_match(pk(a, da), pk(b, db), eps + 1));
                    }
                    CHECK(fuzzy_match(pk(a, da), pk(b, db), 1) == (a == b && da == db));
                }
                CHECK(fuzzy_match(pk(a, da), pk(a, da), 1));
            }
        }
    }
}

TEST_CASE("direction and kind parsing") {
    CHECK(parse_direction("up") == Up);
    CHECK(parse_direction("down") == Down);
    CHECK_FALSE(parse_direction("sideways"));
    CHECK(parse_frame_kind("mgmt") == FrameKind::Management);
    CHECK(parse_frame_kind("ctrl") == FrameKind::Control);
    CHECK_FALSE(parse_frame_kind("beacon"));
    CHECK(to_string(Up) == "up");
    CHECK(to_string(FrameKind::Data) == "data");
}

TEST_CASE("required matches uses the ceiling") {
    MatchParams p;
    CHECK(p.required_matches(2) == 2);
    CHECK(p.required_matches(3) == 2);
    CHECK(p.required_matches(5) == 3);
    CHECK(p.required_matches(10) == 6);
    CHECK(p.required_matches(42) == 26);
    p.gamma = 1.0;
    CHECK(p.required_matches(7) == 7);
}

TEST_CASE("match params validation") {
    CHECK_NOTHROW(MatchParams{}.validate());
    MatchParams p;
    p.epsilon = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.gamma = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.gamma = 1.2;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.beta = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.seg_min = 0;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("trace validation") {
    Trace t;
    t.packets = {{0.0, 10, Up}, {0.5, 20, Down}};
    t.labels = {{"a", "E1", 15.5}};
    CHECK_NOTHROW(t.validate());
    t.labels = {{"a", "E1", 15.6}};
    CHECK_THROWS_AS(t.validate(), Error);
    t.labels.clear();
    t.packets = {{0.5, 10, Up}, {0.4, 20, Down}};
    CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("fingerprint validation") {
    Fingerprint fp;
    fp.packets = {{0.0, 100, Up}, {0.1, 200, Down}, {0.9, 300, Up}};
    fp.segments = {{0, 2}, {2, 3}};
    CHECK_NOTHROW(fp.validate());
    CHECK(fp.duration() == doctest::Approx(0.9));
    fp.segments = {{0, 2}};
    CHECK_THROWS_AS(fp.validate(), Error);
    fp.segments = {{0, 1}, {2, 3}};
    CHECK_THROWS_AS(fp.validate(), Error);
    fp.segments = {};
    fp.packets[0].dt = 0.1;
    CHECK_THROWS_AS(fp.validate(), Error);
}
