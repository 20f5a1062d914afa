#include "ebvs/dvs.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace ebvs;

namespace {

// One pixel at the principal point, f_x / Z = 1000 px/m.
CameraIntrinsics single_pixel() {
    CameraIntrinsics c;
    c.width = 1;
    c.height = 1;
    c.o_x = 0.0;
    c.o_y = 0.0;
    return c;
}

CameraIntrinsics small_sensor() {
    CameraIntrinsics c;
    c.width = 40;
    c.height = 12;
    c.o_x = 19.5;
    c.o_y = 5.5;
    return c;
}

DvsConfig latched(double C = 0.2) { return {C, DvsMode::Latched, 1, 0.0}; }
DvsConfig fractional(double C = 0.2) { return {C, DvsMode::IdealFractional, 1, 0.0}; }

long net(const std::vector<Event>& ev) {
    long n = 0;
    for (const auto& e : ev) n += e.p;
    return n;
}

}  // namespace

TEST(Dvs, NoMotionNoEvents) {
    const auto c = small_sensor();
    const auto p = make_dual_split(c, 10.0, 0.05, 6);
    DvsSimulator s(c, latched());
    s.reset(p, 0.01, 0);
    EXPECT_TRUE(s.step(p, 0.01, 1000).empty());
}

TEST(Dvs, SubThresholdEverywhere) {
    const auto c = small_sensor();
    const auto p = make_uniform(c, LinearProfile{1e-3});
    DvsSimulator s(c, latched());
    s.reset(p, 0.0, 0);
    // delta f = -k f_x dx = 0.99 C at every pixel
    EXPECT_TRUE(s.step(p, -0.99 * 0.2, 1000).empty());
}

TEST(Dvs, ResetIsIdempotent) {
    const auto c = small_sensor();
    const auto p = make_dual_split(c, 10.0, 0.05, 6);
    DvsSimulator a(c, latched());
    a.reset(p, 0.003, 0);
    a.step(p, 0.02, 1000);
    a.reset(p, 0.003, 0);
    DvsSimulator b(c, latched());
    b.reset(p, 0.003, 0);
    for (int v = 0; v < c.height; ++v)
        for (int u = 0; u < c.width; ++u) EXPECT_EQ(a.reference(u, v), b.reference(u, v));
}

TEST(Dvs, LatchRuleTwoAndAHalfThresholds) {
    const auto c = single_pixel();
    const auto p = make_uniform(c, LinearProfile{1e-3});
    DvsSimulator s(c, latched());
    s.reset(p, 0.0, 0);
    const auto ev = s.step(p, -0.5, 1000);  // f goes 0 -> 0.5 = 2.5 C
    ASSERT_EQ(ev.size(), 2u);
    for (const auto& e : ev) {
        EXPECT_EQ(e.p, 1);
        EXPECT_EQ(e.t_us, 1000);
    }
    EXPECT_NEAR(s.fractional_count(0, 0), 0.5, 1e-12);
    EXPECT_NEAR(s.reference(0, 0), 0.4, 1e-12);
}

TEST(Dvs, SubThresholdNegativeRetained) {
    const auto c = single_pixel();
    const auto p = make_uniform(c, LinearProfile{1e-3});
    DvsSimulator s(c, latched());
    s.reset(p, 0.0, 0);
    EXPECT_TRUE(s.step(p, 0.18, 1000).empty());  // -0.9 C
    EXPECT_NEAR(s.fractional_count(0, 0), -0.9, 1e-12);
    // the carried residual fires once the total crosses -C
    const auto ev = s.step(p, 0.21, 2000);
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].p, -1);
}

TEST(Dvs, IdealFractionalCount) {
    const auto c = single_pixel();
    const auto p = make_uniform(c, LinearProfile{1e-3});
    DvsSimulator s(c, fractional());
    s.reset(p, 0.0, 0);
    EXPECT_TRUE(s.step(p, -0.5, 1000).empty());
    EXPECT_NEAR(s.fractional_count(0, 0), 2.5, 1e-12);
    EXPECT_NEAR(s.fractional_count(PixelRegion{0, 0, 0, 0}), 2.5, 1e-12);
}

TEST(Dvs, NonMonotoneTimestampRejected) {
    const auto c = single_pixel();
    const auto p = make_uniform(c, LinearProfile{1e-3});
    DvsSimulator s(c, latched());
    s.reset(p, 0.0, 100);
    EXPECT_THROW(s.step(p, 0.0, 100), ContractViolation);
    s.step(p, 0.0, 200);
    EXPECT_THROW(s.step(p, 0.0, 150), ContractViolation);
}

TEST(Dvs, UseBeforeResetRejected) {
    DvsSimulator s(single_pixel(), latched());
    EXPECT_THROW(s.fractional_count(0, 0), ContractViolation);
}

TEST(Dvs, ConfigValidation) {
    EXPECT_THROW(DvsSimulator(single_pixel(), DvsConfig{0.0, DvsMode::Latched, 1, 0.0}), std::invalid_argument);
    EXPECT_THROW(DvsSimulator(single_pixel(), DvsConfig{0.2, DvsMode::Latched, 1, -0.1}), std::invalid_argument);
    EXPECT_THROW(DvsSimulator(small_sensor(), latched(), {PixelRegion{0, 40, 0, 0}}), std::invalid_argument);
}

TEST(CanonicalOrder, SortedStreamUnchanged) {
    std::vector<Event> ev{{1, 0, -1, 5}, {1, 0, 1, 5}, {0, 1, 1, 5}, {3, 0, 1, 7}};
    const auto copy = ev;
    canonical_sort(ev);
    EXPECT_EQ(ev, copy);
}

TEST(CanonicalOrder, PolarityTieBreak) {
    std::vector<Event> ev{{2, 3, 1, 10}, {2, 3, -1, 10}};
    canonical_sort(ev);
    EXPECT_EQ(ev[0].p, -1);
    EXPECT_EQ(ev[1].p, 1);
}

TEST(CanonicalOrder, PermutationInvariant) {
    std::mt19937_64 rng(11);
    std::vector<Event> ev;
    for (int i = 0; i < 500; ++i)
        ev.push_back({static_cast<int>(rng() % 7), static_cast<int>(rng() % 5), (rng() % 2) ? 1 : -1,
                      static_cast<std::int64_t>(rng() % 20)});
    auto a = ev;
    canonical_sort(a);
    std::shuffle(ev.begin(), ev.end(), rng);
    canonical_sort(ev);
    EXPECT_EQ(a, ev);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), canonical_less));
}

TEST(Dvs, StepOutputIsCanonical) {
    const auto c = small_sensor();
    const auto p = make_dual_split(c, 6.0, 0.08, 6);
    DvsSimulator s(c, latched(0.05));
    s.reset(p, 0.0, 0);
    double x = 0.0;
    for (int k = 1; k <= 50; ++k) {
        x += 0.002 * std::sin(0.3 * k);
        const auto ev = s.step(p, x, k * 1000);
        EXPECT_TRUE(std::is_sorted(ev.begin(), ev.end(), canonical_less));
    }
}

TEST(Dvs, MonotoneMotionGivesOnlyPositiveEvents) {
    const auto c = small_sensor();
    const auto p = make_uniform(c, LinearProfile{0.02});
    DvsSimulator s(c, latched());
    s.reset(p, 0.0, 0);
    std::size_t total = 0;
    for (int k = 1; k <= 200; ++k) {
        for (const auto& e : s.step(p, -0.0007 * k, k * 1000)) {
            EXPECT_EQ(e.p, 1);
            ++total;
        }
    }
    EXPECT_GT(total, 0u);
}

TEST(Dvs, LatchedTracksFractionalSinceReset) {
    const auto c = small_sensor();
    const auto p = make_dual_split(c, 8.0, 0.03, 6);
    DvsSimulator lat(c, latched());
    DvsSimulator frac(c, fractional());
    lat.reset(p, 0.0, 0);
    frac.reset(p, 0.0, 0);
    const PixelRegion top{0, 39, 0, 5};
    const PixelRegion bottom{0, 39, 6, 11};
    long net_top = 0;
    long net_bottom = 0;
    for (int k = 1; k <= 3000; ++k) {
        const double t = k * 1e-3;
        const double x = 0.01 * std::sin(3.0 * t) + 0.004 * std::sin(17.0 * t);
        for (const auto& e : lat.step(p, x, k * 1000)) (e.v <= 5 ? net_top : net_bottom) += e.p;
        frac.step(p, x, k * 1000);
        ASSERT_LT(std::abs(net_top - frac.fractional_count(top)), top.rows() * top.columns());
        ASSERT_LT(std::abs(net_bottom - frac.fractional_count(bottom)), bottom.rows() * bottom.columns());
    }
}

TEST(Dvs, ReversalClosure) {
    const auto c = small_sensor();
    const auto p = make_dual_split(c, 8.0, 0.03, 6);
    DvsSimulator s(c, latched());
    s.reset(p, 0.0, 0);
    long n = 0;
    int k = 0;
    for (int i = 1; i <= 100; ++i) n += net(s.step(p, 0.0005 * i, ++k * 1000));
    for (int i = 99; i >= 0; --i) n += net(s.step(p, 0.0005 * i, ++k * 1000));
    for (int v = 0; v < c.height; ++v)
        for (int u = 0; u < c.width; ++u) {
            EXPECT_LT(std::abs(s.fractional_count(u, v)), 1.0);
        }
    EXPECT_LE(std::abs(n), static_cast<long>(c.width) * c.height);
}

TEST(Dvs, ActiveRegionsConfineEvents) {
    const auto c = small_sensor();
    const auto p = make_dual_split(c, 8.0, 0.03, 6);
    const PixelRegion r1{5, 34, 1, 3};
    const PixelRegion r2{10, 29, 8, 10};
    DvsSimulator s(c, latched(), {r2, r1});
    s.reset(p, 0.0, 0);
    std::size_t total = 0;
    for (int k = 1; k <= 100; ++k)
        for (const auto& e : s.step(p, 0.001 * k, k * 1000)) {
            EXPECT_TRUE(r1.contains(e.u, e.v) || r2.contains(e.u, e.v));
            ++total;
        }
    EXPECT_GT(total, 0u);
}

TEST(Dvs, DeterministicWithJitter) {
    const auto c = small_sensor();
    const auto p = make_dual_split(c, 8.0, 0.03, 6);
    auto run = [&](std::uint64_t seed) {
        DvsSimulator s(c, DvsConfig{0.2, DvsMode::Latched, seed, 0.1});
        s.reset(p, 0.0, 0);
        std::vector<Event> all;
        for (int k = 1; k <= 500; ++k) {
            const auto ev = s.step(p, 0.01 * std::sin(0.02 * k), k * 1000);
            all.insert(all.end(), ev.begin(), ev.end());
        }
        return all;
    };
    const auto a = run(5);
    EXPECT_EQ(a, run(5));
    EXPECT_FALSE(a.empty());
    EXPECT_NE(a, run(6));
}

TEST(Dvs, KeyedNormalMoments) {
    double s = 0.0;
    double s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = detail::keyed_normal(9, static_cast<std::uint64_t>(i), 3);
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(EventCsv, HeaderAndRows) {
    std::ostringstream os;
    write_events_header(os);
    write_events_rows(os, {{3, 4, -1, 1000}});
    EXPECT_EQ(os.str(), "t_us,u,v,p\n1000,3,4,-1\n");
}
