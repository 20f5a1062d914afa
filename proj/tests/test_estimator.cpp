#include "ebvs/estimator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ebvs;

namespace {

CameraIntrinsics cam() { return {}; }

Kernel k_lin(int half_u = 50, int rows = 50) {
    return {{640 - half_u, 639 + half_u, 500, 499 + rows}, KernelRole::K2_linear};
}

Kernel k_quad() { return {{540, 739, 130, 229}, KernelRole::K1_quadratic}; }

// Brute force: sum over pixels of [f(end) - f(begin)] / C.
double oracle_fractional(const ScenePattern& p, const CameraIntrinsics& c, const Kernel& k, double C, double x0,
                         double x1) {
    double s = 0.0;
    for (int v = k.rect.v_min; v <= k.rect.v_max; ++v)
        for (int u = k.rect.u_min; u <= k.rect.u_max; ++u)
            s += intensity_at_time(p, c, u - c.o_x, v, x1, 0.0) - intensity_at_time(p, c, u - c.o_x, v, x0, 0.0);
    return s / C;
}

}  // namespace

TEST(NetCount, DirectCount) {
    const Kernel k{{10, 20, 10, 20}, KernelRole::K2_linear};
    std::vector<Event> ev{{15, 15, 1, 5}, {11, 12, 1, 6}, {20, 20, 1, 6}, {10, 10, -1, 7},
                          {9, 15, 1, 5},  {21, 15, 1, 5}, {15, 9, -1, 6}, {15, 21, 1, 7}, {0, 0, 1, 7}};
    canonical_sort(ev);
    const auto n = net_event_count(ev, k, Window{0, 100});
    EXPECT_EQ(n.n_pos, 3);
    EXPECT_EQ(n.n_neg, 1);
    EXPECT_EQ(n.n_net, 2.0);
    for (auto& e : ev) e.p = -e.p;
    EXPECT_EQ(net_event_count(ev, k, Window{0, 100}).n_net, -2.0);
    EXPECT_EQ(net_event_count(std::vector<Event>{}, k, Window{0, 100}).n_net, 0.0);
}

TEST(NetCount, WindowIsHalfOpen) {
    const Kernel k{{0, 5, 0, 5}, KernelRole::K2_linear};
    const std::vector<Event> ev{{1, 1, 1, 9}, {1, 1, 1, 10}, {1, 1, 1, 19}, {1, 1, 1, 20}};
    EXPECT_EQ(net_event_count(ev, k, Window{10, 20}).n_net, 2.0);
    const auto w = motion_window(0, 10000);
    EXPECT_FALSE(w.contains(0));
    EXPECT_TRUE(w.contains(1000));
    EXPECT_TRUE(w.contains(10000));
    EXPECT_NEAR(w.seconds(), 0.01, 1e-15);
}

TEST(Rate, ZeroAtRestAndAtQuadraticPeak) {
    const auto c = cam();
    const auto p = make_dual_split(c, 330.0, 1.299e-3, 360);
    EXPECT_EQ(event_rate_M(p, c, k_lin(), 0.2, 0.1, 0.0), 0.0);
    EXPECT_EQ(std::abs(event_rate_M(p, c, k_quad(), 0.2, 0.0, 0.4)), 0.0);
}

TEST(Rate, LinearClosedForm) {
    const auto c = cam();
    const auto p = make_dual_split(c, 330.0, 1.299e-3, 360);
    const double M = event_rate_M(p, c, k_lin(), 0.2, 0.03, 0.45);
    EXPECT_NEAR(M, -14613.75, 1e-8);
    EXPECT_NEAR(rate_constant_linear(100, 50, c, 0.2, 1.299e-3) * 0.45, -14613.75, 1e-8);
}

TEST(Rate, QuadraticLumpedForm) {
    const auto c = cam();
    const auto p = make_dual_split(c, 330.0, 1.299e-3, 360);
    const double Cq = rate_constant_quadratic(200, 100, c, 0.2, 330.0);
    for (double x : {-0.1, 0.05, 0.2})
        for (double xd : {-0.3, 0.6}) EXPECT_NEAR(event_rate_M(p, c, k_quad(), 0.2, x, xd), Cq * x * xd, 1e-9 * std::abs(Cq));
    EXPECT_EQ(analytic_rate_constant(k_quad(), p, c, 0.2), Cq);
    EXPECT_LT(Cq, 0.0);
    EXPECT_LT(analytic_rate_constant(k_lin(), p, c, 0.2), 0.0);
}

TEST(Bound, ExampleConstants) {
    const auto c = cam();
    const auto p = make_dual_split(c, 330.0, 1.299e-3, 360);
    const auto lin = bound_constants(make_bound_params(k_lin(), p, c, 0.2, 0.65, 3.0, -0.2, 0.2));
    EXPECT_EQ(lin.L_space, 0.0);
    const auto quad = bound_constants(make_bound_params(k_quad(), p, c, 0.2, 0.65, 3.0, -0.2, 0.2));
    EXPECT_EQ(quad.L_space, 0.0);
    EXPECT_GT(quad.L_time, 0.0);
    const auto still = bound_constants(make_bound_params(k_lin(), p, c, 0.2, 0.65, 0.0, -0.2, 0.2));
    EXPECT_EQ(still.L_time, 0.0);
}

TEST(Bound, ObservedSupremaCoverSweptInterval) {
    const auto c = cam();
    const auto p = make_dual_split(c, 330.0, 1.299e-3, 360);
    const auto s = observed_suprema(k_quad(), p, c, -0.1, 0.2);
    // widest coordinate: u_max - o_x + mu(x_hi) = 99.5 + 200
    EXPECT_DOUBLE_EQ(s.F1, 299.5 / (330.0 * 330.0));
}

TEST(Bound, ConstantVelocityLinearIsExact) {
    const auto c = cam();
    const auto p = make_dual_split(c, 330.0, 1.299e-3, 360);
    const auto k = k_lin();
    const double dt = 0.01;
    for (int i = 0; i < 100; ++i) {
        const double x0 = -0.1 + 0.002 * i;
        const double v = 0.45;
        const double n = oracle_fractional(p, c, k, 0.2, x0, x0 + v * dt);
        const double M = event_rate_M(p, c, k, 0.2, x0, v);
        EXPECT_NEAR(n, M * dt, 1e-9 * std::abs(M * dt));
    }
}

TEST(Bound, UniformAccelerationQuadraticHoldsWithoutSlack) {
    // exact count for x(t) = x0 + v t + a t^2 / 2 versus the temporal bound
    const auto c = cam();
    const auto p = make_dual_split(c, 330.0, 1.299e-3, 360);
    const auto k = k_quad();
    const double dt = 0.01;
    const auto bp = make_bound_params(k, p, c, 0.2, 0.65, 3.0, -0.25, 0.25);
    const auto bc = bound_constants(bp);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> X(-0.2, 0.2), V(-0.6, 0.6), A(-2.9, 2.9);
    for (int i = 0; i < 200; ++i) {
        const double x0 = X(rng), v = V(rng), a = A(rng);
        NetCount n;
        n.window = Window{0, 10000};
        n.n_net = oracle_fractional(p, c, k, 0.2, x0, x0 + v * dt + 0.5 * a * dt * dt);
        const auto chk = check_bound(n, event_rate_M(p, c, k, 0.2, x0, v), bc, dt, DvsMode::IdealFractional, bp);
        EXPECT_TRUE(chk.ok) << chk.error << " > " << chk.bound;
    }
}

TEST(Bound, AntisymmetricUnderReversal) {
    const auto c = cam();
    const auto p = make_dual_split(c, 330.0, 1.299e-3, 360);
    for (const auto& k : {k_quad(), k_lin()}) {
        const double fwd = oracle_fractional(p, c, k, 0.2, 0.05, 0.058);
        const double back = oracle_fractional(p, c, k, 0.2, 0.058, 0.05);
        EXPECT_EQ(fwd, -back);
    }
}

TEST(Bound, QuantizationSlackOnlyInLatchedMode) {
    BoundParams bp;
    bp.N_u = 10;
    bp.N_v = 4;
    const BoundConstants bc{0.0, 0.0};
    NetCount n;
    n.n_net = 30.0;
    EXPECT_FALSE(check_bound(n, 0.0, bc, 0.01, DvsMode::IdealFractional, bp).ok);
    const auto chk = check_bound(n, 0.0, bc, 0.01, DvsMode::Latched, bp);
    EXPECT_TRUE(chk.ok);
    EXPECT_DOUBLE_EQ(chk.margin, 10.0);
}

TEST(Kernel, SymmetryAndRoleValidation) {
    const auto c = cam();
    const auto p = make_dual_split(c, 330.0, 1.299e-3, 360);
    EXPECT_NO_THROW(validate_kernel(k_quad(), c, p));
    EXPECT_NO_THROW(validate_kernel(k_lin(), c, p));
    EXPECT_THROW(validate_kernel({{541, 739, 130, 229}, KernelRole::K1_quadratic}, c, p), std::invalid_argument);
    EXPECT_THROW(validate_kernel({{540, 739, 300, 400}, KernelRole::K1_quadratic}, c, p), std::invalid_argument);
    EXPECT_THROW(validate_kernel({{540, 739, 130, 229}, KernelRole::K2_linear}, c, p), std::invalid_argument);
    EXPECT_THROW(validate_kernel({{-1, 1280, 130, 229}, KernelRole::K1_quadratic}, c, p), std::invalid_argument);
}

TEST(Kernel, AsymmetryLeaksFirstOrderTerm) {
    // one extra column on a quadratic profile: error grows with |f''| |sum u| |xdot| dt / C
    const auto c = cam();
    const auto p = make_dual_split(c, 330.0, 1.299e-3, 360);
    const Kernel sym = k_quad();
    const Kernel asym{{540, 740, 130, 229}, KernelRole::K1_quadratic};
    const double dt = 0.01;
    double prev = 0.0;
    for (double v : {0.1, 0.2, 0.4}) {
        const double x0 = 0.05;
        const double x1 = x0 + v * dt;
        auto err = [&](const Kernel& k) {
            return std::abs(oracle_fractional(p, c, k, 0.2, x0, x1) -
                            rate_constant_quadratic(k.N_u(), k.N_v(), c, 0.2, 330.0) * 0.5 * (x1 * x1 - x0 * x0));
        };
        EXPECT_LT(err(sym), 1e-6);
        double sum_u = 0.0;
        for (int u = asym.rect.u_min; u <= asym.rect.u_max; ++u) sum_u += u - c.o_x;
        const double predicted = (1.0 / (330.0 * 330.0)) * std::abs(sum_u) * asym.N_v() * 1000.0 * v * dt / 0.2;
        EXPECT_NEAR(err(asym), predicted, 1e-6 * predicted);
        EXPECT_GT(err(asym), prev);
        prev = err(asym);
    }
}

TEST(Calibration, ExactData) {
    std::vector<CalibrationSample> s;
    for (int i = 0; i < 50; ++i) {
        const double st = std::sin(0.37 * i) + 0.1 * i;
        s.push_back({-7.5 * st, st});
    }
    const auto lc = calibrate(s);
    EXPECT_NEAR(lc.value, -7.5, 1e-14);
    EXPECT_LT(lc.fit_residual, 1e-15);
    EXPECT_EQ(lc.n_samples, 50u);
}

TEST(Calibration, ResidualInStateUnits) {
    // n = 2 s + noise e -> residual = ||e / c_hat|| / N
    std::vector<CalibrationSample> s{{2.0 * 1.0 + 0.1, 1.0}, {2.0 * -1.0 + 0.1, -1.0}};
    const auto lc = calibrate(s);
    EXPECT_DOUBLE_EQ(lc.value, 2.0);
    EXPECT_NEAR(lc.fit_residual, std::sqrt(2.0 * 0.05 * 0.05) / 2.0, 1e-15);
}

TEST(Calibration, Errors) {
    EXPECT_THROW(calibrate(std::vector<CalibrationSample>{{1.0, 1.0}}), CalibrationError);
    EXPECT_THROW(calibrate(std::vector<CalibrationSample>{{1.0, 0.0}, {2.0, 0.0}}), CalibrationError);
    EXPECT_THROW(calibrate(std::vector<CalibrationSample>{{0.0, 1.0}, {0.0, 2.0}}), CalibrationError);
}

TEST(Feedback, ProductOfEstimates) {
    const LumpedConstant q{-10.0, 0.0, 2};
    const LumpedConstant l{-5.0, 0.0, 2};
    EXPECT_NEAR(synthesize_feedback(-10.0 * 0.02, -5.0 * 0.4, q, l), 0.008, 1e-15);
    EXPECT_EQ(synthesize_feedback(0.0, 3.0, q, l), 0.0);
    EXPECT_EQ(synthesize_feedback(3.0, 0.0, q, l), 0.0);
}

TEST(CalibrationCsv, Header) {
    std::ostringstream os;
    const std::vector<CalibrationRow> rows{{"K1", {-2.5, 0.125, 10}}};
    write_calibration_csv(os, rows);
    EXPECT_EQ(os.str(), "kernel,lumped_value,fit_residual,n_samples\nK1,-2.5,0.125,10\n");
}
