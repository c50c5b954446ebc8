#include "epiforecast/nrm.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace epi;
using namespace epi::nrm;
using namespace testing_support;

namespace {

NrmParams plain(double C, double k, double m) {
    NrmParams p;
    p.capacity = C;
    p.growth_rate = k;
    p.offset = m;
    p.seasonal_order = 0;
    return p;
}

NrmParams with_breaks(double C, double k, double m, std::vector<double> s, std::vector<double> delta) {
    auto p = plain(C, k, m);
    p.changepoints = std::move(s);
    p.rate_adjustments = std::move(delta);
    p.offset_corrections = compute_gammas(k, m, p.changepoints, p.rate_adjustments);
    return p;
}

RegionSeries generate(const NrmParams& p, std::size_t n) {
    std::vector<std::int64_t> v;
    for (std::size_t t = 0; t < n; ++t) v.push_back(std::llround(nrm_predict(static_cast<double>(t), p)));
    return make_series("Synthetic", v);
}

double rmse(const NrmParams& fit, const RegionSeries& s) {
    double sse = 0.0;
    for (std::size_t t = 0; t < s.size(); ++t) {
        const double e = nrm_predict(static_cast<double>(t), fit) - static_cast<double>(s.confirmed[t]);
        sse += e * e;
    }
    return std::sqrt(sse / static_cast<double>(s.size()));
}

} // namespace

TEST_CASE("place_changepoints", "[nrm]") {
    NrmConfig cfg;
    cfg.n_changepoints = 4;
    CHECK(place_changepoints(101, cfg) == std::vector<double>{20, 40, 60, 80});
    cfg.n_changepoints = 0;
    CHECK(place_changepoints(101, cfg).empty());
    cfg.n_changepoints = 25;
    const auto tiny = place_changepoints(3, cfg);
    CHECK(tiny.size() <= 2);
    CHECK(place_changepoints(2, cfg).empty());
    const auto grid = place_changepoints(119, cfg);
    CHECK(grid.size() <= 25);
    for (std::size_t j = 1; j < grid.size(); ++j) CHECK(grid[j] > grid[j - 1]);
    CHECK(grid.back() <= 0.8 * 118);
}

TEST_CASE("indicator_a", "[nrm]") {
    const std::vector<double> s{10, 20};
    CHECK(indicator_a(3, s) == std::vector<int>{0, 0});
    CHECK(indicator_a(10, s) == std::vector<int>{1, 0});
    CHECK(indicator_a(15, s) == std::vector<int>{1, 0});
    CHECK(indicator_a(25, s) == std::vector<int>{1, 1});
}

TEST_CASE("compute_gammas hand values", "[nrm]") {
    const std::vector<double> s1{10}, d1{0.5};
    const auto g1 = compute_gammas(0.5, 0.0, s1, d1);
    REQUIRE(g1.size() == 1);
    CHECK(std::abs(g1[0] - 5.0) < 1e-12);

    const std::vector<double> s2{10, 20}, d2{0.5, -0.25};
    const auto g2 = compute_gammas(0.5, 0.0, s2, d2);
    CHECK(std::abs(g2[0] - 5.0) < 1e-12);
    CHECK(std::abs(g2[1] + 5.0) < 1e-12);

    const std::vector<double> s3{3, 8, 40}, zero(3, 0.0);
    CHECK(compute_gammas(0.7, 12.0, s3, zero) == std::vector<double>(3, 0.0));
}

TEST_CASE("compute_gammas rejects a zero rate", "[nrm]") {
    const std::vector<double> s{10, 20}, d{0.25, -0.75};
    CHECK_THROWS_MATCHES(compute_gammas(0.5, 0.0, s, d), NumericError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("changepoint 2")));
}

TEST_CASE("logistic_trend hand values", "[nrm]") {
    CHECK(logistic_trend(0, plain(1, 1, 0)) == 0.5);
    CHECK(std::abs(logistic_trend(20, plain(100, 0.3, 10)) - 95.25741268224334) < 1e-9);
    CHECK(std::abs(logistic_trend(1e4, plain(100, 0.3, 10)) - 100.0) < 1e-9);
    const auto p = with_breaks(500, 0.2, 30, {10, 40}, {0.1, -0.25});
    CHECK(std::abs(logistic_trend(1e5, p) - 500.0) < 1e-9);
}

TEST_CASE("seasonal_component", "[nrm]") {
    auto p = plain(1, 1, 0);
    CHECK(seasonal_component(3.3, p) == 0.0);
    p.seasonal_order = 1;
    p.seasonal_coeffs = {1.0, 0.0};
    CHECK(std::abs(seasonal_component(0, p) - 1.0) < 1e-15);
    p.seasonal_order = 3;
    p.seasonal_coeffs = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(seasonal_component(5.5, p) == 0.0);
}

TEST_CASE("seasonal_component is periodic", "[nrm][property]") {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        auto p = plain(1, 1, 0);
        p.seasonal_order = 1 + rng.next_u64() % 4;
        p.seasonal_period = rng.uniform(2, 30);
        p.seasonal_coeffs.resize(2 * p.seasonal_order);
        for (double& b : p.seasonal_coeffs) b = rng.uniform(-50, 50);
        const double t = rng.uniform(0, 200);
        REQUIRE(std::abs(seasonal_component(t + p.seasonal_period, p) - seasonal_component(t, p)) < 1e-9);
    }
}

TEST_CASE("nrm_predict adds trend and season", "[nrm]") {
    auto p = plain(100, 0.3, 10);
    CHECK(nrm_predict(20, p) == logistic_trend(20, p));
    p.seasonal_order = 1;
    p.seasonal_coeffs = {1.0, 0.0};
    const double want = 95.25741268224334 + std::cos(2.0 * std::numbers::pi * 20.0 / 7.0);
    CHECK(std::abs(nrm_predict(20, p) - want) < 1e-9);
    CHECK(std::abs(nrm_predict(20, p) - 95.8809) < 1e-4);

    auto flat = plain(80, 0.0, 0.0);
    flat.seasonal_order = 1;
    flat.seasonal_coeffs = {2.0, 1.0};
    CHECK(std::abs(nrm_predict(9, flat) - (40.0 + seasonal_component(9, flat))) < 1e-12);
}

TEST_CASE("trend is continuous at every changepoint", "[nrm][property]") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t S = 1 + rng.next_u64() % 8;
        std::vector<double> s, delta;
        double day = 0.0, rate = rng.uniform(0.02, 0.6);
        const double k = rate;
        for (std::size_t j = 0; j < S; ++j) {
            day += rng.uniform(1, 15);
            s.push_back(day);
            double d;
            do {
                d = rng.uniform(-0.3, 0.3);
            } while (std::abs(rate + d) < 0.01 || std::abs(rate + d) > 0.9);
            rate += d;
            delta.push_back(d);
        }
        const auto p = with_breaks(rng.uniform(10, 1e6), k, rng.uniform(-20, 80), s, delta);
        for (double sj : s) {
            REQUIRE(std::abs(logistic_trend(sj - 1e-6, p) - logistic_trend(sj + 1e-6, p)) < 1e-6 * p.capacity);
        }
    }
}

TEST_CASE("empty grid reduces to the plain logistic", "[nrm][property]") {
    Rng rng(78);
    const auto p = plain(12345.0, 0.17, 41.0);
    for (int i = 0; i < 1000; ++i) {
        const double t = rng.uniform(-100, 300);
        const double eq8 = p.capacity / (1.0 + std::exp(-p.growth_rate * (t - p.offset)));
        REQUIRE(std::abs(logistic_trend(t, p) - eq8) < 1e-12 * p.capacity);
    }
}

TEST_CASE("trend stays strictly inside (0, C)", "[nrm][property]") {
    Rng rng(79);
    const auto p = with_breaks(1000, 0.1, 50, {20, 60}, {0.05, -0.1});
    for (int i = 0; i < 1000; ++i) {
        const double g = logistic_trend(rng.uniform(-150, 250), p);
        REQUIRE(g > 0.0);
        REQUIRE(g < 1000.0);
    }
}

TEST_CASE("fit recovers a plain logistic", "[nrm]") {
    const auto truth = plain(1000, 0.2, 50);
    const auto s = generate(truth, 120);
    NrmConfig cfg;
    cfg.n_changepoints = 0;
    cfg.capacity_override = 1000.0;
    FitTrace trace;
    const auto fit = nrm_fit(s, cfg, &trace);
    CHECK(rmse(fit, s) < 0.01 * 1000);
    CHECK(fit.changepoints.empty());
    for (std::size_t i = 1; i < trace.objective.size(); ++i) REQUIRE(trace.objective[i] <= trace.objective[i - 1]);
}

TEST_CASE("fit recovers a logistic with a rate break", "[nrm]") {
    const auto truth = with_breaks(1000, 0.12, 60, {45}, {0.1});
    const auto full = generate(truth, 127);
    const auto [train, test] = train_test_split(full, 7);
    NrmConfig cfg;
    cfg.capacity_override = 1000.0;
    const auto t0 = std::chrono::steady_clock::now();
    const auto fit = nrm_fit(train, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 10.0);
    CHECK(rmse(fit, train) < 0.02 * 1000);
    double abs_delta = 0.0;
    for (double d : fit.rate_adjustments) abs_delta += std::abs(d);
    CHECK(abs_delta > 0.0);
    const auto fc = nrm_forecast(fit, train.size() - 1, 7);
    for (std::size_t h = 0; h < 7; ++h) CHECK(std::abs(fc[h] - static_cast<double>(test.confirmed[h])) < 0.02 * 1000);
}

TEST_CASE("fitted offsets satisfy the continuity recurrence", "[nrm][property]") {
    const auto s = generate(with_breaks(5000, 0.1, 70, {30, 50}, {0.05, -0.06}), 100);
    const auto fit = nrm_fit(s, NrmConfig{});
    const auto g = compute_gammas(fit.growth_rate, fit.offset, fit.changepoints, fit.rate_adjustments);
    REQUIRE(g.size() == fit.offset_corrections.size());
    for (std::size_t j = 0; j < g.size(); ++j) CHECK(std::abs(g[j] - fit.offset_corrections[j]) < 1e-9);
    const double observed_max = static_cast<double>(*std::max_element(s.confirmed.begin(), s.confirmed.end()));
    CHECK(fit.capacity == 3.0 * observed_max);
}

TEST_CASE("fit of a constant series is flat", "[nrm]") {
    const auto s = make_series("Flat", std::vector<std::int64_t>(40, 250));
    const auto fit = nrm_fit(s, NrmConfig{});
    for (std::size_t t = 0; t < s.size(); ++t) {
        REQUIRE(std::abs(nrm_predict(static_cast<double>(t), fit) - 250.0) < 0.01 * 250.0);
    }
}

TEST_CASE("fit is deterministic and validates inputs", "[nrm]") {
    const auto s = generate(plain(800, 0.15, 30), 60);
    CHECK(nrm_fit(s, NrmConfig{}) == nrm_fit(s, NrmConfig{}));
    CHECK_THROWS_AS(nrm_fit(make_series("S", {1, 2, 3, 4}), NrmConfig{}), DataError);
    NrmConfig low;
    low.capacity_override = 10.0;
    CHECK_THROWS_AS(nrm_fit(s, low), FitError);
    NrmConfig bad;
    bad.changepoint_range = 1.5;
    CHECK_THROWS_AS(nrm_fit(s, bad), FitError);
}

TEST_CASE("objective gradient matches finite differences", "[nrm]") {
    const auto s = generate(with_breaks(2000, 0.1, 50, {30}, {0.05}), 80);
    nrm::detail::Problem prob;
    prob.y = s.values();
    prob.capacity = 2500.0;
    NrmConfig cfg;
    cfg.n_changepoints = 5;
    prob.s = place_changepoints(s.size(), cfg);
    prob.span = static_cast<double>(s.size() - 1);
    prob.order = 3;
    prob.tau = 0.05;
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        auto x = prob.initial_point();
        for (double& v : x) v += rng.uniform(-0.1, 0.1);
        const auto g = prob.gradient(x);
        auto f = [&](std::span<const double> v) { return prob.objective(v); };
        REQUIRE(gradient_check(f, g, x, 1e-6) < 1e-5);
    }
}

TEST_CASE("forecast behaviour", "[nrm]") {
    auto p = with_breaks(1000, 0.1, 40, {20}, {0.05});
    p.seasonal_order = 1;
    p.seasonal_coeffs = {3.0, -4.0};
    CHECK(nrm_forecast(p, 50, 0).empty());
    const auto fc = nrm_forecast(p, 50, 30);
    REQUIRE(fc.size() == 30);
    CHECK(fc[0] == nrm_predict(51, p));
    for (double v : fc) CHECK(v <= 1000.0 + 5.0);
    const auto far = nrm_forecast(p, 5000, 1);
    CHECK(std::abs(far[0] - seasonal_component(5001, p) - 1000.0) < 1e-6);
}

TEST_CASE("parameter serialization round-trips exactly", "[nrm]") {
    const auto s = generate(with_breaks(3000, 0.09, 55, {25, 45}, {0.04, -0.05}), 90);
    const auto fit = nrm_fit(s, NrmConfig{});
    std::stringstream buf;
    write_params(buf, fit);
    CHECK(buf.str().rfind("NRM1\n", 0) == 0);
    const auto back = read_params(buf);
    CHECK(back == fit);
    CHECK(nrm_forecast(back, 89, 14) == nrm_forecast(fit, 89, 14));
    std::istringstream wrong("SVR1\n");
    CHECK_THROWS_AS(read_params(wrong), FormatError);
}
