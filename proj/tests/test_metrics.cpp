#include "doctest.h"

#include <cmath>
#include <random>

#include "evsr/metrics.h"
#include "oracles.h"

using namespace evsr;

namespace {

EventStream stream(int w, int h, std::vector<Event> ev) {
    EventStream s;
    s.width = w;
    s.height = h;
    s.events = std::move(ev);
    fit_time_span(s);
    return s;
}

}  // namespace

TEST_CASE("identical streams score zero error and full polarity accuracy") {
    std::mt19937_64 rng(1);
    const EventStream s = oracle::random_stream(rng, 8, 8, 40000, 300);
    const MetricsReport r = rmse_st(s, s, 41);
    CHECK(r.rmse_st == 0.0);
    CHECK(r.mse_t_raw == 0.0);
    CHECK(r.mse_s_raw == 0.0);
    CHECK(r.pa_percent == 100.0);
    CHECK_FALSE(r.pa_vacuous);
}

TEST_CASE("hand-computed rmse") {
    // gt: two ON events at (0,0) in bins 0 and 1; out: one ON event at (0,0) bin 0, one OFF at (1,0) bin 2.
    const EventStream gt = stream(2, 1, {{0, 0, 0, 1}, {1500, 0, 0, 1}});
    EventStream out = stream(2, 1, {{200, 0, 0, 1}, {2100, 1, 0, -1}});
    out.t0 = 999;  // only gt.t0 defines the origin
    const MetricsReport r = rmse_st(out, gt, 4);
    CHECK(r.n_p == 1);
    CHECK(r.span_ms == 4.0);
    CHECK(r.mse_t_raw == 2.0);
    // one 50 ms block: ON (0,0): 1 - 2, OFF (1,0): 1 - 0
    CHECK(r.mse_s_raw == 2.0);
    CHECK(r.rmse_st == doctest::Approx(std::sqrt(4.0 / 4.0)));
    CHECK(r.mse_t_norm == 2.0);
    CHECK(r.pa_percent == 100.0);
}

TEST_CASE("rmse matches the event-loop oracle on random streams") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const EventStream gt = oracle::random_stream(rng, 6, 5, 120000, 200);
        EventStream out = oracle::random_stream(rng, 6, 5, 130000, 250);
        const int T = bins_for_span(gt);
        const MetricsReport r = rmse_st(out, gt, T);
        CHECK(r.mse_t_raw == doctest::Approx(oracle::mse_t(out, gt, T)).epsilon(1e-12));
        CHECK(r.mse_s_raw == doctest::Approx(oracle::mse_s(out, gt, T)).epsilon(1e-12));
        CHECK(r.rmse_st == doctest::Approx(oracle::rmse(out, gt, T)).epsilon(1e-12));
        CHECK(r.pa_percent == doctest::Approx(oracle::pa(out, gt)).epsilon(1e-12));
    }
}

TEST_CASE("polarity accuracy decides cells by net polarity") {
    const EventStream gt = stream(4, 1, {{0, 0, 0, 1}, {100, 1, 0, -1}, {200, 2, 0, 1}, {300, 2, 0, -1},
                                         {400, 3, 0, 1}});
    // (0,0): match; (1,0): mismatch; (2,0): gt tie -> excluded; (3,0): out tie -> excluded.
    const EventStream out = stream(4, 1, {{10, 0, 0, 1}, {20, 1, 0, 1}, {30, 2, 0, 1}, {40, 3, 0, 1},
                                          {50, 3, 0, -1}});
    const PolarityAccuracy pa = polarity_accuracy(out, gt);
    CHECK(pa.shared == 2);
    CHECK(pa.matches == 1);
    CHECK(pa.percent == 50.0);
    CHECK_FALSE(pa.vacuous);
}

TEST_CASE("polarity accuracy with no shared cells is vacuous") {
    const EventStream gt = stream(2, 2, {{0, 0, 0, 1}});
    const EventStream out = stream(2, 2, {{5000, 1, 1, -1}});
    const PolarityAccuracy pa = polarity_accuracy(out, gt);
    CHECK(pa.vacuous);
    CHECK(pa.percent == 100.0);
    CHECK(pa.shared == 0);
    const EventStream empty = stream(2, 2, {});
    CHECK(polarity_accuracy(empty, gt).vacuous);
}

TEST_CASE("polarity accuracy bins from the ground-truth origin") {
    EventStream gt = stream(1, 1, {{10500, 0, 0, 1}});
    // Same 1 ms cell as gt when measured from gt.t0 = 10500.
    EventStream out = stream(1, 1, {{11200, 0, 0, 1}});
    CHECK(polarity_accuracy(out, gt).shared == 1);
    out.events[0].t = 11600;
    CHECK(polarity_accuracy(out, gt).shared == 0);
}

TEST_CASE("degenerate inputs") {
    const EventStream empty = stream(3, 3, {});
    CHECK_THROWS_AS(rmse_st(empty, empty, 10), DegenerateInput);
    const EventStream a = stream(3, 3, {{0, 0, 0, 1}});
    const EventStream b = stream(4, 3, {{0, 0, 0, 1}});
    CHECK_THROWS_AS(rmse_st(a, b, 10), ShapeError);
    CHECK_THROWS_AS(rmse_st(a, a, 0), std::exception);
}

TEST_CASE("an empty prediction scores the ground-truth energy") {
    std::mt19937_64 rng(3);
    const EventStream gt = oracle::random_stream(rng, 5, 5, 30000, 120);
    const EventStream empty = stream(5, 5, {});
    const int T = bins_for_span(gt);
    const MetricsReport r = rmse_st(empty, gt, T);
    CHECK(r.rmse_st == doctest::Approx(oracle::rmse(empty, gt, T)).epsilon(1e-12));
    CHECK(r.pa_vacuous);
}

TEST_CASE("report serialization") {
    MetricsReport r;
    r.rmse_st = 0.5;
    r.n_p = 3;
    r.span_ms = 64;
    const std::string kv = to_key_value(r);
    CHECK(kv.find("rmse_st=0.5\n") != std::string::npos);
    CHECK(kv.find("n_p=3\n") != std::string::npos);
    CHECK(csv_header().starts_with("pair,rmse_st,"));
    const std::string row = to_csv_row("a", r);
    CHECK(row.starts_with("a,0.5,"));
    CHECK(row.ends_with(",3,64"));
}
