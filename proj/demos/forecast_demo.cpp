// Fit all three models to one synthetic logistic outbreak and print the
// 14-day forecasts next to the held-out truth.

#include "epiforecast/epiforecast.hpp"

#include <cmath>
#include <cstdio>

int main() {
    epi::RegionSeries series;
    series.key = epi::RegionKey("Demoland");
    const epi::Date start(2020, 1, 22);
    for (int t = 0; t < 90; ++t) {
        series.dates.push_back(start + t);
        series.confirmed.push_back(std::llround(20000.0 / (1.0 + std::exp(-0.09 * (t - 55.0)))));
    }
    const std::size_t horizon = 14;
    const auto [train, test] = epi::train_test_split(series, horizon);
    const std::size_t last = train.size() - 1;

    const auto nrm_params = epi::nrm::nrm_fit(train, epi::nrm::NrmConfig{});
    const auto nrm_fc = epi::nrm::nrm_forecast(nrm_params, last, horizon);

    const auto svr_model = epi::svr::svr_fit(train, epi::svr::SvrHyper{});
    const auto svr_fc = epi::svr::svr_forecast(svr_model, last, horizon);

    epi::dspm::DspmHyper hyper;
    hyper.stack_depth = 2;
    hyper.hidden_size = 8;
    hyper.epochs = 100;
    const auto dspm_model = epi::dspm::dspm_train(train, hyper);
    const auto dspm_fc = epi::dspm::dspm_forecast(dspm_model, train, horizon);

    std::printf("%-10s %10s %10s %10s %10s\n", "date", "actual", "Baseline", "DSPM", "NRM");
    for (std::size_t h = 0; h < horizon; ++h) {
        std::printf("%-10s %10lld %10.0f %10.0f %10.0f\n", test.dates[h].iso().c_str(),
                    static_cast<long long>(test.confirmed[h]), svr_fc[h], dspm_fc[h], nrm_fc[h]);
    }
    const auto actual = test.values();
    std::printf("MAE  Baseline %.2f  DSPM %.2f  NRM %.2f\n", epi::eval::mae(svr_fc, actual),
                epi::eval::mae(dspm_fc, actual), epi::eval::mae(nrm_fc, actual));
    return 0;
}
