#include "epiforecast/pipeline.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace epi;
using namespace epi::pipeline;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("epiforecast_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

RunConfig fast_config(const fs::path& out) {
    RunConfig c;
    load_config_file(c, data_path("fast.conf"));
    c.input_path = data_path("cli_regions.csv");
    c.output_dir = out.string();
    return c;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(EPI_CLI_BINARY) + " " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> output_files(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return files;
}

} // namespace

TEST_CASE("config file parsing and overrides", "[cli]") {
    RunConfig c;
    std::istringstream text("# comment\nhorizon = 9\nmodels = nrm, svr\nregions = Northland;Southland/East\n"
                            "nrm.capacity.Northland = 12000\nsvr.kernel = linear\n");
    load_config(c, text);
    CHECK(c.horizon == 9);
    CHECK(c.models == std::vector<ModelKind>{ModelKind::svr, ModelKind::nrm});
    CHECK(c.region_filter == std::vector<std::string>{"Northland", "Southland/East"});
    CHECK(c.nrm_capacity.at("Northland") == 12000.0);
    CHECK(c.svr.kernel.kind == svr::KernelKind::linear);
    apply_setting(c, "horizon", "3");
    CHECK(c.horizon == 3);

    std::istringstream bad("horizon = many\n");
    CHECK_THROWS_AS(load_config(c, bad), UsageError);
    std::istringstream unknown("colour = blue\n");
    CHECK_THROWS_AS(load_config(c, unknown), UsageError);
    CHECK_THROWS_AS(apply_setting(c, "models", "arima"), UsageError);
    c.horizon = 0;
    CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("manifest reads back to the same configuration", "[cli][property]") {
    auto c = fast_config("out_dir");
    c.region_filter = {"Northland"};
    c.nrm_capacity["Northland"] = 9000.5;
    c.svr.kernel.gamma = 0.37;
    c.propagate();
    std::ostringstream first;
    write_manifest(first, c);
    RunConfig back;
    std::istringstream in(first.str());
    load_config(back, in);
    back.propagate();
    std::ostringstream second;
    write_manifest(second, back);
    CHECK(first.str() == second.str());
}

TEST_CASE("ingest summarizes both layouts identically", "[cli]") {
    const auto out = scratch("ingest");
    RunConfig c;
    c.input_path = data_path("cli_regions.csv");
    c.output_dir = (out / "long").string();
    std::ostringstream log_long, log_wide;
    const auto a = cmd_ingest(c, log_long);
    c.layout = Layout::wide_format;
    c.input_path = data_path("cli_regions_wide.csv");
    c.output_dir = (out / "wide").string();
    const auto b = cmd_ingest(c, log_wide);
    CHECK(a.regions == 3);
    CHECK(a.dates == 40);
    CHECK(log_long.str() == log_wide.str());
    CHECK(b.total_cases == a.total_cases);
    CHECK(slurp(out / "long" / "dataset.csv") == slurp(out / "wide" / "dataset.csv"));
}

TEST_CASE("ingest of a missing file fails", "[cli]") {
    RunConfig c;
    c.input_path = data_path("does_not_exist.csv");
    std::ostringstream log;
    CHECK_THROWS_MATCHES(cmd_ingest(c, log), DataError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("input not found")));
    const auto dir = scratch("missing");
    CHECK(run_cli("ingest --input " + c.input_path, dir / "log.txt") == 2);
    CHECK_THAT(slurp(dir / "log.txt"), Catch::Matchers::ContainsSubstring("input not found"));
}

TEST_CASE("run writes reports, plot data and models", "[cli]") {
    const auto out = scratch("run");
    std::ostringstream log;
    const auto result = cmd_run(fast_config(out), log);
    CHECK_FALSE(result.all_failed);
    for (const char* f : {"report.csv", "summary.csv", "forecasts.csv", "manifest.txt"}) CHECK(fs::exists(out / f));

    const auto report = lines_of(slurp(out / "report.csv"));
    REQUIRE(report.size() == 4);
    CHECK(report[0] == "Province/State,Country/Region,GroundTruth,Baseline,DSPM,NRM,MAE_Baseline,MAE_DSPM,MAE_NRM,Status");
    CHECK(lines_of(slurp(out / "summary.csv")).size() == 4);

    // One row per date; DSPM has no in-sample values.
    const auto plot = lines_of(slurp(out / "plots" / "0_Northland.csv"));
    REQUIRE(plot.size() == 1 + 40);
    CHECK(plot[0] == "Date,Actual,Baseline,DSPM,NRM");
    for (std::size_t i = 1; i <= 40; ++i) {
        std::istringstream row(plot[i]);
        csv::Reader reader(row);
        const auto rec = reader.next();
        REQUIRE(rec);
        REQUIRE(rec->fields.size() == 5);
        if (i <= 33) {
            CHECK(rec->fields[3].empty());
            CHECK_FALSE(rec->fields[2].empty());
        } else {
            CHECK_FALSE(rec->fields[3].empty());
        }
    }
    for (const char* m : {"svr", "dspm", "nrm"}) CHECK(fs::exists(out / "models" / ("1_Southland_East." + std::string(m) + ".txt")));
}

TEST_CASE("run is deterministic across repeats and worker counts", "[cli]") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    std::ostringstream log;
    auto ca = fast_config(a);
    (void)cmd_run(ca, log);
    auto cb = fast_config(b);
    cb.workers = 3;
    (void)cmd_run(cb, log);
    auto fa = output_files(a), fb = output_files(b);
    fa.erase("manifest.txt");
    fb.erase("manifest.txt");
    CHECK(fa == fb);
}

TEST_CASE("rerunning from the manifest reproduces every output", "[cli]") {
    const auto out = scratch("manifest");
    std::ostringstream log;
    (void)cmd_run(fast_config(out), log);
    const auto before = output_files(out);
    RunConfig again;
    load_config_file(again, (out / "manifest.txt").string());
    (void)cmd_run(again, log);
    CHECK(output_files(out) == before);
}

TEST_CASE("model filter limits report columns", "[cli]") {
    const auto out = scratch("filter");
    auto c = fast_config(out);
    apply_setting(c, "models", "nrm");
    std::ostringstream log;
    (void)cmd_run(c, log);
    const auto report = lines_of(slurp(out / "report.csv"));
    CHECK(report[0] == "Province/State,Country/Region,GroundTruth,NRM,MAE_NRM,Status");
    CHECK(lines_of(slurp(out / "plots" / "2_Westland.csv"))[0] == "Date,Actual,NRM");
}

TEST_CASE("region filter selects by display name", "[cli]") {
    const auto out = scratch("regions");
    auto c = fast_config(out);
    apply_setting(c, "regions", "Southland/East");
    apply_setting(c, "models", "svr");
    std::ostringstream log;
    const auto r = cmd_run(c, log);
    REQUIRE(r.report.rows.size() == 1);
    CHECK(r.report.rows[0].key.display() == "Southland/East");
    apply_setting(c, "regions", "Atlantis");
    CHECK_THROWS_AS(cmd_run(c, log), DataError);
}

TEST_CASE("failing regions are flagged and the run continues", "[cli]") {
    const auto dir = scratch("failing");
    {
        std::ofstream mixed(dir / "mixed.csv", std::ios::binary);
        mixed << slurp(data_path("cli_regions.csv"));
        mixed << "999,01/22/2020,,Tiny,,1,0,0\n";
    }
    auto c = fast_config(dir / "out");
    c.input_path = (dir / "mixed.csv").string();
    apply_setting(c, "models", "svr,nrm");
    std::ostringstream log;
    const auto r = cmd_run(c, log);
    CHECK_FALSE(r.all_failed);
    const auto report = slurp(dir / "out" / "report.csv");
    CHECK_THAT(report, Catch::Matchers::ContainsSubstring(",Tiny,1,,,,,failed:"));

    c.input_path = data_path("short_region.csv");
    c.output_dir = (dir / "out2").string();
    CHECK(cmd_run(c, log).all_failed);
    CHECK(run_cli("run --config " + data_path("fast.conf") + " --input " + c.input_path + " --out " +
                      (dir / "out3").string(),
                  dir / "log.txt") == 3);
}

TEST_CASE("report rebuilds the summary from saved forecasts", "[cli]") {
    const auto out = scratch("report");
    auto c = fast_config(out);
    apply_setting(c, "models", "svr,nrm");
    std::ostringstream log;
    (void)cmd_run(c, log);
    const auto summary = slurp(out / "summary.csv");
    const auto report = slurp(out / "report.csv");
    fs::remove(out / "summary.csv");
    fs::remove(out / "report.csv");
    (void)cmd_report(c, log);
    CHECK(slurp(out / "summary.csv") == summary);
    const auto rebuilt = lines_of(slurp(out / "report.csv"));
    const auto original = lines_of(report);
    REQUIRE(rebuilt.size() == original.size());
    CHECK(rebuilt[0] == original[0]);
}

TEST_CASE("report of perfect forecasts has zero error", "[cli]") {
    const auto out = scratch("perfect");
    RunConfig c;
    c.input_path = data_path("cli_regions.csv");
    c.output_dir = out.string();
    const Dataset ds = load_dataset(c);
    {
        std::ofstream f(out / "forecasts.csv", std::ios::binary);
        csv::write_row(f, {"Province/State", "Country/Region", "Model", "Step", "Date", "Forecast"});
        for (const auto& r : ds.regions) {
            for (std::size_t h = 0; h < 5; ++h) {
                const std::size_t i = r.size() - 5 + h;
                csv::write_row(f, {r.key.province_state.value_or(""), r.key.country_region, "NRM",
                                   std::to_string(h + 1), r.dates[i].iso(), std::to_string(r.confirmed[i])});
            }
        }
    }
    std::ostringstream log;
    const auto report = cmd_report(c, log);
    CHECK(report.avg_mae_per_model.at("NRM") == 0.0);
    CHECK(report.error_rate_per_model.at("NRM") == 0.0);
    CHECK(lines_of(slurp(out / "summary.csv"))[1] == "NRM,0.0000,0.000000");
}

TEST_CASE("report fails without forecasts or regions", "[cli]") {
    const auto out = scratch("report_missing");
    RunConfig c;
    c.input_path = data_path("cli_regions.csv");
    c.output_dir = out.string();
    std::ostringstream log;
    CHECK_THROWS_AS(cmd_report(c, log), DataError);
    {
        std::ofstream f(out / "forecasts.csv", std::ios::binary);
        f << "Province/State,Country/Region,Model,Step,Date,Forecast\n";
    }
    CHECK_THROWS_AS(cmd_report(c, log), DataError);
    CHECK(run_cli("report --input " + c.input_path + " --out " + out.string(), out / "log.txt") == 2);
}

TEST_CASE("command-line exit codes", "[cli]") {
    const auto dir = scratch("exit");
    CHECK(run_cli("", dir / "log.txt") == 1);
    CHECK(run_cli("run --models arima --input " + data_path("cli_regions.csv"), dir / "log.txt") == 1);
    CHECK(run_cli("run --horizon 0 --input " + data_path("cli_regions.csv"), dir / "log.txt") == 1);
    CHECK(run_cli("ingest --input " + data_path("long_bad_count.csv"), dir / "log.txt") == 2);
    CHECK_THAT(slurp(dir / "log.txt"), Catch::Matchers::ContainsSubstring("line 3"));
    CHECK(run_cli("ingest --layout wide --input " + data_path("cli_regions_wide.csv") + " --out " + (dir / "o").string(),
                  dir / "log.txt") == 0);
    CHECK_THAT(slurp(dir / "log.txt"), Catch::Matchers::ContainsSubstring("regions: 3"));
    CHECK(run_cli("run --config " + data_path("fast.conf") + " --models svr --input " + data_path("cli_regions.csv") +
                      " --out " + (dir / "run").string() + " --workers 2 --seed 7",
                  dir / "log.txt") == 0);
    CHECK(fs::exists(dir / "run" / "summary.csv"));
}
