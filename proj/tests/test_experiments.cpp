#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "mfnet/errors.hpp"
#include "mfnet/experiments.hpp"
#include "mfnet/meanfield.hpp"
#include "mfnet/resnet.hpp"
#include "oracles.hpp"

using namespace mfnet;

namespace {

ExperimentConfig small_gram() {
    ExperimentConfig c = default_config("gram");
    c.m_grid = {2};
    c.tolerances["replicates"] = 1;
    return c;
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("mfnet_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("verdicts include their bounds and never pass NaN") {
    CHECK(make_verdict("a", 1.0, 1.0, 2.0).pass);
    CHECK(make_verdict("a", 2.0, 1.0, 2.0).pass);
    CHECK_FALSE(make_verdict("a", 2.5, 1.0, 2.0).pass);
    CHECK_FALSE(make_verdict("a", std::nan(""), -1.0, 1.0).pass);
}

TEST_CASE("a single-point grid reports no slope and fails the slope verdict") {
    const StudyReport r = run_gram(small_gram());
    CHECK_FALSE(r.fit.has_value());
    REQUIRE(r.rows.size() == 1);
    bool noted = false;
    for (const auto& n : r.notes) noted = noted || n.starts_with("no slope fitted");
    CHECK(noted);
    CHECK_FALSE(r.passed());
}

TEST_CASE("the regularity audit passes on the default catalog") {
    const StudyReport r = run_audit(default_config("audit"));
    CHECK(r.passed());
    CHECK(r.rows.size() >= 6);
}

TEST_CASE("residual training started at the labels stays at zero loss") {
    Dataset data = make_synthetic_dataset(8, 4, 0, DatasetKind::gaussian_regression);
    const Activation act = Activation::tanh();
    const ResInit init = init_resnet_regression(data, 64, 4, 1.0, 1.0, 3, act, act);
    data.y = resnet_forward(init.net, data).output;
    const ResTrainResult r = train_resnet(init.net, data, Loss::squared(), 0.01, 50);
    for (const auto& rec : r.records) CHECK(rec.loss == 0.0);
    CHECK(r.net.V == init.net.V);
}

TEST_CASE("reports are written as CSV and JSON") {
    StudyReport r;
    r.study = "demo";
    r.columns = {"m", "value"};
    r.rows = {{1, 0.5}, {2, std::nan("")}};
    r.verdicts.push_back(make_verdict("value", 0.5, 0.0, 1.0));
    r.notes.push_back("hello");
    const auto dir = scratch("report");
    write_report(r, dir);
    std::ifstream csv(dir / "demo.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "m,value");
    std::ifstream js(dir / "demo.json");
    const auto j = nlohmann::json::parse(js);
    CHECK(j["study"] == "demo");
    CHECK(j["verdicts"][0]["pass"] == true);
    CHECK(j["notes"][0] == "hello");
    std::filesystem::remove_all(dir);
}

TEST_CASE("studies are deterministic for a fixed seed") {
    ExperimentConfig c = default_config("gram");
    c.m_grid = {16, 32, 64};
    c.tolerances["replicates"] = 2;
    CHECK(run_gram(c).rows == run_gram(c).rows);

    ExperimentConfig e = default_config("eps1_dnn");
    e.m_grid = {16, 32, 64};
    e.tolerances["replicates"] = 1;
    const auto a = run_eps1(e, Family::dnn).rows;
    CHECK(a == run_eps1(e, Family::dnn).rows);
    e.seed = 1;
    CHECK(a != run_eps1(e, Family::dnn).rows);
}

TEST_CASE("default configs validate and unknown ids are rejected") {
    for (const char* id : {"degeneracy", "gram", "eps1_dnn", "eps1_resnet", "refine", "converge", "audit"})
        CHECK_NOTHROW(default_config(id).validate());
    CHECK_THROWS_AS(default_config("bogus"), InvalidArgument);
    CHECK(parse_family("resnet") == Family::resnet);
    CHECK_THROWS_AS(parse_family("cnn"), InvalidArgument);
}
