#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <unistd.h>

#include "fcm/service.hpp"
#include "oracles.hpp"

using namespace fcm;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  std::filesystem::path root;

  void SetUp() override {
    root = std::filesystem::temp_directory_path() /
           ("fcm_service_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(root);
  }
  void TearDown() override { std::filesystem::remove_all(root); }

  ScenarioService make() { return ScenarioService(root, builtin_library(builtin_sed_template())); }
};

Json body(const Reply& r) { return Json::parse(r.body); }

std::string create(ScenarioService& s, const FcmModel& m) {
  const auto r = s.create_model(save_model(m));
  EXPECT_EQ(r.status, 201) << r.body;
  return body(r)["model_id"].get<std::string>();
}

FcmModel edgeless() {
  FcmModel m;
  m.name = "edgeless";
  m.concepts = {{ConceptId("a"), "a", ConceptKind::target, 0.3, std::nullopt},
                {ConceptId("b"), "b", ConceptKind::ordinary, -0.2, std::nullopt}};
  return m;
}

const char* kSignMapRun = R"({"config": {"k2": 0, "threshold": {"kind": "bivalent"}}})";

}  // namespace

// ---- models ----------------------------------------------------------------

TEST_F(ServiceTest, CreateTemplateGivesVersionOne) {
  auto s = make();
  const auto r = s.create_model(save_model(builtin_sed_template()));
  EXPECT_EQ(r.status, 201);
  EXPECT_EQ(body(r)["version"], 1);
  const auto id = body(r)["model_id"].get<std::string>();
  const auto g = s.get_model(id, std::nullopt);
  EXPECT_EQ(g.status, 200);
  EXPECT_EQ(g.body, save_model(builtin_sed_template()));
}

TEST_F(ServiceTest, InvalidModelIs422WithRules) {
  auto s = make();
  const auto r = s.create_model(R"({"format_version": 1, "concepts": [{"id": "a"}, {"id": "b"}],
    "edges": [{"source": "a", "target": "b", "weight": 1.5}]})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(body(r)["rules"], Json::array({"weight_out_of_range"}));
  EXPECT_EQ(body(r)["message"], "weight out of range");
}

TEST_F(ServiceTest, MalformedBodyIs400) {
  auto s = make();
  EXPECT_EQ(s.create_model("{nope").status, 400);
}

TEST_F(ServiceTest, UpdateVersioning) {
  auto s = make();
  const auto id = create(s, edgeless());
  auto m = edgeless();
  m.name = "v2";
  auto r = s.update_model(id, "1", save_model(m));
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(body(r)["version"], 2);
  r = s.update_model(id, "1", save_model(m));
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(body(r)["error"], "version_conflict");
  EXPECT_EQ(s.update_model(id, std::nullopt, save_model(m)).status, 400);
  EXPECT_EQ(s.update_model(id, "x", save_model(m)).status, 400);
  EXPECT_EQ(s.update_model("m999999", "1", save_model(m)).status, 404);

  EXPECT_EQ(load_model(s.get_model(id, 1).body).name, "edgeless");
  EXPECT_EQ(load_model(s.get_model(id, 2).body).name, "v2");
  EXPECT_EQ(load_model(s.get_model(id, std::nullopt).body).name, "v2");
  EXPECT_EQ(s.get_model(id, 3).status, 404);
}

TEST_F(ServiceTest, ConcurrentUpdatesAtSameVersion) {
  auto s = make();
  for (int round = 0; round < 10; ++round) {
    const auto id = create(s, edgeless());
    std::atomic<int> ok = 0, conflict = 0;
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
      threads.emplace_back([&, t] {
        auto m = edgeless();
        m.name = "writer " + std::to_string(t);
        const auto r = s.update_model(id, "1", save_model(m));
        if (r.status == 200) ++ok;
        if (r.status == 409) ++conflict;
      });
    for (auto& t : threads) t.join();
    EXPECT_EQ(ok, 1);
    EXPECT_EQ(conflict, 3);
    EXPECT_EQ(s.get_model(id, 3).status, 404);
  }
}

// ---- runs ------------------------------------------------------------------

TEST_F(ServiceTest, ZeroEdgeRunIsFixedPointAfterOneIteration) {
  auto s = make();
  const auto id = create(s, edgeless());
  const auto r = s.run_simulation(id, 1, R"({"config": {"threshold": {"kind": "clamp"}}})");
  ASSERT_EQ(r.status, 201) << r.body;
  const auto j = body(r);
  EXPECT_EQ(j["result"]["outcome"], "FixedPoint");
  EXPECT_EQ(j["result"]["iterations"], 1);
  EXPECT_EQ(j["seed"], nullptr);
  EXPECT_EQ(s.get_run(j["run_id"].get<std::string>()).body, r.body);
}

TEST_F(ServiceTest, SignMapRunIsLimitCycleFour) {
  auto s = make();
  const auto id = create(s, oracle::sign_map());
  const auto r = s.run_simulation(id, 1, kSignMapRun);
  ASSERT_EQ(r.status, 201) << r.body;
  EXPECT_EQ(body(r)["result"]["outcome"], "LimitCycle:4");
  const auto csv = s.get_trajectory_csv(body(r)["run_id"].get<std::string>());
  EXPECT_EQ(csv.status, 200);
  EXPECT_EQ(csv.content_type, "text/csv");
  EXPECT_EQ(csv.body, export_trajectory(simulate(oracle::sign_map(), oracle::sign_map_config()),
                                        oracle::sign_map()));
}

TEST_F(ServiceTest, AllClampedRunSettlesOnClamps) {
  auto s = make();
  const auto id = create(s, oracle::sign_map());
  const auto r = s.run_simulation(id, 1, R"({"scenario": {"clamps": {"x1": -0.25, "x2": 0.75}}})");
  ASSERT_EQ(r.status, 201) << r.body;
  const auto j = body(r);
  EXPECT_EQ(j["result"]["outcome"], "FixedPoint");
  EXPECT_EQ(j["result"]["trajectory"].back(), Json::array({-0.25, 0.75}));
}

TEST_F(ServiceTest, RunErrors) {
  auto s = make();
  const auto id = create(s, edgeless());
  EXPECT_EQ(s.run_simulation("m424242", 1, "").status, 404);
  EXPECT_EQ(s.run_simulation(id, 2, "").status, 404);
  EXPECT_EQ(s.run_simulation(id, 1, R"({"scenario": {"clamps": {"zz": 0.1}}})").status, 422);
  EXPECT_EQ(s.run_simulation(id, 1, R"({"config": {"epsilon": -1}})").status, 422);
  EXPECT_EQ(s.run_simulation(id, 1, R"({"seed": 1})").status, 422);
  EXPECT_EQ(s.get_run("r999999").status, 404);
  EXPECT_EQ(s.get_run("../index").status, 404);
}

TEST_F(ServiceTest, ReplayReproducesResult) {
  auto s = make();
  const auto id = create(s, builtin_sed_template());
  const auto r = s.run_simulation(id, 1, R"({"scenario": {"clamps": {"crime": 0.9}}})");
  const auto record = body(r);
  const auto model = load_model(s.get_model(id, 1).body);
  const auto config = config_from_json(record["config"], model.range);
  const auto scenario = load_scenario(record["scenario"].dump(), model);
  const auto again = result_to_json(simulate(flatten_hierarchy(model, config), config, scenario));
  EXPECT_EQ(Json::parse(again.dump()), record["result"]);

  const auto second = body(s.run_simulation(id, 1, R"({"scenario": {"clamps": {"crime": 0.9}}})"));
  EXPECT_NE(second["run_id"], record["run_id"]);
  EXPECT_EQ(second["result"], record["result"]);
}

// ---- analyses --------------------------------------------------------------

TEST_F(ServiceTest, ClosureOnSingleEdge) {
  auto s = make();
  auto m = edgeless();
  m.edges = {{ConceptId("a"), ConceptId("b"), 0.5}};
  const auto id = create(s, m);
  const auto r = s.run_analysis(id, 1, R"({"kind": "closure"})");
  ASSERT_EQ(r.status, 201) << r.body;
  const auto res = body(r)["result"];
  int nonzero = 0;
  for (const char* key : {"positive", "negative"})
    for (const auto& row : res[key])
      for (const auto& v : row) nonzero += v.get<double>() != 0.0;
  EXPECT_EQ(nonzero, 1);
  EXPECT_EQ(res["positive"][0][1], 0.5);
  EXPECT_EQ(s.get_analysis(body(r)["analysis_id"].get<std::string>()).body, r.body);
}

TEST_F(ServiceTest, StabilityIsDeterministic) {
  auto s = make();
  const auto id = create(s, builtin_sed_template());
  const char* req = R"({"kind": "stability", "params": {"samples": 20, "seed": 11}})";
  const auto a = body(s.run_analysis(id, 1, req));
  const auto b = body(s.run_analysis(id, 1, req));
  EXPECT_NE(a["analysis_id"], b["analysis_id"]);
  EXPECT_EQ(a["result"], b["result"]);
  EXPECT_EQ(a["params"]["seed"], 11);
  EXPECT_EQ(a["result"]["samples"], 20);
}

TEST_F(ServiceTest, StructuralSearch) {
  auto s = make();
  const auto sign = create(s, oracle::sign_map());
  const auto r = s.run_analysis(sign, 1, R"({"kind": "structural_search",
    "params": {"samples": 16, "seed": 3, "top_k": 2}, "config": {"k2": 0, "threshold": {"kind": "bivalent"}}})");
  ASSERT_EQ(r.status, 201) << r.body;
  const auto res = body(r)["result"];
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0]["edit"], "remove_edge");
  EXPECT_EQ(res[0]["resulting_fixed_point_fraction"], 1.0);

  const auto flat = create(s, edgeless());
  const auto e = s.run_analysis(flat, 1, R"({"kind": "structural_search"})");
  EXPECT_EQ(e.status, 422);
  EXPECT_EQ(body(e)["message"], "empty edge set");
}

TEST_F(ServiceTest, AnalysisParamErrors) {
  auto s = make();
  const auto id = create(s, oracle::sign_map());
  EXPECT_EQ(s.run_analysis(id, 1, R"({"kind": "spectral"})").status, 422);
  EXPECT_EQ(s.run_analysis(id, 1, R"({"kind": "stability", "params": {"samples": 0}})").status, 422);
  EXPECT_EQ(s.run_analysis(id, 1, R"({"kind": "stability", "params": {"samples": "many"}})").status, 422);
  EXPECT_EQ(s.run_analysis(id, 1, R"({"kind": "stability", "params": {"sample": 4}})").status, 422);
  EXPECT_EQ(s.run_analysis(id, 9, R"({"kind": "closure"})").status, 404);
  EXPECT_EQ(s.get_analysis("a000404").status, 404);
}

// ---- compare ---------------------------------------------------------------

TEST_F(ServiceTest, CompareWithSelfIsZero) {
  auto s = make();
  const auto id = create(s, builtin_sed_template());
  const auto run = body(s.run_simulation(id, 1, ""))["run_id"].get<std::string>();
  const auto r = s.compare_runs(run, run);
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = body(r);
  EXPECT_EQ(j["concepts"].size(), builtin_sed_template().size());
  EXPECT_EQ(j["concepts"][0]["id"], "quality_of_life");
  for (const auto& c : j["concepts"]) EXPECT_EQ(c["delta"], 0.0);
}

TEST_F(ServiceTest, CrimeLowersQualityOfLife) {
  auto s = make();
  const auto id = create(s, builtin_sed_template());
  const auto cfg = R"("config": {"k1": 1, "k2": 1, "threshold": {"kind": "tanh"}})";
  const auto a = body(s.run_simulation(id, 1, std::string("{") + cfg + R"(, "scenario": {"clamps": {"crime": 0.1}}})"));
  const auto b = body(s.run_simulation(id, 1, std::string("{") + cfg + R"(, "scenario": {"clamps": {"crime": 0.9}}})"));
  const auto r = body(s.compare_runs(a["run_id"].get<std::string>(), b["run_id"].get<std::string>()));
  EXPECT_EQ(r["concepts"][0]["id"], "quality_of_life");
  EXPECT_LT(r["concepts"][0]["delta"].get<double>(), 0.0);
}

TEST_F(ServiceTest, CompareErrors) {
  auto s = make();
  const auto m1 = create(s, edgeless());
  const auto m2 = create(s, edgeless());
  const auto r1 = body(s.run_simulation(m1, 1, ""))["run_id"].get<std::string>();
  const auto r2 = body(s.run_simulation(m2, 1, ""))["run_id"].get<std::string>();
  EXPECT_EQ(s.compare_runs(r1, r2).status, 409);
  EXPECT_EQ(s.compare_runs(r1, "r999999").status, 404);
}

// ---- store durability ------------------------------------------------------

TEST_F(ServiceTest, RestartRecoversState) {
  std::string model_id, run_id;
  {
    auto s = make();
    model_id = create(s, edgeless());
    auto m = edgeless();
    m.name = "second";
    ASSERT_EQ(s.update_model(model_id, "1", save_model(m)).status, 200);
    run_id = body(s.run_simulation(model_id, 2, ""))["run_id"].get<std::string>();
  }
  // crash leftovers: a torn index line and a half-written temp file
  {
    std::ofstream(root / "index.jsonl", std::ios::app) << R"({"op":"model","id":"m00)";
    std::ofstream(root / "runs" / "r000002.json.tmp") << "{";
  }
  auto s = make();
  EXPECT_EQ(load_model(s.get_model(model_id, std::nullopt).body).name, "second");
  EXPECT_EQ(s.get_run(run_id).status, 200);
  EXPECT_EQ(s.update_model(model_id, "1", save_model(edgeless())).status, 409);

  const auto fresh = create(s, edgeless());
  EXPECT_NE(fresh, model_id);
  const auto run2 = body(s.run_simulation(fresh, 1, ""))["run_id"].get<std::string>();
  EXPECT_NE(run2, run_id);

  // entries written after the torn line survive another restart
  auto again = make();
  EXPECT_EQ(again.get_model(fresh, 1).status, 200);
  EXPECT_EQ(again.get_run(run2).status, 200);
}

TEST_F(ServiceTest, OrphanRecordIdsAreNotReused) {
  {
    auto s = make();
    create(s, edgeless());
  }
  std::filesystem::create_directories(root / "runs");
  std::ofstream(root / "runs" / "r000007.json") << "{}";
  auto s = make();
  const auto id = body(s.run_simulation("m000001", 1, ""))["run_id"].get<std::string>();
  EXPECT_EQ(id, "r000008");
}

// ---- templates and HTTP ----------------------------------------------------

TEST_F(ServiceTest, TemplatesEndpoint) {
  auto s = make();
  const auto r = s.templates();
  EXPECT_EQ(r.status, 200);
  const auto j = body(r);
  ASSERT_EQ(j["archetypes"].size(), 3u);
  EXPECT_TRUE(validate_model(load_model(j["archetypes"][0]["template"].dump())).empty());
}

TEST_F(ServiceTest, HttpRoundTrip) {
  auto s = make();
  httplib::Server server;
  s.install(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/models", save_model(oracle::sign_map()), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const auto id = Json::parse(created->body)["model_id"].get<std::string>();

  auto run = client.Post("/models/" + id + "/1/runs", kSignMapRun, "application/json");
  ASSERT_TRUE(run);
  EXPECT_EQ(run->status, 201);
  const auto run_id = Json::parse(run->body)["run_id"].get<std::string>();

  auto csv = client.Get("/runs/" + run_id + "/trajectory.csv");
  ASSERT_TRUE(csv);
  EXPECT_EQ(csv->status, 200);
  EXPECT_NE(csv->body.find("# outcome=LimitCycle:4"), std::string::npos);

  auto put = client.Put("/models/" + id, httplib::Headers{{"If-Match", "1"}}, save_model(oracle::sign_map()),
                        "application/json");
  ASSERT_TRUE(put);
  EXPECT_EQ(put->status, 200);
  auto stale = client.Put("/models/" + id, httplib::Headers{{"If-Match", "1"}}, save_model(oracle::sign_map()),
                          "application/json");
  ASSERT_TRUE(stale);
  EXPECT_EQ(stale->status, 409);

  auto v2 = client.Get("/models/" + id + "/2");
  ASSERT_TRUE(v2);
  EXPECT_EQ(v2->status, 200);
  auto cmp = client.Get("/runs/" + run_id + "/compare/" + run_id);
  ASSERT_TRUE(cmp);
  EXPECT_EQ(cmp->status, 200);
  auto an = client.Post("/models/" + id + "/2/analyses", R"({"kind": "closure"})", "application/json");
  ASSERT_TRUE(an);
  EXPECT_EQ(an->status, 201);
  auto an_get = client.Get("/analyses/" + Json::parse(an->body)["analysis_id"].get<std::string>());
  ASSERT_TRUE(an_get);
  EXPECT_EQ(an_get->body, an->body);
  auto tmpl = client.Get("/templates");
  ASSERT_TRUE(tmpl);
  EXPECT_EQ(tmpl->status, 200);
  auto missing = client.Get("/runs/r000404");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);

  server.stop();
  worker.join();
}

TEST(ListenAddress, Parsing) {
  EXPECT_EQ(parse_listen_address("0.0.0.0:9000"), (std::pair<std::string, int>{"0.0.0.0", 9000}));
  EXPECT_EQ(parse_listen_address(":8081"), (std::pair<std::string, int>{"127.0.0.1", 8081}));
  EXPECT_THROW(parse_listen_address("localhost"), FcmError);
}
