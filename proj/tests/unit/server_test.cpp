#include <gtest/gtest.h>

#include <httplib.h>

#include <chrono>
#include <thread>

#include "rewardevo/store/run_store.hpp"
#include "rewardevo/store/server.hpp"
#include "support/store_fixtures.hpp"

using namespace rewardevo;
using namespace rewardevo::store;
using nlohmann::json;
using test_support::TempDir;

namespace {

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    auto hf = test_support::tiny_run(root_.path(), "hf");
    hf.evolution.mode = evo::SearchMode::human_feedback;
    hf.evolution.samples = 1;
    hf.evolution.restarts = 1;
    hf.evolution.iterations = 2;
    start_run(hf);
    start_run(test_support::tiny_run(root_.path(), "auto"));

    server_ = std::make_unique<ApiServer>(root_.path());
    port_ = server_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_->serve(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(30, 0);
  }

  void TearDown() override {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
  }

  json get(const std::string& path, int expect = 200) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res) << path;
    if (!res) return nullptr;
    EXPECT_EQ(res->status, expect) << path << ": " << res->body;
    return json::parse(res->body);
  }

  httplib::Result post_feedback(const std::string& id, const std::string& body,
                                const std::string& type = "application/json") {
    return client_->Post("/api/runs/" + id + "/feedback", body, type);
  }

  TempDir root_;
  std::unique_ptr<ApiServer> server_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST_F(ServerTest, ListsRunsAndSummaries) {
  const auto list = get("/api/runs");
  ASSERT_EQ(list["runs"].size(), 2u);
  EXPECT_EQ(list["runs"][0]["run_id"], "auto");
  EXPECT_EQ(list["runs"][0]["status"], "finished");
  EXPECT_EQ(list["runs"][1]["status"], "paused_for_feedback");

  const auto summary = get("/api/runs/hf");
  EXPECT_EQ(summary["busy"], false);
  EXPECT_EQ(summary["awaiting_feedback_for"], 1);
  get("/api/runs/ghost", 404);
  get("/api/runs/..", 404);

  const auto it = get("/api/runs/auto/iterations/0");
  EXPECT_EQ(it["candidates"].size(), 4u);
  get("/api/runs/auto/iterations/99", 404);
}

TEST_F(ServerTest, CorsHeaders) {
  auto res = client_->Get("/api/runs");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  auto pre = client_->Options("/api/runs/hf/feedback");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST_F(ServerTest, EventsSinceAndTimeout) {
  const auto all = get("/api/runs/auto/events");
  const std::uint64_t last = all["last_seq"];
  EXPECT_EQ(all["events"].size(), last);
  EXPECT_EQ(all["events"][0]["seq"], 1);
  const auto tail = get("/api/runs/auto/events?since=" + std::to_string(last - 2));
  EXPECT_EQ(tail["events"].size(), 2u);

  const auto start = std::chrono::steady_clock::now();
  const auto none = get("/api/runs/auto/events?since=" + std::to_string(last) + "&timeout=0.3");
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(250));
  EXPECT_TRUE(none["events"].empty());
  EXPECT_EQ(none["status"], "finished");
  get("/api/runs/auto/events?since=abc", 400);
}

TEST_F(ServerTest, FeedbackValidation) {
  auto expect_status = [](const httplib::Result& res, int status) {
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, status) << res->body;
  };
  expect_status(post_feedback("ghost", R"({"text":"x"})"), 404);
  expect_status(post_feedback("hf", R"({"text":"x"})", "text/plain"), 415);
  expect_status(post_feedback("hf", "{"), 400);
  expect_status(post_feedback("hf", R"({"text": 3})"), 400);
  expect_status(post_feedback("hf", R"({"note": "x"})"), 400);
  expect_status(post_feedback("hf", R"({"text": "  "})"), 400);
  expect_status(post_feedback("auto", R"({"text":"x"})"), 409);
  {
    RunWriter holder(root_.path() / "hf");
    expect_status(post_feedback("hf", R"({"text":"x"})"), 409);
  }
  EXPECT_EQ(get("/api/runs/hf")["status"], "paused_for_feedback");
}

TEST_F(ServerTest, FeedbackRunsTheNextIterationAndLongPollSeesIt) {
  const std::uint64_t before = get("/api/runs/hf")["last_seq"];
  auto res = post_feedback("hf", R"({"text":"Reward reaching the target sooner."})");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 202) << res->body;
  const auto accepted = json::parse(res->body);
  EXPECT_EQ(accepted["seq"], before + 1);

  const auto polled = get("/api/runs/hf/events?since=" + std::to_string(before) + "&timeout=10");
  EXPECT_FALSE(polled["events"].empty());
  EXPECT_EQ(polled["events"][0]["type"], "feedback_attached");

  server_->wait_idle();
  const auto summary = get("/api/runs/hf");
  EXPECT_EQ(summary["busy"], false);
  EXPECT_EQ(summary["status"], "finished");
  const auto it = get("/api/runs/hf/iterations/1");
  EXPECT_NE(it["prompt"]["user"].get<std::string>().find("Reward reaching the target sooner."), std::string::npos);
}
