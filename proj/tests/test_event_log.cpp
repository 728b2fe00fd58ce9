#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gora/event_log.hpp"
#include "gora/goal.hpp"
#include "gora/simulator.hpp"

using namespace gora;
namespace fs = std::filesystem;

namespace {

std::vector<LoggedEvent> simulate_and_log(const fs::path& path, bool gzip) {
  SimConfig cfg;
  cfg.n = 5;
  cfg.gamma = 3;
  cfg.tau = 0.2;
  cfg.horizon = 3000;
  std::vector<LoggedEvent> seen;
  EventLogWriter log(path.string(), gzip);
  run(cfg, make_goal({0}, {{1}}), [&](const SlotOutcome& o) {
    log.write(o);
    seen.push_back({o.slot, o.event, o.winner});
  });
  log.close();
  return seen;
}

}  // namespace

TEST_CASE("event logs round-trip, plain and compressed") {
  const auto dir = fs::temp_directory_path() / "gora_event_log_test";
  fs::create_directories(dir);
  for (bool gzip : {false, true}) {
    const auto path = dir / (gzip ? "events.csv.gz" : "events.csv");
    const auto seen = simulate_and_log(path, gzip);
    const auto back = read_event_log(path.string());
    REQUIRE(back.size() == seen.size());
    bool same = true;
    for (std::size_t i = 0; i < seen.size(); ++i) {
      same = same && back[i].slot == seen[i].slot && back[i].event == seen[i].event && back[i].winner == seen[i].winner;
    }
    CHECK(same);
  }
  {
    std::ifstream in(dir / "events.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "slot,event,winner_id");
    CHECK(first.rfind("0,", 0) == 0);
  }
  {
    // gzip magic bytes
    std::ifstream in(dir / "events.csv.gz", std::ios::binary);
    const int a = in.get(), b = in.get();
    CHECK(a == 0x1f);
    CHECK(b == 0x8b);
  }
  fs::remove_all(dir);
}

TEST_CASE("idle and collision slots carry winner -1") {
  const auto dir = fs::temp_directory_path() / "gora_event_log_winner";
  fs::create_directories(dir);
  const auto path = dir / "events.csv";
  simulate_and_log(path, false);
  for (const auto& e : read_event_log(path.string())) {
    if (e.event != SlotEvent::success) CHECK(e.winner == -1);
    if (e.event == SlotEvent::success) CHECK(e.winner >= 0);
  }
  fs::remove_all(dir);
}
