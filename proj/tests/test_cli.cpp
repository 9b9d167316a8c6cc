#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace {

const std::string kCli = BOTSCOPE_CLI_PATH;

int run(const std::string& args) {
  const int status = std::system((kCli + " " + args).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

const std::string kQuiet = " 2>/dev/null";

}  // namespace

TEST_CASE("simulate is deterministic per seed") {
  REQUIRE(run("--seed 4 simulate --background-hosts 30 --duplication 4 --out sim_a.csv --labels lab_a.csv" + kQuiet) == 0);
  REQUIRE(run("--seed 4 simulate --background-hosts 30 --duplication 4 --out sim_b.csv --labels lab_b.csv" + kQuiet) == 0);
  REQUIRE(run("--seed 5 simulate --background-hosts 30 --duplication 4 --out sim_c.csv" + kQuiet) == 0);
  CHECK(slurp("sim_a.csv") == slurp("sim_b.csv"));
  CHECK(slurp("lab_a.csv") == slurp("lab_b.csv"));
  CHECK(slurp("sim_a.csv") != slurp("sim_c.csv"));
  CHECK(lines(slurp("sim_a.csv")).front() == "timestamp,host,request");
}

TEST_CASE("simulate fixed_list cycles and duplication groups hosts") {
  REQUIRE(run("--seed 2 simulate --bot-mode fixed_list --links /a,/b,/c --background-hosts 5 "
              "--duplication 9 --out sim_fixed.csv --labels lab_fixed.csv" + kQuiet) == 0);
  std::map<std::string, std::vector<std::string>> per_host;
  for (const auto& l : lines(slurp("sim_fixed.csv"))) {
    if (l.rfind("timestamp", 0) == 0) continue;
    const auto c1 = l.find(','), c2 = l.find(',', c1 + 1);
    per_host[l.substr(c1 + 1, c2 - c1 - 1)].push_back(l.substr(c2 + 1));
  }
  const auto& bot = per_host.at("bot1");
  REQUIRE(bot.size() > 6);
  for (std::size_t i = 0; i < bot.size(); ++i) CHECK(bot[i] == std::string("/") + "abc"[i % 3]);

  std::map<std::string, int> per_net;
  for (const auto& l : lines(slurp("lab_fixed.csv"))) {
    if (l.rfind("host_id", 0) == 0) continue;
    std::vector<std::string> f;
    std::istringstream in(l);
    for (std::string x; std::getline(in, x, ',');) f.push_back(x);
    if (f.size() >= 3 && f[1] == "1") ++per_net[f[2]];
  }
  CHECK(per_net == std::map<std::string, int>{{"1", 10}});
}

TEST_CASE("monitor finds an injected botnet") {
  REQUIRE(run("--seed 7 simulate --background-hosts 200 --duplication 19 --out sim_bot.csv --labels lab_bot.csv" + kQuiet) == 0);
  REQUIRE(run("--format triple-csv --window_len_secs 1800 --alerts alerts.jsonl --diag diag.jsonl monitor --input sim_bot.csv" + kQuiet) == 0);
  const auto alerts = lines(slurp("alerts.jsonl"));
  REQUIRE_FALSE(alerts.empty());
  std::set<std::string> bots;
  for (const auto& l : lines(slurp("lab_bot.csv")))
    if (l.find(",1,") != std::string::npos) bots.insert(l.substr(0, l.find(',')));
  bool found_botnet = false;
  for (const auto& l : alerts) {
    auto j = nlohmann::json::parse(l);
    CHECK(j.contains("window_end"));
    CHECK(j["window_len_secs"] == 1800);
    CHECK(j["principal_weight"].get<double>() - j["error_bound"].get<double>() >= 0.65);
    REQUIRE(j["hosts"].is_array());
    CHECK_FALSE(j["hosts"].empty());
    std::size_t hits = 0;
    for (const auto& h : j["hosts"]) {
      CHECK(h["rho"].get<double>() >= 0.65);
      hits += bots.count(h["id"].get<std::string>());
    }
    found_botnet |= hits == 20;
  }
  CHECK(found_botnet);
  for (const auto& l : lines(slurp("diag.jsonl"))) CHECK(nlohmann::json::parse(l).contains("verdict"));
}

TEST_CASE("monitor on pure dense background is silent") {
  REQUIRE(run("--seed 3 simulate --background-hosts 60 --background-sessions 9 --duration 21600 "
              "--out sim_bg.csv" + kQuiet) == 0);
  REQUIRE(run("--format triple-csv --window_len_secs 1800 --alerts alerts_bg.jsonl monitor --input sim_bg.csv" + kQuiet) == 0);
  CHECK(lines(slurp("alerts_bg.jsonl")).empty());
}

TEST_CASE("monitor reads stdin and multiple windows") {
  REQUIRE(run("--seed 7 simulate --background-hosts 50 --duplication 9 --out sim_small.csv" + kQuiet) == 0);
  REQUIRE(std::system(("cat sim_small.csv | " + kCli +
                       " --format triple-csv --window_len_secs 1800 --window_len_secs 3600 "
                       "--diag diag_multi.jsonl --alerts /dev/null monitor --input -" + kQuiet).c_str()) == 0);
  std::set<long long> lens;
  for (const auto& l : lines(slurp("diag_multi.jsonl")))
    lens.insert(nlohmann::json::parse(l)["window_len_secs"].get<long long>());
  CHECK(lens == std::set<long long>{1800, 3600});
}

TEST_CASE("config file sets options") {
  {
    std::ofstream cfg("good.ini");
    cfg << "format=triple-csv\nwindow_len_secs=[1800,3600]\nomega=0.7\n";
  }
  REQUIRE(run("--config good.ini --diag diag_cfg.jsonl --alerts /dev/null monitor --input sim_small.csv" + kQuiet) == 0);
  std::set<long long> lens;
  for (const auto& l : lines(slurp("diag_cfg.jsonl")))
    lens.insert(nlohmann::json::parse(l)["window_len_secs"].get<long long>());
  CHECK(lens == std::set<long long>{1800, 3600});

  {
    std::ofstream cfg("bad.ini");
    cfg << "bogus_key=1\n";
  }
  CHECK(run("--config bad.ini monitor --input sim_small.csv" + kQuiet) == 1);
}

TEST_CASE("usage and input errors") {
  CHECK(run("monitor --input does_not_exist.log" + kQuiet) == 2);
  CHECK(run("frobnicate" + kQuiet) == 1);
  CHECK(run(kQuiet) == 1);
  CHECK(run("--omega 0.4 monitor --input sim_small.csv" + kQuiet) == 1);
  CHECK(run("--eps1 0.5 --eps2 0.1 monitor --input sim_small.csv" + kQuiet) == 1);
  CHECK(run("--mode fixed --step_secs 60 monitor --input sim_small.csv" + kQuiet) == 1);
  CHECK(run("--format xml monitor --input sim_small.csv" + kQuiet) == 1);
  CHECK(run("simulate --bot-mode teleport --out /dev/null" + kQuiet) == 1);
}

TEST_CASE("malformed lines are counted, not fatal") {
  {
    std::ofstream f("mixed.csv");
    f << "timestamp,host,request\n1,a,/x\nnot a line\n2,b,/y\n";
  }
  REQUIRE(run("--format triple-csv monitor --input mixed.csv --alerts /dev/null 2> mixed.err >/dev/null") == 0);
  const auto err = slurp("mixed.err");
  CHECK(err.find("malformed=1") != std::string::npos);
  CHECK(err.find("parsed=2") != std::string::npos);
}

TEST_CASE("verify exit codes") {
  CHECK(run("verify --m 10 --slides 40 --matrices 10 --tridiagonals 10 > verify_ok.txt") == 0);
  CHECK(slurp("verify_ok.txt").find("PASS") != std::string::npos);
  CHECK(run("verify --m 10 --slides 40 --matrices 5 --tridiagonals 5 --inject-fault > verify_bad.txt") == 3);
  CHECK(run("verify --m 1 > verify_deg.txt") == 0);
  CHECK(slurp("verify_deg.txt").find("degenerate") != std::string::npos);
}

TEST_CASE("bench and sweep write csv") {
  REQUIRE(run("bench --hosts 30 --windows 600 --out bench.csv" + kQuiet) == 0);
  auto b = lines(slurp("bench.csv"));
  REQUIRE(b.size() == 2);
  CHECK(b[0].rfind("hosts,window_len_secs", 0) == 0);
  REQUIRE(run("sweep --eps2-values 0.1,0.01 --c-values 5,25 --hosts 30 --window 600 --out sweep.csv" + kQuiet) == 0);
  auto s = lines(slurp("sweep.csv"));
  CHECK(s.size() == 5);
  CHECK(s[0].rfind("eps2,c", 0) == 0);
}
