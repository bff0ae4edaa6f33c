#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "rank1/channels.hpp"
#include "rank1/potential.hpp"
#include "rank1/prior.hpp"

using namespace rank1;
using namespace rank1::cli;
namespace fs = std::filesystem;

namespace {

const char* kIni = R"(
# shared test configuration
[prior]
preset = bernoulli
rho = 0.5

[grid]
deltas = 0.5,0.25
points = 9
)";

const char* kJson = R"({
  "prior": {"preset": "bernoulli", "rho": 0.5},
  "grid": {"deltas": [0.5, 0.25], "points": 9}
})";

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("rank1_cli_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run(const std::string& args) {
  std::string cmd = std::string(RANK1_PHASE_BIN) + " " + args;
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Csv {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

Csv parse_csv(const fs::path& p) {
  Csv csv;
  std::ifstream in(p);
  REQUIRE(in.good());
  std::string line;
  bool header_seen = false;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      std::string body = line.substr(2);
      auto eq = body.find('=');
      REQUIRE(eq != std::string::npos);
      csv.meta.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      CHECK_FALSE(header_seen);  // metadata precedes the header
      continue;
    }
    if (!header_seen) {
      csv.columns = split(line);
      header_seen = true;
      continue;
    }
    csv.rows.push_back(split(line));
  }
  return csv;
}

std::string meta_value(const Csv& csv, const std::string& key) {
  for (const auto& [k, v] : csv.meta)
    if (k == key) return v;
  return "";
}

}  // namespace

TEST_CASE("sectioned text and json spell the same configuration") {
  ExperimentConfig a = ExperimentConfig::from_text(kIni, "a.ini");
  ExperimentConfig b = ExperimentConfig::from_text(kJson, "b.json");
  CHECK(a.serialize() == b.serialize());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  for (char c : a.hash()) CHECK(std::isxdigit(static_cast<unsigned char>(c)));

  CHECK(a.get_string("prior.preset") == "bernoulli");
  CHECK(a.get_double("prior.rho") == 0.5);
  CHECK(a.get_int("grid.points") == 9);
  CHECK(a.get_list("grid.deltas") == std::vector<double>{0.5, 0.25});
  CHECK(a.has("grid.points"));
  CHECK_FALSE(a.has("grid.missing"));
  CHECK(a.get_double("grid.absent", 1.5) == 1.5);
  CHECK(a.get_bool("grid.flag", true));

  // round trip through the canonical form
  ExperimentConfig c = ExperimentConfig::from_text(a.serialize(), "c.ini");
  CHECK(c.serialize() == a.serialize());
}

TEST_CASE("configuration errors carry their origin") {
  CHECK_THROWS_AS(ExperimentConfig::from_text("[s]\nk = 1\nk = 2\n", "dup.ini"),
                  ConfigError);
  try {
    ExperimentConfig::from_text("[s]\nk = 1\nk = 2\n", "dup.ini");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("dup.ini") != std::string::npos);
    CHECK(msg.find('k') != std::string::npos);
  }
  CHECK_THROWS_AS(ExperimentConfig::from_text("key_without_section = 1\n", "o"),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_text("[s]\nBadKey = 1\n", "o"),
                  ConfigError);

  ExperimentConfig cfg = ExperimentConfig::from_text(kIni, "t.ini");
  CHECK_THROWS_AS((void)cfg.get_double("prior.preset"), ConfigError);
  CHECK_THROWS_AS((void)cfg.get_string("prior.nope"), ConfigError);
  CHECK_THROWS_AS((void)cfg.get_int("prior.rho"), ConfigError);
}

TEST_CASE("prior presets resolve to the intended atoms") {
  auto make = [](const std::string& body) {
    return ExperimentConfig::from_text(body, "p.ini");
  };
  DiscretePrior b = make("[prior]\npreset = bernoulli\nrho = 0.3\n").prior();
  REQUIRE(b.size() == 2);
  CHECK(b.support()[0] == 0.0);
  CHECK(b.support()[1] == 1.0);
  CHECK(b.weights()[1] == doctest::Approx(0.3).epsilon(1e-15));

  DiscretePrior r = make("[prior]\npreset = rademacher\n").prior();
  CHECK(r.support()[0] == -1.0);
  CHECK(r.support()[1] == 1.0);
  CHECK(r.weights()[0] == 0.5);

  DiscretePrior c = make("[prior]\npreset = community\nrho = 0.05\n").prior();
  DiscretePrior ref = community_detection_prior(0.05);
  CHECK(c.support()[0] == ref.support()[0]);
  CHECK(c.support()[1] == ref.support()[1]);

  DiscretePrior d = make("[prior]\npreset = dirac\nvalue = 2.5\n").prior();
  REQUIRE(d.size() == 1);
  CHECK(d.support()[0] == 2.5);

  DiscretePrior u = make("[prior]\npreset = custom\nsupport = 0,1,2\nweights = 0.2,0.3,0.5\n")
                        .prior();
  REQUIRE(u.size() == 3);
  CHECK(u.weights()[2] == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_AS((void)make("[prior]\npreset = bernoulli\n").prior(), ConfigError);
  CHECK_THROWS_AS((void)make("[prior]\npreset = cauchy\n").prior(), ConfigError);

  std::string label = make("[prior]\npreset = bernoulli\nrho = 0.3\n").prior_label();
  CHECK(label.find("bernoulli") != std::string::npos);
}

TEST_CASE("potential command reproduces the library values") {
  fs::path dir = fresh_dir("potential");
  fs::path cfg = dir / "cfg.ini";
  write_file(cfg,
             "[prior]\npreset = bernoulli\nrho = 0.02\n\n"
             "[grid]\ndelta = 0.0011\npoints = 33\n");
  REQUIRE(run("potential --config " + cfg.string() + " --out " + dir.string() +
              " 2>/dev/null") == 0);

  DiscretePrior wb = make_prior({0.0, 1.0}, {0.98, 0.02});
  Csv csv = parse_csv(dir / "potential.csv");
  REQUIRE(csv.columns == std::vector<std::string>{"delta", "e", "i_rs", "kind"});
  int grid_rows = 0, minima = 0, maxima = 0, global_rows = 0;
  for (const auto& row : csv.rows) {
    REQUIRE(row.size() == 4);
    double e = std::stod(row[1]);
    double val = std::stod(row[2]);
    CHECK(std::stod(row[0]) == 0.0011);
    if (row[3] == "grid") {
      ++grid_rows;
      CHECK(val == doctest::Approx(i_rs(wb, e, 0.0011)).epsilon(1e-13));
    } else if (row[3] == "minimum") {
      ++minima;
    } else if (row[3] == "maximum") {
      ++maxima;
    } else if (row[3] == "global_minimum") {
      ++global_rows;
      MutualInfo mi = mutual_information(wb, 0.0011);
      CHECK(e == doctest::Approx(mi.argmin_e).epsilon(1e-12));
      CHECK(val == doctest::Approx(mi.value).epsilon(1e-12));
    }
  }
  CHECK(grid_rows == 33);
  CHECK(minima == 2);
  CHECK(maxima == 1);
  CHECK(global_rows == 1);
  fs::remove_all(dir);
}

TEST_CASE("thresholds command emits the library thresholds as json") {
  fs::path dir = fresh_dir("thresholds");
  fs::path cfg = dir / "cfg.json";
  write_file(cfg, "{\"prior\": {\"preset\": \"bernoulli\", \"rho\": 0.02}}\n");
  REQUIRE(run("thresholds --config " + cfg.string() + " --out " + dir.string() +
              " 2>/dev/null") == 0);

  nlohmann::json doc = nlohmann::json::parse(read_file(dir / "thresholds.json"));
  DiscretePrior wb = make_prior({0.0, 1.0}, {0.98, 0.02});
  Thresholds th = compute_thresholds(wb);
  CHECK(doc["delta_amp"].get<double>() ==
        doctest::Approx(th.delta_amp).epsilon(1e-13));
  CHECK(doc["delta_rs"].get<double>() ==
        doctest::Approx(th.delta_rs).epsilon(1e-13));
  CHECK(doc["delta_opt"].get<double>() ==
        doctest::Approx(th.delta_opt).epsilon(1e-13));
  CHECK(doc["delta_spectral"].get<double>() ==
        doctest::Approx(th.delta_spectral).epsilon(1e-13));
  CHECK(doc["transition"].get<std::string>() == "first_order");
  CHECK(doc["v"].get<double>() == doctest::Approx(0.02).epsilon(1e-15));
  fs::remove_all(dir);
}

TEST_CASE("identical invocations produce identical bytes") {
  fs::path d1 = fresh_dir("det1");
  fs::path d2 = fresh_dir("det2");
  fs::path cfg = d1 / "cfg.ini";
  write_file(cfg,
             "[prior]\npreset = bernoulli\nrho = 0.02\n\n[run]\ndelta = 0.0008\n");
  std::string base = "se --config " + cfg.string() + " --seed 7 --out ";
  REQUIRE(run(base + d1.string() + " 2>/dev/null") == 0);
  REQUIRE(run(base + d2.string() + " 2>/dev/null") == 0);
  std::string a = read_file(d1 / "se.csv");
  std::string b = read_file(d2 / "se.csv");
  CHECK(a == b);
  CHECK(a.find("fixed_point") != std::string::npos);

  Csv csv = parse_csv(d1 / "se.csv");
  CHECK(meta_value(csv, "seed") == "7");
  CHECK(meta_value(csv, "converged") == "1");
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("environment variable overrides the workers flag") {
  fs::path dir = fresh_dir("env");
  fs::path cfg = dir / "cfg.ini";
  write_file(cfg,
             "[prior]\npreset = bernoulli\nrho = 0.02\n\n[run]\ndelta = 0.002\n");
  std::string cmd = std::string("RANK1_PHASE_WORKERS=2 ") + RANK1_PHASE_BIN +
                    " se --config " + cfg.string() + " --out " + dir.string() +
                    " --workers 7 2>/dev/null";
  int status = std::system(cmd.c_str());
  REQUIRE((WIFEXITED(status) && WEXITSTATUS(status) == 0));
  Csv csv = parse_csv(dir / "se.csv");
  CHECK(meta_value(csv, "workers") == "2");
  fs::remove_all(dir);
}

TEST_CASE("failures exit nonzero with a machine readable envelope") {
  fs::path dir = fresh_dir("err");
  fs::path err = dir / "stderr.txt";
  CHECK(run("thresholds --config /definitely/not/there.ini --out " +
            dir.string() + " 2> " + err.string()) != 0);
  std::string msg = read_file(err);
  CHECK(msg.find("error") != std::string::npos);

  // bad flag values are rejected before any work happens
  fs::path cfg = dir / "cfg.ini";
  write_file(cfg, "[prior]\npreset = rademacher\n");
  CHECK(run("thresholds --config " + cfg.string() + " --out " + dir.string() +
            " --tol -1 2>/dev/null") != 0);
  CHECK(run("no-such-command 2>/dev/null") != 0);
  fs::remove_all(dir);
}
