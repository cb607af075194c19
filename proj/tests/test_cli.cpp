#include <doctest.h>

#include <sys/wait.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mvexpectile/cli.hpp"
#include "mvexpectile/solve_deterministic.hpp"

using namespace mvexpectile;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run_in_process(std::vector<std::string> args) {
  args.insert(args.begin(), "mvexpectile");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "mvexpectile_cli_test";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the installed executable; returns its exit status and stdout.
Outcome run_binary(const std::string& args, const std::string& env = "") {
  const fs::path out = scratch_dir() / "stdout.txt";
  const fs::path err = scratch_dir() / "stderr.txt";
  const std::string cmd = env + " '" + std::string(MVEXPECTILE_CLI_PATH) + "' " + args + " > '" +
                          out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(out);
  o.err = slurp(err);
  return o;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  REQUIRE(ec == std::errc());
  REQUIRE(ptr == s.data() + s.size());
  return v;
}

}  // namespace

TEST_CASE("model grammar") {
  const auto e = cli::parse_model("exp(0.05, 0.25)");
  CHECK(e.dim() == 2);
  CHECK(e.marginal(1).rate() == 0.25);
  CHECK(e.copula().family() == CopulaSpec::Family::Independence);
  const auto p = cli::parse_model("pareto(2;10,20,5)");
  CHECK(p.dim() == 3);
  CHECK(p.marginal(2).scale() == 5.0);
  CHECK(p.marginal(0).shape() == 2.0);
  const auto f = cli::parse_model("fgm(-1):exp(0.05,0.25)");
  CHECK(f.copula().theta() == -1.0);
  CHECK_THROWS_AS(cli::parse_model("gamma(1,2)"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_model("exp(0.05"), cli::ConfigError);
  CHECK_THROWS(cli::parse_model("exp(-1)"));
}

TEST_CASE("configuration defaults and validation") {
  const auto c = cli::parse_config(
      R"j({"command":"estimate","model":"exp(0.05,0.25)","sigma":"ones","alpha":0.7})j");
  CHECK(c.command == cli::Command::Estimate);
  CHECK(c.alphas == std::vector<double>{0.7});
  CHECK(c.rm.iterations == 100000);
  CHECK(c.rm.runs == 100);
  CHECK(c.rm.schedule.a == 1.0);
  CHECK(c.rm.schedule.kappa == 1.0);
  CHECK(c.newton.tol == 1e-10);
  CHECK(c.sigma->matrix() == Matrix::Ones(2, 2));
  CHECK(c.rm.seed == c.seed);

  const auto s = cli::parse_config(R"j({"command":"sweep-alpha","model":"exp(1,2)","sigma":"identity"})j");
  CHECK(s.alphas.size() == 9);
  CHECK(s.alphas.front() == 0.1);

  const auto m = cli::parse_config(
      R"j({"command":"solve","model":{"copula":{"family":"fgm","theta":0.5},
                   "marginals":[{"family":"exponential","rate":0.05},{"family":"pareto","shape":3,"scale":2}]},
          "sigma":[[1,0.5],[0.5,2]],"alphas":[0.9,0.2]})j");
  CHECK(m.model->copula().theta() == 0.5);
  CHECK(m.model->marginal(1).family() == MarginalSpec::Family::Pareto);
  CHECK(m.alphas == std::vector<double>{0.2, 0.9});

  auto rejects = [](const std::string& text, const std::string& field) {
    try {
      cli::parse_config(text);
      FAIL("accepted: " << text);
    } catch (const cli::ConfigError& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  rejects(R"j({"command":"solve","model":"exp(1,1)","sigma":[[1,2],[2,1]],"alpha":0.5})j", "sigma");
  rejects(R"j({"command":"solve","model":"exp(1,1)","sigma":[[1,0.5],[0.4,1]],"alpha":0.5})j", "sigma");
  rejects(R"j({"command":"solve","model":"exp(1,1)","sigma":"ones","alpha":1.0})j", "alpha");
  rejects(R"j({"command":"solve","model":"exp(1,1)","sigma":"ones"})j", "alpha");
  rejects(R"j({"command":"solve","model":"exp(1,1)","sigma":"ones","alpha":0.5,"colour":1})j", "colour");
  rejects(R"j({"command":"solve","model":"exp(1,1,1)","sigma":"ones(2)","alpha":0.5})j", "sigma");
  rejects(R"j({"command":"estimate","model":"exp(1,1)","sigma":"ones","alpha":0.5,
              "schedule":{"a":1,"b":0,"kappa":0.4}})j", "schedule");
  rejects(R"j({"command":"fly","model":"exp(1,1)"})j", "command");
  rejects(R"j({"command":"solve","sigma":"ones","alpha":0.5})j", "model");
  rejects(R"j({"command":"empirical","data":"/no/such/file.csv","sigma":"ones","alpha":0.5})j", "data");
  rejects(R"j({"command":"empirical","model":"exp(1,1)","p":0.5,"alpha":0.5})j", "p");
  rejects(R"j({"command":"solve")j", "JSON");
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 26.956912993, 1e-300, 6.02214076e23}) {
    CHECK(to_double(cli::format_double(v)) == v);
  }
}

TEST_CASE("solve writes one row per level") {
  const auto o = run_in_process({"solve", "--model", "exp(0.05,0.25)", "--sigma", "ones",
                                 "--alphas", "0.7,0.5"});
  REQUIRE(o.code == cli::kExitOk);
  const auto rows = parse_csv(o.out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"alpha", "x_1", "x_2", "residual_norm", "iterations"});
  CHECK(to_double(rows[1][0]) == 0.5);
  const auto ref = solve_analytic(cli::parse_model("exp(0.05,0.25)"), ScoringMatrix::ones(2),
                                  Level(0.7));
  // printed values read back to the exact doubles
  CHECK(to_double(rows[2][1]) == ref.point[0]);
  CHECK(to_double(rows[2][2]) == ref.point[1]);
  CHECK(o.err.find("solve:") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(run_in_process({"solve", "--model", "exp(1,1)", "--sigma", "[[1,2],[2,1]]", "--alpha", "0.5"})
            .code == cli::kExitConfig);
  CHECK(run_in_process({"solve", "--model", "exp(1,1)", "--sigma", "ones", "--alpha", "0"}).code ==
        cli::kExitConfig);
  CHECK(run_in_process({"solve", "--bogus"}).code == cli::kExitConfig);
  CHECK(run_in_process({"empirical", "--model", "exp(1,1)", "--p", "0.5", "--alpha", "0.5"}).code ==
        cli::kExitConfig);
  const auto starved = run_in_process({"solve", "--model", "exp(0.05,0.25)", "--sigma", "ones",
                                       "--alpha", "0.7", "--max-iter", "1", "--tol", "1e-15"});
  CHECK(starved.code == cli::kExitNotConverged);
  CHECK(starved.err.find("NOT CONVERGED") != std::string::npos);
  const auto help = run_in_process({"--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("--model") != std::string::npos);
}

TEST_CASE("empirical from a CSV file, with the L^p variant") {
  const fs::path data = scratch_dir() / "sample.csv";
  {
    std::ofstream f(data);
    f << "0,0\n1,1\n\n";
  }
  const auto o = run_in_process({"empirical", "--data", data.string(), "--sigma", "identity",
                                 "--alpha", "0.5"});
  REQUIRE(o.code == cli::kExitOk);
  const auto rows = parse_csv(o.out);
  REQUIRE(rows.size() == 2);
  CHECK(to_double(rows[1][1]) == doctest::Approx(0.5).epsilon(1e-12));
  const auto l = run_in_process({"empirical", "--data", data.string(), "--p", "2", "--alpha", "0.7"});
  REQUIRE(l.code == cli::kExitOk);
  CHECK(to_double(parse_csv(l.out)[1][2]) == doctest::Approx(0.7).epsilon(1e-8));

  const fs::path bad = scratch_dir() / "bad.csv";
  {
    std::ofstream f(bad);
    f << "1,2\n3\n";
  }
  CHECK(run_in_process({"empirical", "--data", bad.string(), "--sigma", "ones", "--alpha", "0.5"})
            .code == cli::kExitConfig);
}

TEST_CASE("sweep-alpha and props tables") {
  const auto s = run_in_process({"sweep-alpha", "--model", "exp(0.05,0.25)", "--sigma", "ones"});
  REQUIRE(s.code == cli::kExitOk);
  const auto rows = parse_csv(s.out);
  REQUIRE(rows.size() == 10);
  for (std::size_t j = 2; j < rows.size(); ++j) {
    CHECK(to_double(rows[j][0]) > to_double(rows[j - 1][0]));
    CHECK(to_double(rows[j][1]) > to_double(rows[j - 1][1]));
  }
  const auto p = run_in_process({"props", "--instances", "5"});
  REQUIRE(p.code == cli::kExitOk);
  const auto pr = parse_csv(p.out);
  REQUIRE(pr.size() == 9);
  for (std::size_t j = 1; j < pr.size(); ++j) CHECK(pr[j][5] == "1");
}

TEST_CASE("config file, output file and traces") {
  const fs::path cfg = scratch_dir() / "steps.json";
  const fs::path out = scratch_dir() / "steps.csv";
  const fs::path trace = scratch_dir() / "steps_trace.csv";
  {
    std::ofstream f(cfg);
    f << R"j({"command":"sweep-steps","model":"exp(0.05,0.25)","sigma":"ones","alpha":0.7,
            "iterations":2000,"runs":3,"schedules":[{"a":1,"b":0,"kappa":1},{"a":1,"b":0,"kappa":0.6}]})j";
  }
  const auto o = run_in_process({"--config", cfg.string(), "-o", out.string(), "--trace", trace.string()});
  REQUIRE(o.code == cli::kExitOk);
  CHECK(o.out.empty());
  const auto rows = parse_csv(slurp(out));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].back() == "max_rel_error");
  CHECK(to_double(rows[2][2]) == 0.6);
  const auto t = parse_csv(slurp(trace));
  CHECK(t.size() == 1 + 2 * 100);
  // a flag overrides the file
  const auto over = run_in_process({"--config", cfg.string(), "--alpha", "0.6", "--runs", "2"});
  REQUIRE(over.code == cli::kExitOk);
  CHECK(parse_csv(over.out)[1] != rows[1]);
}

TEST_CASE("estimate output is byte-identical across runs and follows the seed") {
  const std::string args =
      "estimate --model 'exp(0.05,0.25)' --sigma ones --alpha 0.7 --iterations 2000 --runs 4 "
      "--validation-draws 1000 --threads 2";
  const auto a = run_binary(args);
  const auto b = run_binary(args);
  REQUIRE(a.code == 0);
  CHECK(!a.out.empty());
  CHECK(a.out == b.out);
  const auto c = run_binary(args, "MVEXPECTILE_SEED=7");
  const auto d = run_binary(args, "MVEXPECTILE_SEED=7");
  CHECK(c.out == d.out);
  CHECK(c.out != a.out);
  const auto e = run_binary(args + " --seed 7");
  CHECK(e.out == c.out);
  CHECK(run_binary(args, "MVEXPECTILE_SEED=abc").code == 2);
  const auto rows = parse_csv(a.out);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"alpha", "x_1", "x_2", "residual_norm", "iterations",
                                            "runs", "diverged_runs"});
  CHECK(rows[1][5] == "4");
  CHECK(rows[1][6] == "0");
}
