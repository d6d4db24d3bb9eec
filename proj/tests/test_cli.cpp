#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(ISP_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// JSON text without the header block
std::string strip_header(const std::string& s) {
  const auto a = s.find("\"header\"");
  const auto b = s.find('}', a);
  return s.substr(0, a) + s.substr(b + 1);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("isp_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("rs command") {
  const Run r = run("rs activation=halfspace:0 alpha=0.01");
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 2);
  CHECK(ls[0] == "alpha,q,psi,rs,annealed,beta,beta_acute,at,converged,residual");
  const auto f = split(ls[1]);
  const double q = std::stod(f[1]), ba = std::stod(f[6]);
  CHECK(std::abs(ba - (1 - q)) < 1e-8);
  CHECK(f[8] == "true");
}

TEST_CASE("sweep reproduces single points") {
  const Run s = run("sweep alphas=0.001,0.01,0.05");
  REQUIRE(s.code == 0);
  const auto sl = lines(s.out);
  REQUIRE(sl.size() == 4);
  const char* as[] = {"0.001", "0.01", "0.05"};
  for (int i = 0; i < 3; ++i) {
    const Run r = run(std::string("rs alpha=") + as[i]);
    REQUIRE(r.code == 0);
    CHECK(lines(r.out)[1] == sl[i + 1]);
  }
}

TEST_CASE("enumerate command") {
  const fs::path d = scratch("enum");
  const Run r = run("-o " + d.string() + " enumerate activation=one enum_N=10");
  REQUIRE(r.code == 0);
  const std::string js = slurp(d / "enumerate.json");
  const auto p = js.find("\"logZ\": ");
  REQUIRE(p != std::string::npos);
  CHECK(std::stod(js.substr(p + 8)) == doctest::Approx(10 * std::log(2.0)).epsilon(1e-15));
  CHECK(js.find("\"seed\": 1") != std::string::npos);
  CHECK(fs::exists(d / "enumerate.config"));
  fs::remove_all(d);
}

TEST_CASE("exit codes") {
  CHECK(run("rs activation=bogus:1").code == 1);
  CHECK(run("rs alpha=-1").code == 1);
  CHECK(run("rs no_such_key=3").code == 1);
  CHECK(run("enumerate enum_N=30").code == 1);
  CHECK(run("nosuchcommand").code == 1);
  CHECK(run("rs alpha=5").code == 2);
  CHECK(run("se activation=band:-1,1 alpha=0.05").code == 2);
}

TEST_CASE("config file and overrides") {
  const fs::path d = scratch("cfg");
  fs::create_directories(d);
  {
    std::ofstream c(d / "run.cfg");
    c << "# desk run\nactivation=halfspace:0\nalpha=0.05\n";
  }
  const Run a = run("-c " + (d / "run.cfg").string() + " rs");
  const Run b = run("rs alpha=0.05");
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const Run c = run("-c " + (d / "run.cfg").string() + " rs alpha=0.01");
  CHECK(lines(c.out)[1] == lines(run("rs alpha=0.01").out)[1]);
  fs::remove_all(d);
}

TEST_CASE("reruns are byte-identical") {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  const std::string args = " amp N=400 t=3 alpha=0.05";
  REQUIRE(run("-o " + a.string() + args).code == 0);
  REQUIRE(run("-o " + b.string() + args).code == 0);
  CHECK(slurp(a / "se_check.csv") == slurp(b / "se_check.csv"));
  CHECK(strip_header(slurp(a / "amp_trace.json")) == strip_header(slurp(b / "amp_trace.json")));
  const std::string e = " enumerate activation=band:-1,1 alpha=0.1 enum_N=14 -s 3";
  REQUIRE(run("-o " + a.string() + e).code == 0);
  REQUIRE(run("-o " + b.string() + " -j 1" + e).code == 0);
  CHECK(strip_header(slurp(a / "enumerate.json")) == strip_header(slurp(b / "enumerate.json")));
  CHECK(run("se t_max=5").out == run("se t_max=5").out);
  fs::remove_all(a);
  fs::remove_all(b);
}
