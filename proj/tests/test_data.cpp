#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "starsel/builder.hpp"
#include "starsel/data.hpp"
#include "starsel/random.hpp"
#include "starsel/results.hpp"

using namespace starsel;
namespace fs = std::filesystem;

namespace {

DataTable csv(const std::string& text, const Schema& schema = {}) {
  std::istringstream is(text);
  return read_csv(is, schema);
}

DataTable synthetic(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream os;
  os << "y,x1,x2,grp,region,u\n";
  for (int i = 0; i < n; ++i) {
    const double x1 = rng.uniform(-2, 2), x2 = rng.uniform(0, 5), u = rng.normal();
    const int g = i % 5, r = i % 7;
    const double y = std::sin(x1) + 0.3 * x2 + 0.2 * g + 0.5 * rng.normal();
    os << y << "," << x1 << "," << x2 << ",g" << g << "," << r + 1 << "," << u << "\n";
  }
  return csv(os.str());
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("starsel_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Csv, TypesAndMissing) {
  const auto t = csv("a,b,c\n1,x,2.5\n2,y,NA\n3,\"z,w\",\n");
  ASSERT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.column("a").type, ColumnType::numeric);
  EXPECT_EQ(t.column("b").type, ColumnType::factor);
  EXPECT_EQ(t.column("b").str[2], "z,w");
  EXPECT_TRUE(t.column("c").missing(1));
  EXPECT_TRUE(t.column("c").missing(2));
  EXPECT_THROW(t.numeric("c"), DataError);
  EXPECT_EQ(t.numeric("a")(2), 3.0);
}

TEST(Csv, RowLevelErrors) {
  try {
    csv("a,b\n1,2\nfoo,3\n4,bar\n", Schema{{"a", ColumnType::numeric}, {"b", ColumnType::numeric}});
    FAIL();
  } catch (const DataError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("2 unparseable"), std::string::npos);
    EXPECT_NE(m.find("line 3, column 'a'"), std::string::npos);
    EXPECT_NE(m.find("line 4, column 'b'"), std::string::npos);
  }
  EXPECT_THROW(csv("a,b\n1\n"), DataError);
  EXPECT_THROW(csv(""), DataError);
  EXPECT_THROW(csv("a,a\n1,2\n"), DataError);
}

TEST(Preprocess, BenchmarkRules) {
  std::ostringstream os;
  os << "y,five,skewed,plain,cat\n";
  Rng rng(1);
  for (int i = 0; i < 200; ++i)
    os << i % 2 << "," << i % 5 << "," << std::exp(2.0 * rng.normal()) << "," << rng.normal() * 3 + 10 << ","
       << (i % 3 ? "a" : "b") << "\n";
  os << "1,2,NA,0.5,a\n";
  auto t = csv(os.str());
  PreprocessOptions opt;
  opt.exclude = {"y"};
  const auto log = preprocess_uci(t, opt);
  EXPECT_EQ(t.rows(), 200u);
  EXPECT_EQ(log[0], "dropped 1 incomplete row(s) of 201");
  EXPECT_EQ(t.column("five").type, ColumnType::factor);
  EXPECT_EQ(t.column("y").type, ColumnType::numeric);
  const Eigen::VectorXd s = t.numeric("skewed");
  EXPECT_NEAR(s.mean(), 0.0, 1e-12);
  EXPECT_LT(std::abs(sample_skewness(t.column("skewed").num)), 1.0);
  const Eigen::VectorXd p = t.numeric("plain");
  EXPECT_NEAR(std::sqrt((p.array() - p.mean()).square().sum() / 199.0), 1.0, 1e-12);
  bool logged = false;
  for (const auto& l : log) logged = logged || l.find("'skewed'") != std::string::npos;
  EXPECT_TRUE(logged);

  auto c = csv("y,k\n1,3\n0,3\n1,3\n");
  EXPECT_THROW(preprocess_uci(c, opt), DataError);
}

TEST(Builder, MinimalPsplineGivesLinearAndSmoothBlocks) {
  const auto t = synthetic(150, 3);
  const auto cfg = parse_model_config("response = y\nterm { kind = pspline, var = x1 }", t.names());
  const auto bm = build_model(cfg, t);
  ASSERT_EQ(bm.spec.p(), 2);
  EXPECT_EQ(bm.spec.blocks[0].label, "lin(x1)");
  EXPECT_EQ(bm.spec.blocks[0].dim(), 1);
  EXPECT_EQ(bm.spec.blocks[1].label, "sm(x1)");
  EXPECT_EQ(bm.spec.fixed_design.cols(), 1);
  for (const auto& b : bm.spec.blocks) {
    EXPECT_NEAR(b.X.squaredNorm(), 150.0, 1e-9);
    EXPECT_LT(b.X.colwise().sum().cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Builder, TermKinds) {
  const auto t = synthetic(210, 4);
  const auto cfg = parse_model_config(R"(
response = y
term { kind = linear, var = grp }
term { kind = linear, var = x2 }
term { kind = random_intercept, var = grp, label = re }
term { kind = mrf, var = region }
term { kind = varying_coefficient, var = (x1, u) }
term { kind = tensor_spline, var = (x1, x2), basis = 5 }
)", t.names());
  const auto bm = build_model(cfg, t);
  std::vector<std::string> labels;
  for (const auto& b : bm.spec.blocks) labels.push_back(b.label);
  const std::vector<std::string> expected{"lin(grp)", "lin(x2)",        "re(re)",        "mrf(region)",
                                          "lin(x1:u)", "sm(x1:u)", "lin(x1:x2)", "sm(x1:x2)"};
  EXPECT_EQ(labels, expected);
  EXPECT_EQ(bm.spec.blocks[0].dim(), 4);  // 5 levels, one block
  EXPECT_EQ(bm.spec.blocks[2].dim(), 4);  // centered against the intercept
  EXPECT_EQ(bm.spec.blocks[6].dim(), 3);  // tensor null space without the constant
  EXPECT_EQ(bm.terms[3].levels, (std::vector<std::string>{"1", "2", "3", "4", "5", "6", "7"}));
}

TEST(Builder, NewDataReproducesTrainingDesign) {
  const auto t = synthetic(120, 5);
  const auto cfg = parse_model_config(R"(
response = y
term { kind = pspline, var = x1 }
term { kind = mrf, var = region }
term { kind = linear, var = x2, select = false }
)");
  const auto bm = build_model(cfg, t);
  const auto nd = evaluate_design(bm, t);
  for (std::size_t j = 0; j < nd.blocks.size(); ++j)
    EXPECT_LT((nd.blocks[j] - bm.spec.blocks[j].X).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((nd.fixed - bm.spec.fixed_design).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(bm.spec.fixed_labels, (std::vector<std::string>{"(Intercept)", "lin(x2)[1]"}));
}

TEST(Builder, DataErrors) {
  const auto t = synthetic(50, 6);
  EXPECT_THROW(build_model(parse_model_config("response = nope\nterm { kind = linear, var = x1 }"), t), DataError);
  EXPECT_THROW(build_model(parse_model_config("response = y\nterm { kind = linear, var = zz }"), t), DataError);
  auto b = csv("y,x\n0.5,1\n1,2\n0,3\n");
  EXPECT_THROW(build_model(parse_model_config("family = binomial\nresponse = y\nterm { kind = linear, var = x }"), b),
               DataError);
}

TEST(Builder, NeighborFile) {
  const auto dir = temp_dir("nb");
  {
    std::ofstream f(dir / "adj.csv");
    f << "from,to\n1,2\n2,3\n3,1\n4,5\n5,6\n6,7\n7,4\n";
  }
  const auto t = synthetic(70, 7);
  const auto cfg = parse_model_config("response = y\nterm { kind = mrf, var = region, neighbors = adj.csv }");
  BuildOptions opt;
  opt.base_dir = dir;
  const auto bm = build_model(cfg, t, opt);
  // two connected components: one null-space contrast plus the penalized block
  ASSERT_EQ(bm.spec.p(), 2);
  EXPECT_EQ(bm.spec.blocks[0].dim(), 1);
}

TEST(Results, FilesAndDeterminism) {
  const auto t = synthetic(100, 8);
  const auto cfg = parse_model_config("response = y\nterm { kind = pspline, var = x1 }\nterm { kind = linear, var = grp }");
  const auto bm = build_model(cfg, t);
  SamplerConfig sc;
  sc.n_chains = 2;
  sc.burn_in = 20;
  sc.iterations = 60;
  sc.thin = 2;
  sc.seed = 11;
  auto run = [&](const std::string& name) {
    const auto dir = temp_dir(name);
    emit_results(bm, run_chains(bm.spec, sc), sc, dir, {"test run"});
    std::ifstream f(dir / "summary.json");
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  const std::string a = run("r1"), b = run("r2");
  EXPECT_EQ(a, b);
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["blocks"].size(), 3u);
  for (const auto& blk : j["blocks"]) {
    EXPECT_GE(blk["pincl"].get<double>(), 0.0);
    EXPECT_LE(blk["pincl"].get<double>(), 1.0);
  }
  const auto dir = fs::temp_directory_path() / "starsel_test_r1";
  EXPECT_TRUE(fs::exists(dir / "samples.csv"));
  EXPECT_TRUE(fs::exists(dir / "samples.json"));
  EXPECT_TRUE(fs::exists(dir / "plotdata" / "x1.csv"));
  EXPECT_TRUE(fs::exists(dir / "plotdata" / "grp.csv"));
  std::ifstream s(dir / "samples.csv");
  std::string line;
  int rows = -1;
  while (std::getline(s, line)) ++rows;
  EXPECT_EQ(rows, 2 * 30);
  std::ifstream lg(dir / "log.txt");
  while (std::getline(lg, line)) {
    const bool coded = line.rfind("INFO ", 0) == 0 ||
                       (line.rfind("WARN W", 0) == 0 && std::isdigit(static_cast<unsigned char>(line[6]))) ||
                       line.rfind("ERROR E", 0) == 0;
    EXPECT_TRUE(coded) << line;
  }
  std::ifstream pc(dir / "plotdata" / "x1.csv");
  std::getline(pc, line);
  EXPECT_EQ(line, "x1,mean,lower,upper");
  int pts = 0;
  while (std::getline(pc, line)) {
    ++pts;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    EXPECT_LE(v[2], v[1]);
    EXPECT_LE(v[1], v[3]);
  }
  EXPECT_EQ(pts, 100);
}
