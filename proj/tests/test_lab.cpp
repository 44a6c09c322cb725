#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <optional>
#include <unistd.h>
#include <fstream>
#include <set>
#include <sstream>

#include "actlab/error.hpp"
#include "actlab/lab.hpp"
#include "actlab/record.hpp"
#include "actlab/zoo.hpp"

using namespace actlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test, removed afterwards.
class Scratch {
 public:
  Scratch() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("actlab-" + std::string(info->test_suite_name()) + "-" + info->name() + "-" +
             std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Scratch() { fs::remove_all(path_); }
  std::string str() const { return path_.string(); }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

const std::string kGolden = std::string(ACTLAB_TEST_DIR) + "/golden/runs/";

}  // namespace

TEST(Options, DefaultsAndValidation) {
  const json e = lab::normalize_options("eval", nullptr);
  EXPECT_EQ(e["seeds"], 3);
  EXPECT_EQ(e["steps"], 50);
  EXPECT_EQ(e["budget"], 64);
  EXPECT_EQ(e["optimizer"], "adam");
  EXPECT_EQ(e["activations"].size(), 6u);
  const json v = lab::normalize_options("evolve", json{{"generations", 3}});
  EXPECT_EQ(v["generations"], 3);
  EXPECT_EQ(v["proposals"], 8);
  EXPECT_EQ(v["top_k"], 16);
  EXPECT_EQ(kind_of([] { lab::normalize_options("eval", json{{"bogus", 1}}); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { lab::normalize_options("eval", json{{"seeds", "three"}}); }),
            ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { lab::normalize_options("dance", nullptr); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { lab::normalize_options("eval", json::array()); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(lab::command_names().size(), 7u);
}

TEST(Suites, Resolution) {
  EXPECT_EQ(lab::resolve_suite("default", 0).size(), 70u);
  const auto t1 = lab::resolve_suite("table1", 0);
  ASSERT_EQ(t1.size(), 40u);
  for (const auto& s : t1) EXPECT_TRUE(s.family() == Family::Poly1d || s.family() == Family::SinProduct);
  const auto smoke = lab::resolve_suite("smoke", 0);
  ASSERT_EQ(smoke.size(), 4u);
  const auto def = default_suite(0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(smoke[i], def[i]);
  EXPECT_EQ(lab::resolve_suite("feynman", 0).size(), 10u);
  EXPECT_EQ(lab::resolve_suite("sin_product:3", 0).size(), 3u);
  EXPECT_THROW(lab::resolve_suite("mnist", 0), Error);
  EXPECT_THROW(lab::resolve_suite("poly1d:x", 0), Error);
  EXPECT_THROW(lab::resolve_suite("poly1d:0", 0), Error);
}

TEST(Activations, Resolution) {
  EXPECT_EQ(*lab::resolve_activation("gelu").expr(), *builtin("gelu").expr);
  EXPECT_EQ(lab::resolve_activation("pler").name(), "pler");
  EXPECT_TRUE(lab::resolve_activation("(mul 2 x)").expr().has_value());
  EXPECT_TRUE(lab::resolve_activation("x").expr().has_value());
  EXPECT_EQ(kind_of([] { lab::resolve_activation("swish"); }), ErrorKind::UnknownActivation);
  EXPECT_EQ(kind_of([] { lab::resolve_activation("(mul 2"); }), ErrorKind::Syntax);
}

TEST(Helpers, MeanSdAndCsv) {
  const auto m = lab::mean_sd({2, 4, 4, 4, 5, 5, 7, 9});
  EXPECT_DOUBLE_EQ(m.mean, 5.0);
  EXPECT_NEAR(m.sd, std::sqrt(32.0 / 7.0), 1e-15);
  EXPECT_EQ(lab::mean_sd({3.0}).sd, 0.0);
  EXPECT_EQ(lab::csv_field("plain"), "plain");
  EXPECT_EQ(lab::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(lab::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(lab::csv_field("two\nlines"), "\"two\nlines\"");
}

TEST(RunDir, FreshAndExclusive) {
  Scratch tmp;
  std::set<std::string> seen;
  for (int i = 0; i < 50; ++i) {
    const std::string d = lab::create_run_dir(tmp.str(), "same salt");
    EXPECT_TRUE(fs::is_directory(d));
    EXPECT_TRUE(seen.insert(d).second);
    const std::string name = fs::path(d).filename().string();
    EXPECT_EQ(name.size(), 16u + 1 + 8) << name;
    EXPECT_EQ(name[8], 'T');
    EXPECT_EQ(name[15], 'Z');
  }
  std::ofstream(tmp / "blocker") << "x";
  EXPECT_EQ(kind_of([&] { lab::create_run_dir((tmp / "blocker").string(), "s"); }), ErrorKind::Io);
}

TEST(Record, ShaAndSpecJson) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  for (const auto& s : default_suite(3)) EXPECT_EQ(spec_from_json(to_json(s)), s);
  DatasetSpec fixed = make_spec(Family::Poly20d, 1, 4);
  Monomial m{0.5, std::vector<int>(20, 0)};
  m.exponents[2] = 3;
  std::get<Poly20dParams>(fixed.params).terms = {m};
  EXPECT_EQ(spec_from_json(to_json(fixed)), fixed);
  EXPECT_EQ(kind_of([] { spec_from_json(json{{"family", "poly1d"}}); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { sha256_file("/nonexistent/file"); }), ErrorKind::Io);
}

TEST(Eval, DefaultSuiteTableShape) {
  Scratch tmp;
  const auto out = lab::run_command("eval", json{{"out_dir", tmp.str()}, {"seeds", 1}, {"steps", 5}});
  const auto summary = lines(slurp(fs::path(out.run_dir) / "summary.csv"));
  ASSERT_EQ(summary.size(), 7u);
  EXPECT_EQ(fields(summary[0]).size(), 10u);
  EXPECT_EQ(fields(summary[0])[4], "ood_mse_mean");
  EXPECT_EQ(fields(summary[0])[2], "train_mse_mean");
  const char* names[] = {"relu", "gelu", "gelusine", "gelusinc", "gmtu", "turbulent"};
  for (int i = 0; i < 6; ++i) {
    const auto f = fields(summary[static_cast<std::size_t>(i) + 1]);
    EXPECT_EQ(f[0], names[i]);
    EXPECT_EQ(f[6], "70");
  }
  EXPECT_EQ(lines(slurp(fs::path(out.run_dir) / "results.csv")).size(), 1u + 6 * 70);
  EXPECT_EQ(out.record["results"].size(), 6u);
  EXPECT_EQ(out.record["schema_version"], kRunRecordSchema);
  EXPECT_EQ(out.record["datasets"].size(), 70u);
  EXPECT_NE(out.text.find("OOD test MSE"), std::string::npos);
}

TEST(Eval, FailuresShowUpAsRows) {
  Scratch tmp;
  const auto out = lab::run_command(
      "eval", json{{"out_dir", tmp.str()}, {"seeds", 1}, {"steps", 5}, {"suite", "poly1d:1"},
                   {"activations", {"relu", "swish", "fisg", "(add x"}}});
  const auto summary = lines(slurp(fs::path(out.run_dir) / "summary.csv"));
  ASSERT_EQ(summary.size(), 5u);
  EXPECT_EQ(fields(summary[1])[6], "1");
  for (std::size_t i = 2; i < 5; ++i) {
    const auto f = fields(summary[i]);
    EXPECT_EQ(f[6], "0") << summary[i];
    EXPECT_FALSE(f.back().empty()) << summary[i];
  }
  EXPECT_NE(out.text.find("swish"), std::string::npos);
}

TEST(Sweep, AlphaZeroIsGelu) {
  Scratch tmp;
  const json common = {{"out_dir", tmp.str()}, {"seeds", 2}, {"steps", 10}, {"suite", "sin_product:2"}};
  json sw = common;
  sw.update({{"mode", "grid"}, {"count", 5}, {"lo", 0.0}, {"hi", 1.0}});
  const auto s = lab::run_command("sweep", sw);
  json ev = common;
  ev["activations"] = {"gelu"};
  const auto e = lab::run_command("eval", ev);
  const auto rows = lines(slurp(fs::path(s.run_dir) / "sweep.csv"));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], "alpha,ood_mse_mean,ood_mse_sd,train_mse_mean,rank,reference,trials,failed");
  const auto first = fields(rows[1]);
  EXPECT_EQ(first[0], "0");
  const auto gelu = fields(lines(slurp(fs::path(e.run_dir) / "summary.csv"))[1]);
  EXPECT_EQ(first[1], gelu[4]) << "alpha = 0 must reproduce gelu bit-for-bit";
  EXPECT_EQ(first[3], gelu[2]);
  // Grid rows come out in increasing alpha.
  double prev = -1;
  std::set<int> ranks;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    EXPECT_GT(std::stod(f[0]), prev);
    prev = std::stod(f[0]);
    ranks.insert(std::stoi(f[4]));
  }
  EXPECT_EQ(ranks.size(), 5u) << "distinct losses give ranks 1..5";
  EXPECT_EQ(*ranks.begin(), 1);
}

TEST(Sweep, ReferencesAreRankedAgainstSamples) {
  Scratch tmp;
  const auto s = lab::run_command("sweep", json{{"out_dir", tmp.str()}, {"seeds", 1}, {"steps", 5},
                                                {"suite", "poly1d:1"}, {"count", 3},
                                                {"references", {0.1}}});
  const auto rows = lines(slurp(fs::path(s.run_dir) / "sweep.csv"));
  ASSERT_EQ(rows.size(), 5u);
  int refs = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    if (f[5] == "1") {
      ++refs;
      EXPECT_EQ(f[0], "0.1");
      // rank = 1 + samples with a strictly lower mean OOD MSE
      int better = 0;
      for (std::size_t j = 1; j < rows.size(); ++j) {
        const auto g = fields(rows[j]);
        if (g[5] == "0" && std::stod(g[1]) < std::stod(f[1])) ++better;
      }
      EXPECT_EQ(std::stoi(f[4]), better + 1);
    }
  }
  EXPECT_EQ(refs, 1);
}

TEST(Sweep, RejectsBadSpecs) {
  Scratch tmp;
  const json base = {{"out_dir", tmp.str()}, {"suite", "poly1d:1"}, {"steps", 5}, {"seeds", 1}};
  json a = base;
  a["template"] = "(gelu x)";
  EXPECT_THROW(lab::run_command("sweep", a), Error);
  json b = base;
  b["count"] = 1;
  EXPECT_THROW(lab::run_command("sweep", b), Error);
  json c = base;
  c["mode"] = "spiral";
  EXPECT_THROW(lab::run_command("sweep", c), Error);
  EXPECT_TRUE(fs::is_empty(tmp.str())) << "rejected specs write nothing";
}

TEST(Histogram, CountsAreConserved) {
  Scratch tmp;
  const auto h = lab::run_command("histogram", json{{"out_dir", tmp.str()}, {"steps", 5}, {"suite", "poly1d:1"}});
  const auto rows = lines(slurp(fs::path(h.run_dir) / "histogram.csv"));
  ASSERT_EQ(rows.size(), 81u);
  EXPECT_EQ(rows[0], "bin_left,bin_right,count");
  std::uint64_t total = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) total += std::stoull(fields(rows[i])[2]);
  EXPECT_EQ(total, 128u * 64 * 3);
  EXPECT_EQ(fields(rows[1])[0], "-4");
  EXPECT_EQ(fields(rows[80])[1], "4");
}

TEST(Histogram, ZeroProbeIsASingleSpike) {
  Scratch tmp;
  const auto h = lab::run_command("histogram", json{{"out_dir", tmp.str()}, {"probe", "zero"}, {"suite", "poly1d:1"}});
  const auto rows = lines(slurp(fs::path(h.run_dir) / "histogram.csv"));
  int nonzero = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    if (f[2] != "0") {
      ++nonzero;
      EXPECT_LE(std::stod(f[0]), 0.0);
      EXPECT_GT(std::stod(f[1]), 0.0);
      EXPECT_EQ(f[2], std::to_string(128 * 64 * 3));
    }
  }
  EXPECT_EQ(nonzero, 1);
}

TEST(Histogram, ForwardOnlyActivationsAreRejected) {
  Scratch tmp;
  EXPECT_EQ(kind_of([&] {
              lab::run_command("histogram", json{{"out_dir", tmp.str()}, {"activation", "spf"}});
            }),
            ErrorKind::NotTrainable);
}

TEST(Export, ReimportIsBitIdentical) {
  Scratch tmp;
  const auto out = lab::run_command("export-dataset", json{{"out_dir", tmp.str()}, {"suite", "spherical_harmonic:2"}, {"seed", 5}});
  const auto specs = lab::resolve_suite("spherical_harmonic:2", 5);
  for (std::size_t i = 0; i < 2; ++i) {
    std::ifstream in(fs::path(out.run_dir) / ("dataset_" + std::to_string(i) + ".csv"));
    const SampleSet back = read_csv(in);
    const SampleSet orig = realize(specs[i]);
    EXPECT_TRUE(back.train.inputs.identical(orig.train.inputs));
    EXPECT_TRUE(back.train.targets.identical(orig.train.targets));
    EXPECT_TRUE(back.test.inputs.identical(orig.test.inputs));
    EXPECT_TRUE(back.test.targets.identical(orig.test.targets));
  }
}

TEST(Evolve, ZeroGenerationsShowOnlyTheSeed) {
  Scratch tmp;
  const auto out = lab::run_command(
      "evolve", json{{"out_dir", tmp.str()}, {"generations", 0}, {"suite", "smoke:1"}, {"seeds", 1}, {"steps", 5}});
  EXPECT_EQ(out.record["results"]["candidates"], 1);
  EXPECT_EQ(out.record["results"]["best"]["expr"], "(relu x)");
  const std::string best = slurp(fs::path(out.run_dir) / "best_expr.txt");
  EXPECT_EQ(print(parse(best)), "(relu x)");
  EXPECT_EQ(lines(slurp(fs::path(out.run_dir) / "candidates.csv")).size(), 2u);
}

TEST(Evolve, BestExprParsesBack) {
  Scratch tmp;
  const auto out = lab::run_command("evolve", json{{"out_dir", tmp.str()}, {"generations", 2}, {"proposals", 3},
                                                  {"suite", "smoke:1"}, {"seeds", 1}, {"steps", 5}});
  const std::string best = slurp(fs::path(out.run_dir) / "best_expr.txt");
  EXPECT_EQ(print(parse(best)), out.record["results"]["best"]["expr"].get<std::string>());
  EXPECT_EQ(lines(slurp(fs::path(out.run_dir) / "generations.csv")).size(), 3u);
}

TEST(Evolve, ExternalNeedsACommand) {
  Scratch tmp;
  EXPECT_THROW(lab::run_command("evolve", json{{"out_dir", tmp.str()}, {"mutator", "external"}, {"suite", "smoke:1"}}),
               Error);
}

class GoldenReplay : public ::testing::TestWithParam<std::string> {};

TEST_P(GoldenReplay, ReproducesEveryArtifact) {
  Scratch tmp;
  const std::string dir = kGolden + GetParam();
  const json rec = json::parse(slurp(fs::path(dir) / "run.json"));
  std::map<std::string, std::string> before;
  for (const auto& e : fs::directory_iterator(dir)) before[e.path().string()] = slurp(e.path());

  const auto out = lab::run_command("replay", json{{"record", dir + "/run.json"}, {"out_dir", tmp.str()}});
  EXPECT_NE(out.text.find("artifacts identical"), std::string::npos);
  for (const auto& [name, hash] : rec["artifacts"].items()) {
    EXPECT_EQ(slurp(fs::path(out.run_dir) / name), slurp(fs::path(dir) / name)) << name;
  }
  // The golden directory itself is left alone.
  for (const auto& [path, bytes] : before) EXPECT_EQ(slurp(path), bytes) << path;
}

INSTANTIATE_TEST_SUITE_P(Lab, GoldenReplay,
                         ::testing::Values("eval", "sweep", "histogram", "export-dataset", "evolve"),
                         [](const auto& info) {
                           std::string n = info.param;
                           for (char& c : n) if (c == '-') c = '_';
                           return n;
                         });

TEST(Replay, TamperedArtifactIsAHashMismatch) {
  Scratch tmp;
  fs::copy(kGolden + "eval", tmp / "rec");
  {
    std::string csv = slurp(tmp / "rec" / "results.csv");
    csv[csv.size() - 3] = csv[csv.size() - 3] == '1' ? '2' : '1';
    std::ofstream(tmp / "rec" / "results.csv", std::ios::binary) << csv;
  }
  try {
    lab::run_command("replay", json{{"record", (tmp / "rec" / "run.json").string()}, {"out_dir", (tmp / "out").string()}});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::HashMismatch);
    EXPECT_NE(std::string(e.what()).find("results.csv"), std::string::npos);
  }
}

TEST(Replay, TamperedConfigIsAHashMismatch) {
  Scratch tmp;
  fs::create_directories(tmp / "rec");
  json rec = json::parse(slurp(kGolden + "eval/run.json"));
  rec["config"]["seed"] = 8;
  std::ofstream(tmp / "rec" / "run.json") << rec.dump(2);
  EXPECT_EQ(kind_of([&] {
              lab::run_command("replay", json{{"record", (tmp / "rec" / "run.json").string()},
                                              {"out_dir", (tmp / "out").string()}});
            }),
            ErrorKind::HashMismatch);
}

TEST(Replay, SchemaAndInputErrors) {
  Scratch tmp;
  json rec = json::parse(slurp(kGolden + "eval/run.json"));
  rec["schema_version"] = kRunRecordSchema + 1;
  std::ofstream(tmp / "future.json") << rec.dump();
  std::ofstream(tmp / "junk.json") << "{not json";
  auto replay = [&](const std::string& p) {
    return kind_of([&] { lab::run_command("replay", json{{"record", p}, {"out_dir", (tmp / "out").string()}}); });
  };
  EXPECT_EQ(replay((tmp / "future.json").string()), ErrorKind::SchemaVersionMismatch);
  EXPECT_EQ(replay((tmp / "junk.json").string()), ErrorKind::Io);
  EXPECT_EQ(replay((tmp / "missing.json").string()), ErrorKind::Io);
  EXPECT_EQ(replay(""), ErrorKind::InvalidArgument);
}

TEST(ZooList, NeedsNoDirectory) {
  const auto out = lab::run_command("zoo-list", nullptr);
  EXPECT_TRUE(out.run_dir.empty());
  EXPECT_EQ(out.text, zoo_list_csv());
}
