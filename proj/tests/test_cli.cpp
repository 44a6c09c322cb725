#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

// Runs labcli with the given arguments; stderr is discarded.
Result labcli(const std::string& args) {
  const std::string cmd = std::string(ACTLAB_LABCLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

}  // namespace

TEST(Cli, ZooList) {
  const Result r = labcli("zoo list");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out.rfind("name,kind,trainability,flop_cost,source_dataset\n", 0), 0u);
  EXPECT_NE(r.out.find("\nspf,native-tensor,forward-only,"), std::string::npos);
}

TEST(Cli, GlobalFlagsAndReplay) {
  const fs::path dir = fs::temp_directory_path() / "actlab-cli";
  fs::remove_all(dir);
  const Result r = labcli("eval relu '(mul 2 x)' --suite poly1d:1 --seeds 1 --steps 5 --optimizer sgd "
                          "--seed 3 --budget 16 --out-dir " + dir.string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("(mul 2 x)"), std::string::npos);
  std::string rec;
  for (const auto& d : fs::directory_iterator(dir)) rec = (d.path() / "run.json").string();
  ASSERT_TRUE(fs::exists(rec));
  const Result again = labcli("replay " + rec + " --out-dir " + dir.string());
  EXPECT_EQ(again.status, 0);
  EXPECT_NE(again.out.find("2 artifacts identical"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, ErrorsExitNonZero) {
  EXPECT_NE(labcli("dance").status, 0);
  EXPECT_NE(labcli("eval --bogus-flag").status, 0);
  EXPECT_EQ(labcli("eval '(add x' --suite poly1d:1 --seeds 1 --steps 5 --out-dir /tmp/actlab-cli-bad").status, 0)
      << "a bad activation is a failed row, not a failed run";
  fs::remove_all("/tmp/actlab-cli-bad");
  EXPECT_EQ(labcli("replay /nonexistent/run.json").status, 1);
  EXPECT_EQ(labcli("evolve --proposer-cmd /nonexistent/proposer --generations 1 --proposals 1 "
                   "--suite smoke:1 --seeds 1 --steps 5 --proposer-timeout-ms 1000 --out-dir /tmp/actlab-cli-bad")
                .status,
            0)
      << "a dead proposer gives failed candidates";
  fs::remove_all("/tmp/actlab-cli-bad");
}
