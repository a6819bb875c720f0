#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "fmcpe/dataset.hpp"
#include "fmcpe/random.hpp"
#include "fmcpe/tasks.hpp"

using fmcpe::PairDataset;
using fmcpe::RandomSource;
using fmcpe::Vec;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/fmcpe_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("three well-formed rows parse into a dataset of size 3") {
  TempFile f("ok.csv");
  write_file(f.path,
             "theta_0,theta_1,obs_0\n"
             "1.0,2.0,3.0\n"
             "4.0,5.0,6.0\n"
             "7.5,-8.25,9.125\n");
  PairDataset ds = fmcpe::ingest_csv(f.path);
  CHECK(ds.size() == 3);
  CHECK(ds.theta_dim() == 2);
  CHECK(ds.obs_dim() == 1);
  CHECK(ds.theta[2] == Vec{7.5, -8.25});
  CHECK(ds.obs[2] == Vec{9.125});
  CHECK(ds.provenance == fmcpe::Provenance::kIngested);
}

TEST_CASE("non-numeric token reports its line number") {
  TempFile f("bad_token.csv");
  write_file(f.path,
             "theta_0,obs_0\n"
             "1.0,2.0\n"
             "oops,3.0\n");
  try {
    (void)fmcpe::ingest_csv(f.path);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    CHECK(std::string(e.what()).find("oops") != std::string::npos);
  }
}

TEST_CASE("wrong field count reports its line number") {
  TempFile f("bad_count.csv");
  write_file(f.path,
             "theta_0,obs_0\n"
             "1.0,2.0,3.0\n");
  try {
    (void)fmcpe::ingest_csv(f.path);
    FAIL("expected a shape error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("malformed header is rejected") {
  TempFile f("bad_header.csv");
  write_file(f.path, "a,b\n1,2\n");
  CHECK_THROWS_AS((void)fmcpe::ingest_csv(f.path), std::runtime_error);
  TempFile g("obs_only.csv");
  write_file(g.path, "obs_0,obs_1\n1,2\n");
  CHECK_THROWS_AS((void)fmcpe::ingest_csv(g.path), std::runtime_error);
}

TEST_CASE("missing file is rejected") {
  CHECK_THROWS_AS((void)fmcpe::ingest_csv("/tmp/fmcpe_does_not_exist.csv"), std::runtime_error);
}

TEST_CASE("export then ingest reproduces a generated dataset exactly") {
  RandomSource rng(430);
  fmcpe::GaussianTask task = fmcpe::GaussianTask::random_draw(rng);
  auto bundle = fmcpe::build_datasets(task, RandomSource(431), 25, 0, 0);
  TempFile f("roundtrip.csv");
  fmcpe::export_csv(bundle.sim, f.path);
  PairDataset back = fmcpe::ingest_csv(f.path);
  REQUIRE(back.size() == bundle.sim.size());
  // 17 significant digits round-trip IEEE doubles bit-exactly.
  CHECK(back.theta == bundle.sim.theta);
  CHECK(back.obs == bundle.sim.obs);
}

TEST_CASE("validate rejects ragged and non-finite rows") {
  PairDataset ds;
  ds.push(Vec{1.0, 2.0}, Vec{3.0});
  ds.push(Vec{1.0}, Vec{4.0});
  CHECK_THROWS_AS(ds.validate(), std::runtime_error);
  PairDataset nan_ds;
  nan_ds.push(Vec{std::nan("")}, Vec{1.0});
  CHECK_THROWS_AS(nan_ds.validate(), std::runtime_error);
}

TEST_CASE("take picks rows by index and checks bounds") {
  PairDataset ds;
  for (int i = 0; i < 5; ++i) ds.push(Vec{static_cast<double>(i)}, Vec{static_cast<double>(10 * i)});
  PairDataset sub = ds.take({4, 0, 2});
  CHECK(sub.size() == 3);
  CHECK(sub.theta[0] == Vec{4.0});
  CHECK(sub.theta[1] == Vec{0.0});
  CHECK(sub.obs[2] == Vec{20.0});
  CHECK_THROWS_AS((void)ds.take({5}), std::out_of_range);
}

TEST_CASE("carriage returns and blank lines are tolerated") {
  TempFile f("crlf.csv");
  write_file(f.path, "theta_0,obs_0\r\n1.0,2.0\r\n\r\n3.0,4.0\r\n");
  PairDataset ds = fmcpe::ingest_csv(f.path);
  CHECK(ds.size() == 2);
  CHECK(ds.theta[1] == Vec{3.0});
}
