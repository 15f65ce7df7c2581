#include "btd/datagen.hpp"
#include "btd/io.hpp"
#include "btd/report_json.hpp"

#include "scratch_dir.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

using namespace btd;
namespace fs = std::filesystem;

namespace {

Tensor3 sample_tensor() {
  Tensor3 t({3, 2, 2});
  for (Index n = 0; n < t.size(); ++n)
    t.data()[static_cast<std::size_t>(n)] = 0.5 * static_cast<double>(n) - 1.25;
  return t;
}

std::uint32_t u32_at(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

void put_f64(std::vector<std::uint8_t>& b, std::size_t at, double v) {
  std::memcpy(b.data() + at, &v, sizeof v);
}

template <class F>
std::uint64_t offset_of_failure(F&& f) {
  try {
    f();
  } catch (const io::FormatError& e) {
    return e.offset();
  }
  FAIL("expected a FormatError");
  return 0;
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("BT3D header layout") {
  const auto b = io::encode_bt3d(sample_tensor());
  REQUIRE(b.size() == 20 + 12 * 8);
  CHECK(std::string(b.begin(), b.begin() + 4) == "BT3D");
  CHECK(u32_at(b, 4) == 1);
  CHECK(u32_at(b, 8) == 3);
  CHECK(u32_at(b, 12) == 2);
  CHECK(u32_at(b, 16) == 2);
  double first;
  std::memcpy(&first, b.data() + 20, 8);
  CHECK(first == -1.25);
  double second;
  std::memcpy(&second, b.data() + 28, 8);
  CHECK(second == sample_tensor()(1, 0, 0));
}

TEST_CASE("BT3D round trip is exact") {
  Rng rng(3);
  const Tensor3 x = compose(gen_factors({5, 4, 3}, BlockPartition({2, 1}), rng));
  CHECK(io::decode_bt3d(io::encode_bt3d(x)) == x);
}

TEST_CASE("BMAT layout and round trip") {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const auto b = io::encode_bmat(m);
  REQUIRE(b.size() == 16 + 6 * 8);
  CHECK(std::string(b.begin(), b.begin() + 4) == "BMAT");
  CHECK(u32_at(b, 8) == 2);
  CHECK(u32_at(b, 12) == 3);
  double v;
  std::memcpy(&v, b.data() + 24, 8);
  CHECK(v == 4.0);  // column-major
  CHECK(io::decode_bmat(b) == m);
  const Matrix empty(0, 4);
  CHECK(io::decode_bmat(io::encode_bmat(empty)).cols() == 4);
}

TEST_CASE("BT3D rejects malformed input with the byte offset") {
  const auto good = io::encode_bt3d(sample_tensor());

  auto bad_magic = good;
  bad_magic[2] = 'X';
  CHECK(offset_of_failure([&] { io::decode_bt3d(bad_magic); }) == 0);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK(offset_of_failure([&] { io::decode_bt3d(bad_version); }) == 4);

  auto zero_dim = good;
  zero_dim[12] = 0;
  CHECK(offset_of_failure([&] { io::decode_bt3d(zero_dim); }) == 8);

  const std::vector<std::uint8_t> short_header(good.begin(), good.begin() + 10);
  CHECK(offset_of_failure([&] { io::decode_bt3d(short_header); }) == 8);

  const std::vector<std::uint8_t> short_payload(good.begin(), good.end() - 3);
  CHECK(offset_of_failure([&] { io::decode_bt3d(short_payload); }) == 20);

  auto trailing = good;
  trailing.push_back(0);
  CHECK(offset_of_failure([&] { io::decode_bt3d(trailing); }) == good.size());

  auto nan_entry = good;
  put_f64(nan_entry, 20 + 5 * 8, std::numeric_limits<double>::quiet_NaN());
  CHECK(offset_of_failure([&] { io::decode_bt3d(nan_entry); }) == 60);

  auto inf_entry = good;
  put_f64(inf_entry, 20, std::numeric_limits<double>::infinity());
  CHECK(offset_of_failure([&] { io::decode_bt3d(inf_entry); }) == 20);

  CHECK(offset_of_failure([&] { io::decode_bt3d({}); }) == 0);
}

TEST_CASE("BMAT rejects malformed input") {
  Matrix m = Matrix::Ones(2, 2);
  const auto good = io::encode_bmat(m);
  auto bad = good;
  bad[0] = 'X';
  CHECK_THROWS_AS(io::decode_bmat(bad), io::FormatError);
  CHECK_THROWS_AS(io::decode_bmat(io::encode_bt3d(sample_tensor())), io::FormatError);
  const std::vector<std::uint8_t> cut(good.begin(), good.end() - 1);
  CHECK(offset_of_failure([&] { io::decode_bmat(cut); }) == 16);
}

TEST_CASE("format errors mention the offset") {
  try {
    io::decode_bt3d({'B', 'T', '3', 'D', 1, 0});
    FAIL("expected a FormatError");
  } catch (const io::FormatError& e) {
    CHECK(std::string(e.what()).find("byte offset 4") != std::string::npos);
  }
}

TEST_CASE("file helpers") {
  const test::ScratchDir dir("io");
  const fs::path p = dir.path() / "x.bt3d";
  io::write_bt3d(p, sample_tensor());
  CHECK(io::read_bt3d(p) == sample_tensor());
  CHECK_FALSE(fs::exists(dir.path() / "x.bt3d.tmp"));
  io::write_bt3d(p, Tensor3({1, 1, 1}));
  CHECK(io::read_bt3d(p).size() == 1);

  const Matrix m = Matrix::Identity(3, 2);
  io::write_bmat(dir.path() / "m.bmat", m);
  CHECK(io::read_bmat(dir.path() / "m.bmat") == m);

  CHECK_THROWS_AS(io::read_file(dir.path() / "missing"), std::runtime_error);
  CHECK_THROWS_AS(io::read_bt3d(dir.path() / "missing"), std::runtime_error);
  io::write_text_atomic(dir.path() / "t.txt", "abc");
  CHECK(io::read_file(dir.path() / "t.txt") == std::vector<std::uint8_t>{'a', 'b', 'c'});
}

TEST_CASE("fit config from JSON") {
  const FitConfig cfg = fit_config_from_json(
      json::parse(R"({"R_ini": 6, "L_ini": 4, "max_iters": 50, "seed": 9,
                      "priors": {"kappa": 2.5}})"));
  CHECK(cfg.R_ini == 6);
  CHECK(cfg.L_ini == 4);
  CHECK(cfg.max_iters == 50);
  CHECK(cfg.seed == 9);
  CHECK(cfg.priors.kappa == 2.5);
  CHECK(cfg.rel_tol == FitConfig{}.rel_tol);

  CHECK_THROWS_AS(fit_config_from_json(json::parse(R"({"Rini": 3})")), ConfigError);
  CHECK_THROWS_AS(fit_config_from_json(json::parse(R"({"priors": {"eta": 1}})")), ConfigError);
  CHECK_THROWS_AS(fit_config_from_json(json::parse(R"({"R_ini": "six"})")), ConfigError);
  CHECK_THROWS_AS(fit_config_from_json(json::parse(R"({"R_ini": 0})")), ConfigError);
  CHECK_THROWS_AS(fit_config_from_json(json::parse("[1]")), ConfigError);

  FitConfig custom;
  custom.R_ini = 3;
  custom.priors.theta = 0.25;
  custom.restarts = 4;
  const FitConfig back = fit_config_from_json(to_json(custom));
  CHECK(back.R_ini == 3);
  CHECK(back.priors.theta == 0.25);
  CHECK(back.restarts == 4);
}

TEST_CASE("SNR values in JSON") {
  CHECK(snr_from_json(json(12.5)) == 12.5);
  CHECK(std::isinf(snr_from_json(json("inf"))));
  CHECK(std::isinf(snr_from_json(json("+inf"))));
  CHECK_THROWS_AS(snr_from_json(json("loud")), ConfigError);
  CHECK(snr_to_json(kNoiseless) == json("inf"));
  CHECK(snr_to_json(5.0) == json(5.0));
}

TEST_CASE("scenario config from JSON") {
  const ScenarioConfig c = scenario_config_from_json(json::parse(
      R"({"scenario": "A", "snr_db": [5, 10, "inf"], "runs": 3, "seed": 4,
          "model": "model2", "selection": "error", "fit": {"R_ini": 7}})"));
  REQUIRE(c.specs.size() == 3);
  CHECK(c.specs[0].snr_db == 5.0);
  CHECK(std::isinf(c.specs[2].snr_db));
  CHECK(c.specs[1].runs == 3);
  CHECK(c.specs[1].seed == 4);
  CHECK(c.specs[0].dims == Dims{30, 30, 30});
  CHECK(c.options.model == ModelTag::model2);
  CHECK(c.options.selection == Selection::error);
  CHECK(c.options.fit.R_ini == 7);

  const ScenarioConfig custom = scenario_config_from_json(
      json::parse(R"({"dims": [4, 5, 3], "L": [2, 1]})"));
  REQUIRE(custom.specs.size() == 1);
  CHECK(custom.specs[0].dims == Dims{4, 5, 3});
  CHECK(custom.specs[0].truth == BlockPartition({2, 1}));

  CHECK_THROWS_AS(scenario_config_from_json(json::parse(R"({"scenario": "A", "runs": 0})")), ConfigError);
  CHECK_THROWS_AS(scenario_config_from_json(json::parse(R"({"scenario": "Z"})")), ConfigError);
  CHECK_THROWS_AS(scenario_config_from_json(json::parse(R"({"scenario": "custom"})")), ConfigError);
  CHECK_THROWS_AS(scenario_config_from_json(json::parse(R"({"scenario": "A", "color": 1})")), ConfigError);
  CHECK_THROWS_AS(scenario_config_from_json(json::parse(R"({"scenario": "A", "snr_db": []})")), ConfigError);
  CHECK_THROWS_AS(scenario_config_from_json(json::parse(R"({"scenario": "A", "jobs": 0})")), ConfigError);
  CHECK_THROWS_AS(scenario_config_from_json(json::parse(R"({"scenario": "A", "model": "pca"})")), ConfigError);
}

TEST_CASE("report round trip through JSON and BMAT files") {
  const test::ScratchDir dir("report");
  Rng rng(2);
  FitReport rep;
  rep.model = ModelTag::bbtd;
  rep.factors = gen_factors({4, 3, 2}, BlockPartition({2, 1}), rng);
  rep.R_hat = 2;
  rep.L_hat = {2, 1};
  rep.iters_run = 3;
  rep.recon_error_trace = {0.5, 0.25, 0.125};
  rep.beta_trace = {1.0, 2.0, 4.0};
  rep.converged = true;
  rep.seed = 77;
  rep.warnings = {"w"};
  const fs::path path = dir.path() / "fit.json";
  write_report(path, rep);

  const json j = parse_json_file(path);
  CHECK(j["model"] == "bbtd");
  CHECK(j["R_hat"] == 2);
  CHECK(j["L_hat"] == json::array({2, 1}));
  CHECK(j["converged"] == true);
  CHECK(j["seed"] == 77);
  CHECK(j["recon_error_trace"].size() == 3);
  CHECK(j["factors"]["A"] == "fit_A.bmat");

  const BtdFactors f = read_report_factors(path);
  CHECK(f.A == rep.factors.A);
  CHECK(f.B == rep.factors.B);
  CHECK(f.C == rep.factors.C);
  CHECK(f.part == rep.factors.part);
}

TEST_CASE("invalid JSON reports the byte offset") {
  const test::ScratchDir dir("json");
  io::write_text_atomic(dir.path() / "bad.json", "{\"a\": 1,, }");
  try {
    parse_json_file(dir.path() / "bad.json");
    FAIL("expected a FormatError");
  } catch (const io::FormatError& e) {
    CHECK(e.offset() > 0);
    CHECK(e.offset() <= 10);
  }
}

TEST_SUITE_END();
