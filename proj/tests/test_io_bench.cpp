#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "helpers.hpp"
#include "pdd/bench.hpp"
#include "pdd/io.hpp"

using namespace testing;
using namespace pdd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pdd_unit_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

bench::BenchRow multicast_row(std::uint64_t seed) {
  const auto inst = multicast::random_instance(4, 1, 1, 10.0, seed);
  const auto r = multicast::solve(inst, multicast::default_config(inst));
  bench::BenchRow row;
  row.objective = r.min_rate_bits;
  row.feasibility_gap = r.feasibility_gap;
  row.iterations = r.iterations;
  row.converged = r.converged;
  row.metric = r.kkt_residual;
  return row;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("complex matrix JSON round trip") {
    std::mt19937_64 rng(1);
    const ComplexMatrix m = cgauss(3, 2, rng);
    const auto j = io::complex_matrix_to_json(m);
    CHECK(j.size() == 3);
    CHECK(j[0][1].size() == 2);
    CHECK(io::complex_matrix_from_json(j) == m);
    const ComplexVector v = cgauss(4, 1, rng);
    CHECK(io::complex_vector_from_json(io::complex_vector_to_json(v)) == v);
  }

  TEST_CASE("multicast instance round trip") {
    const auto inst = multicast::random_instance(8, 4, 2, 10.0, 3);
    const auto back = io::multicast_from_json(io::to_json(inst));
    CHECK(back.num_users == 8);
    CHECK(back.groups == inst.groups);
    CHECK(back.p_bs == inst.p_bs);
    CHECK(back.sigma2 == inst.sigma2);
    for (int k = 0; k < inst.num_users; ++k) CHECK(back.channels[k] == inst.channels[k]);
  }

  TEST_CASE("relay instance round trip") {
    const auto inst = relay::random_instance(4, 4, 4, 10.0, 4);
    const auto back = io::relay_from_json(io::to_json(inst));
    CHECK(back.h == inst.h);
    CHECK(back.g == inst.g);
    CHECK(back.p_s == 10.0);
    CHECK(back.p_r == 10.0);
    CHECK(back.alpha == inst.alpha);
  }

  TEST_CASE("malformed instances are rejected") {
    CHECK_THROWS_AS(io::multicast_from_json(io::json::object()), InvalidInput);
    auto j = io::to_json(relay::random_instance(1, 1, 1, 10.0, 1));
    j["sigma_R2"] = 0.0;
    CHECK_THROWS_AS(io::relay_from_json(j), InvalidInput);
  }

  TEST_CASE("matrix files round trip exactly") {
    std::mt19937_64 rng(5);
    const RealMatrix m = gauss(4, 7, rng);
    io::write_matrix_csv(scratch("m.csv"), m);
    io::write_matrix_binary(scratch("m.bin"), m);
    CHECK(io::read_matrix(scratch("m.csv")) == m);
    CHECK(io::read_matrix(scratch("m.bin")) == m);
    std::ifstream in(scratch("m.bin"), std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "VMIN");
  }

  TEST_CASE("ground truth round trip") {
    const auto [inst, gt] = volmin::gen_data(5, 3, 20, 0.8, std::numeric_limits<double>::infinity(), 6);
    const auto back = io::ground_truth_from_json(io::to_json(gt));
    CHECK(back.x == gt.x);
    CHECK(back.s == gt.s);
    CHECK(std::isinf(back.snr_db));
  }
}

TEST_SUITE("bench") {
  TEST_CASE("percentiles") {
    CHECK(bench::percentile({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK(bench::percentile({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
    CHECK(std::isnan(bench::percentile({}, 0.5)));
  }

  TEST_CASE("one row per seed plus aggregates") {
    std::vector<std::uint64_t> seeds(10);
    std::iota(seeds.begin(), seeds.end(), 1);
    const auto s = bench::run(seeds, multicast_row, 4, "kkt_residual");
    REQUIRE(s.rows.size() == 10);
    for (std::size_t i = 0; i < seeds.size(); ++i) CHECK(s.rows[i].seed == seeds[i]);
    CHECK(s.failures == 0);
    CHECK(s.metric.count == 10);

    const fs::path path = scratch("bench.csv");
    bench::write_csv(path, s);
    const auto rows = read_csv(path);
    REQUIRE(rows.size() >= 12);
    CHECK(rows[0][7] == "kkt_residual");
    CHECK(rows[11].empty());
    std::vector<double> metric;
    for (int i = 1; i <= 10; ++i) metric.push_back(std::stod(rows[i][7]));
    std::sort(metric.begin(), metric.end());
    const double median = 0.5 * (metric[4] + metric[5]);
    bool found = false;
    for (const auto& r : rows)
      if (!r.empty() && r[0] == "median") {
        found = true;
        CHECK(std::stod(r[5]) == doctest::Approx(median).epsilon(1e-15));
      }
    CHECK(found);
  }

  TEST_CASE("reordering the seed list leaves rows unchanged") {
    const auto a = bench::run({1, 2, 3, 4}, multicast_row, 2, "kkt_residual");
    const auto b = bench::run({4, 2, 1, 3}, multicast_row, 3, "kkt_residual");
    for (const auto& ra : a.rows) {
      const auto it = std::find_if(b.rows.begin(), b.rows.end(), [&](const auto& r) { return r.seed == ra.seed; });
      REQUIRE(it != b.rows.end());
      CHECK(it->objective == ra.objective);
      CHECK(it->feasibility_gap == ra.feasibility_gap);
      CHECK(it->iterations == ra.iterations);
      CHECK(it->metric == ra.metric);
    }
  }

  TEST_CASE("seed failures are recorded without aborting the batch") {
    const auto s = bench::run({1, 2, 3},
                              [](std::uint64_t seed) {
                                if (seed == 2) throw std::runtime_error("boom");
                                bench::BenchRow r;
                                r.metric = static_cast<double>(seed);
                                return r;
                              },
                              2, "m");
    CHECK(s.failures == 1);
    CHECK(!s.rows[1].ok);
    CHECK(s.rows[1].error == "boom");
    CHECK(s.metric.count == 2);
    CHECK(s.metric.median == 2.0);
  }
}
