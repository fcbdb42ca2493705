#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "generators.hpp"
#include "storewatch/demographics.hpp"
#include "storewatch/error.hpp"
#include "storewatch/expression.hpp"

using namespace storewatch;
using namespace storewatch::weights;

namespace {

std::vector<std::uint8_t> from_hex(const std::string& hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < hex.size(); i += 2) out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  return out;
}

// Built with Python struct.pack, independent of the writer.
const std::string kEmptyHex =
    "4e4e574101000000010000000e000000666f726d61745f76657273696f6e010000003100000000";
const std::string kOneTensorHex =
    "4e4e574101000000010000000e000000666f726d61745f76657273696f6e0100000031010000000100000077000202000000020000"
    "000000803f000000400000404000008040";

}  // namespace

TEST_CASE("empty archive bytes") {
  const auto bytes = write_archive(TensorArchive{});
  CHECK(bytes == from_hex(kEmptyHex));
  CHECK(bytes.size() == 16 + 23);
  CHECK(read_archive(bytes) == TensorArchive{});
}

TEST_CASE("one 2x2 tensor") {
  TensorArchive a;
  a.entries.emplace("w", Tensor({2, 2}, {1, 2, 3, 4}));
  CHECK(write_archive(a) == from_hex(kOneTensorHex));
  const auto back = read_archive(from_hex(kOneTensorHex));
  CHECK(back.at("w").dims() == Shape{2, 2});
  CHECK(back.at("w").values() == std::vector<float>{1, 2, 3, 4});
}

TEST_CASE("writing is deterministic and insertion-order independent") {
  TensorArchive a, b;
  a.entries.emplace("zeta", Tensor({1}, std::vector<float>{1}));
  a.entries.emplace("alpha", Tensor({2}, {2, 3}));
  b.entries.emplace("alpha", Tensor({2}, {2, 3}));
  b.entries.emplace("zeta", Tensor({1}, std::vector<float>{1}));
  CHECK(write_archive(a) == write_archive(a));
  CHECK(write_archive(a) == write_archive(b));
}

TEST_CASE("random archives round-trip") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 300; ++i) {
    const auto a = gen::random_archive(rng);
    const auto bytes = write_archive(a);
    const auto back = read_archive(bytes);
    CHECK(back == a);
    CHECK(write_archive(back) == bytes);
  }
}

TEST_CASE("reader errors") {
  const auto good = from_hex(kOneTensorHex);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(read_archive(bad_magic), FormatError);

  auto bad_version = good;
  bad_version[4] = 2;
  CHECK_THROWS_AS(read_archive(bad_version), VersionError);

  for (std::size_t cut : {3u, 10u, 20u, 40u, 50u, 60u, 69u}) {
    CAPTURE(cut);
    const std::vector<std::uint8_t> shorter(good.begin(), good.begin() + static_cast<long>(cut));
    try {
      read_archive(shorter);
      FAIL("expected TruncationError");
    } catch (const TruncationError& e) {
      CHECK(e.offset() <= cut);
    }
  }

  auto trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(read_archive(trailing), FormatError);

  auto bad_dtype = good;
  bad_dtype[44] = 1;
  CHECK_THROWS_WITH_AS(read_archive(bad_dtype), doctest::Contains("dtype"), FormatError);

  auto bad_rank = good;
  bad_rank[45] = 5;
  CHECK_THROWS_WITH_AS(read_archive(bad_rank), doctest::Contains("rank"), FormatError);

  // Declared payload longer than the file: never read past the end.
  auto long_dims = good;
  long_dims[46] = 3;
  CHECK_THROWS_AS(read_archive(long_dims), TruncationError);
}

TEST_CASE("duplicate names and missing format_version are rejected") {
  // Two entries both named "w".
  auto dup = from_hex(kOneTensorHex);
  // Entry count sits at byte 35 and the single entry starts at 39.
  const std::vector<std::uint8_t> entry(dup.begin() + 39, dup.end());
  dup[35] = 2;
  dup.insert(dup.end(), entry.begin(), entry.end());
  CHECK_THROWS_AS(read_archive(dup), DuplicateError);

  TensorArchive no_version;
  no_version.metadata.clear();
  CHECK_THROWS_AS(read_archive(write_archive(no_version)), FormatError);
}

TEST_CASE("writer rejects bad names") {
  TensorArchive a;
  a.entries.emplace(std::string(kMaxNameBytes + 1, 'n'), Tensor({1}, std::vector<float>{0}));
  CHECK_THROWS_AS(write_archive(a), FormatError);
  TensorArchive ok;
  ok.entries.emplace(std::string(kMaxNameBytes, 'n'), Tensor({1}, std::vector<float>{0}));
  CHECK(read_archive(write_archive(ok)) == ok);
  TensorArchive empty_name;
  empty_name.entries.emplace("", Tensor({1}, std::vector<float>{0}));
  CHECK_THROWS_AS(write_archive(empty_name), FormatError);
}

TEST_CASE("file save and load") {
  const auto dir = std::filesystem::temp_directory_path() / "storewatch_weights_test";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(3);
  const auto a = gen::random_archive(rng);
  save_archive(a, dir / "a.nnwa");
  CHECK(load_archive(dir / "a.nnwa") == a);
  CHECK_THROWS_AS(load_archive(dir / "missing.nnwa"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("validate_manifest findings") {
  const Manifest m{{"a", {2, 3}}, {"b", {4}}};
  TensorArchive exact;
  exact.entries.emplace("a", Tensor({2, 3}));
  exact.entries.emplace("b", Tensor({4}));
  CHECK(validate_manifest(exact, m).ok());

  auto missing = exact;
  missing.entries.erase("b");
  const auto r1 = validate_manifest(missing, m);
  CHECK(r1.missing == std::vector<std::string>{"b"});
  CHECK(r1.extra.empty());

  auto transposed = exact;
  transposed.entries.insert_or_assign("a", Tensor({3, 2}));
  transposed.entries.emplace("c", Tensor({1}));
  const auto r2 = validate_manifest(transposed, m);
  REQUIRE(r2.mismatched.size() == 1);
  CHECK(r2.mismatched[0].name == "a");
  CHECK(r2.mismatched[0].expected == Shape{2, 3});
  CHECK(r2.mismatched[0].actual == Shape{3, 2});
  CHECK(r2.extra == std::vector<std::string>{"c"});
  CHECK(r2.describe().find("[2x3]") != std::string::npos);
  CHECK(r2.describe().find("[3x2]") != std::string::npos);
}

TEST_CASE("random_archive satisfies both network manifests") {
  for (const auto& m : {demographics::wrn_manifest(), expression::xception_manifest()}) {
    const auto a = weights::random_archive(m, 1);
    CHECK(validate_manifest(a, m).ok());
    CHECK(weights::random_archive(m, 1) == a);
    for (const auto& [name, t] : a.entries) {
      if (name.ends_with("variance")) {
        for (auto v : t.values()) CHECK(v > 0.f);
      }
    }
  }
}
