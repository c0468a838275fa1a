#include "grideta/serialize.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"

using namespace grideta;
using namespace grideta::io;

TEST_CASE("container round trip with checksum") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "grideta_container_test.bin").string();

  Container c;
  c.meta["kind"] = "test";
  c.meta["n"] = 3;
  c.put_f64("values", {1.5, -2.25, 1e-12});
  c.put_i64("keys", {7, -9, 1ll << 60});
  c.save(path);

  Container back = Container::load(path);
  CHECK(back.meta.at("kind") == "test");
  CHECK(back.get_f64("values") == std::vector<double>{1.5, -2.25, 1e-12});
  CHECK(back.get_i64("keys") == std::vector<std::int64_t>{7, -9, 1ll << 60});
  CHECK_THROWS_AS(back.get_f64("missing"), Error);
  CHECK_THROWS_AS(back.get_i64("values"), Error);

  // corrupt one payload byte: checksum must reject it
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f);
    std::fseek(f, -1, SEEK_END);
    std::fputc(0x5a, f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(Container::load(path), Error);
  std::filesystem::remove(path);
}

TEST_CASE("identical content saves to identical bytes") {
  namespace fs = std::filesystem;
  const std::string p1 = (fs::temp_directory_path() / "grideta_c1.bin").string();
  const std::string p2 = (fs::temp_directory_path() / "grideta_c2.bin").string();
  auto build = [] {
    Container c;
    c.meta["alpha"] = 1;
    c.meta["beta"] = "x";
    c.put_f64("a", {0.1, 0.2});
    c.put_i64("b", {42});
    return c;
  };
  build().save(p1);
  build().save(p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  fs::remove(p1);
  fs::remove(p2);
}
