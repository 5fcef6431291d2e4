#include "trendlens/error.hpp"
#include "trendlens/util.hpp"

#include <doctest.h>

#include <filesystem>

using namespace trendlens;

TEST_CASE("fnv1a64 matches published test vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("derive_seed separates components and is stable") {
    static_assert(derive_seed(1, "forest") == derive_seed(1, "forest"));
    CHECK(derive_seed(1, "forest") != derive_seed(1, "split"));
    CHECK(derive_seed(1, "forest") != derive_seed(2, "forest"));
}

TEST_CASE("sha256 and base64 known answers") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string s = "foobar";
    auto bytes = [](std::string_view v) {
        return std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(v.data()), v.size());
    };
    CHECK(base64_encode(bytes(s)) == "Zm9vYmFy");
    CHECK(base64_encode(bytes("fo")) == "Zm8=");
    CHECK(base64_encode(bytes("")).empty());
}

TEST_CASE("atomic write round-trips and leaves no temp file") {
    const auto dir = std::filesystem::temp_directory_path() / "trendlens_util_test";
    std::filesystem::remove_all(dir);
    const auto path = dir / "nested" / "file.txt";
    write_file_atomic(path, "first");
    write_file_atomic(path, std::string("sec\0ond", 7));
    CHECK(read_file(path) == std::string("sec\0ond", 7));
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    CHECK(sha256_file(path) == sha256_hex(std::string("sec\0ond", 7)));
    std::filesystem::remove_all(dir);
}

TEST_CASE("read_file on a missing path is a missing artifact") {
    CHECK_THROWS_AS(read_file("/nonexistent/trendlens/x"), MissingArtifactError);
}

TEST_CASE("csv_field quotes only when needed") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_field("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("format_g") {
    CHECK(format_g(0.123456789) == "0.123457");
    CHECK(format_g(2.0) == "2");
    CHECK(format_g(1.0 / 3.0, 3) == "0.333");
}
