#include <gtest/gtest.h>

#include "detox/common.hpp"
#include "support/fixtures.hpp"

using namespace detox;

TEST(Span, OverlapIsHalfOpen) {
  EXPECT_TRUE((Span{0, 5}).overlaps(Span{4, 8}));
  EXPECT_FALSE((Span{0, 5}).overlaps(Span{5, 8}));
  EXPECT_FALSE((Span{3, 3}).overlaps(Span{0, 8}));
  EXPECT_TRUE((Span{2, 2}).empty());
  EXPECT_EQ((Span{1, 4}).slice("abcdef"), "bcd");
  EXPECT_TRUE((Span{0, 6}).within(6));
  EXPECT_FALSE((Span{0, 7}).within(6));
}

TEST(Span, JsonIsTwoElementArray) {
  json j = Span{3, 9};
  EXPECT_EQ(j.dump(), "[3,9]");
  EXPECT_EQ(j.get<Span>(), (Span{3, 9}));
  EXPECT_THROW(json::parse("[1]").get<Span>(), std::exception);
}

TEST(StableHash, DependsOnBytesAndSeed) {
  EXPECT_EQ(stable_hash("abc", 1), stable_hash("abc", 1));
  EXPECT_NE(stable_hash("abc", 1), stable_hash("abc", 2));
  EXPECT_NE(stable_hash("abc", 1), stable_hash("abd", 1));
  EXPECT_EQ(stable_hash("", 0), stable_hash("", 0));
}

TEST(Strings, SplitKeepsEmptyFields) {
  EXPECT_EQ(split_string("a,,b", ','), (std::vector<std::string>{"a", "", "b"}));
  EXPECT_EQ(split_string("", ','), (std::vector<std::string>{""}));
  EXPECT_EQ(trim("  x y\t\n"), "x y");
  EXPECT_EQ(trim(" \n"), "");
}

TEST(Jsonl, RoundTripSkipsBlankLines) {
  auto dir = detox::testing::scratch_dir("jsonl");
  auto path = dir / "rows.jsonl";
  write_jsonl(path, {json{{"a", 1}}, json{{"b", "two"}}});
  write_file(path, read_file(path) + "\n   \n");
  auto rows = read_jsonl(path);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1]["b"], "two");
}

TEST(Jsonl, MalformedLineNamesLineNumber) {
  auto dir = detox::testing::scratch_dir("jsonl-bad");
  auto path = dir / "rows.jsonl";
  write_file(path, "{\"a\": 1}\n{oops\n");
  try {
    read_jsonl(path);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Files, MissingFileIsError) {
  EXPECT_THROW(read_file("/nonexistent/detox/file"), Error);
}

TEST(Utf8, InvalidBytesAreReplaced) {
  EXPECT_EQ(to_valid_utf8("caf\xc3\xa9"), "caf\xc3\xa9");
  EXPECT_EQ(to_valid_utf8("a\xb3" "b"), "a\xef\xbf\xbd" "b");
  EXPECT_EQ(to_valid_utf8("\xc3"), "\xef\xbf\xbd");
  EXPECT_EQ(to_valid_utf8(""), "");
}
