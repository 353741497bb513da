#include <gtest/gtest.h>

#include "iotriage/error.hpp"
#include "iotriage/resources.hpp"
#include "iotriage/util.hpp"
#include "synthetic.hpp"

namespace iotriage {
namespace {

TEST(Util, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Util, Fnv1aAndSplitmixKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Util, FormatFixed) {
  EXPECT_EQ(format_fixed(0.71428, 4), "0.7143");
  EXPECT_EQ(format_fixed(98.3, 2), "98.30");
  EXPECT_EQ(format_fixed(-0.4, 0), "0");  // no negative zero
}

TEST(Util, TextHelpers) {
  EXPECT_EQ(trim("  a b \n"), "a b");
  EXPECT_EQ(to_lower("SQL Injection"), "sql injection");
  EXPECT_EQ(slugify("Password Cracking"), "password-cracking");
  EXPECT_EQ(slugify("DDoS-HTTP_Flood"), "ddos-http-flood");
}

TEST(Util, CsvRoundTrip) {
  const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  std::string line;
  for (const auto& f : fields) line += (line.empty() ? "" : ",") + csv_escape(f);
  const auto rows = parse_csv(line + "\r\nx,y,z,w,v\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], fields);
  EXPECT_EQ(rows[1].size(), 5u);
}

TEST(Util, FileWriteCreatesParents) {
  const auto dir = testing::fresh_dir("util");
  write_text_file(dir / "a" / "b.txt", "hello");
  EXPECT_EQ(read_text_file(dir / "a" / "b.txt"), "hello");
  EXPECT_THROW((void)read_text_file(dir / "missing.txt"), Error);
}

TEST(Util, EmbeddedResources) {
  for (auto name : {resource_names::kLabelMapping, resource_names::kRawLabelAliases, resource_names::kAttackKb,
                    resource_names::kDeviceKb, resource_names::kScenarioTemplate, resource_names::kEvaluationTemplate}) {
    EXPECT_FALSE(resource(name).empty()) << name;
  }
  EXPECT_THROW((void)resource("nope.json"), ConfigError);
}

TEST(Util, ExitCodesAreDistinct) {
  EXPECT_EQ(exit_code_for(ErrorKind::config), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::data), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::network), 4);
  EXPECT_EQ(exit_code_for(ErrorKind::parse), 5);
  EXPECT_EQ(exit_code_for(ErrorKind::internal), 1);
}

}  // namespace
}  // namespace iotriage
