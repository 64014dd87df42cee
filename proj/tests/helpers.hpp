#pragma once

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

namespace seal::testing {

/// Fresh scratch directory per test.
inline std::string temp_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  std::filesystem::path p = std::filesystem::path(SEAL_TEST_TMP) / (std::string(info->test_suite_name()) + "." + info->name());
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace seal::testing
