// Copyright 2026 The U-Convert Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "uconvert/models.hpp"

namespace uconvert {
namespace {

using testing::check_model_gradients;
using testing::GradCheckResult;

constexpr double kTolerance = 1e-3;

void expect_close(const GradCheckResult& r) {
  EXPECT_GT(r.checked, 0);
  EXPECT_LE(r.max_relative_error, kTolerance) << "worst: " << r.worst_parameter;
}

TEST(GradientCheck, UConvertNetOneLevel) {
  expect_close(check_model_gradients(build_uconvertnet({1, 2, 3, 0.0, 1}, 1), 10));
}

TEST(GradientCheck, UConvertNetTwoLevels) {
  expect_close(check_model_gradients(build_uconvertnet({2, 2, 3, 0.0, 2}, 2), 11));
}

TEST(GradientCheck, SrganGenerator) {
  expect_close(check_model_gradients(build_srgan({1, 4, 2, 8, 1e-3}, 3).generator, 12));
}

TEST(GradientCheck, SrganDiscriminator) {
  expect_close(check_model_gradients(build_srgan({1, 4, 2, 8, 1e-3}, 4).discriminator, 13));
}

TEST(GradientCheck, EspcnWithoutShuffle) {
  expect_close(check_model_gradients(build_espcn({1, {4, 3}}, 5), 14));
}

TEST(GradientCheck, EspcnWithShuffle) {
  expect_close(check_model_gradients(build_espcn({2, {4, 3}}, 6), 15));
}

TEST(GradientCheck, OracleDetectsAWrongGradient) {
  // A loss whose autograd graph is cut in half must fail the check.
  auto w = torch::full({3}, 0.7, torch::kDouble).requires_grad_(true);
  std::vector<std::pair<std::string, torch::Tensor>> params = {{"w", w}};
  const auto r = testing::finite_difference_check(params, [&] {
    return (w * w.detach()).sum();
  });
  EXPECT_GT(r.max_relative_error, 0.4);
}

}  // namespace
}  // namespace uconvert
