// Copyright (c) 2026 The infercal Authors. All Rights Reserved.
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

#ifndef INFERCAL_SMOOTHING_HPP
#define INFERCAL_SMOOTHING_HPP

#include <Eigen/Core>
#include <string>

namespace infercal {

enum class SmoothingKind { None, Uniform, Graduated };

// Label smoothing configuration. Uniform spreads a fixed epsilon; graduated
// picks the epsilon per token from a first-pass confidence estimate: hard
// penalties for tokens the model is very sure about, none where it is unsure.
struct SmoothingPolicy {
  SmoothingKind kind = SmoothingKind::None;
  double epsilon = 0.1;  // uniform smoothing mass

  // graduated thresholds and per-band epsilons
  double conf_lo = 0.3;
  double conf_hi = 0.7;
  double eps_lo = 0.0;   // confidence below conf_lo
  double eps_mid = 0.1;  // confidence in [conf_lo, conf_hi]
  double eps_hi = 0.3;   // confidence above conf_hi

  static SmoothingPolicy none();
  static SmoothingPolicy uniform(double eps = 0.1);
  static SmoothingPolicy graduated();

  std::string to_string() const;
};

// Flag syntax: "none", "uniform", "uniform:<eps>", "graduated",
// "graduated:<lo>,<hi>,<eps_lo>,<eps_mid>,<eps_hi>".
SmoothingPolicy parse_smoothing_flag(const std::string& flag);

// Epsilon for one token under the policy. For graduated smoothing
// first_pass_confidence is the frozen first-pass estimate; boundaries fall in
// the middle band (strict inequalities on both sides).
double assign_epsilon(const SmoothingPolicy& policy, double first_pass_confidence);

// Smoothed one-hot target: 1 - eps on the truth label, eps/(V-1) elsewhere.
Eigen::VectorXd target_distribution(int truth_index, int vocab_size, double epsilon);

// Cross-entropy of the target distribution against softmax(logits), computed
// with max subtraction. Returns the loss and writes d(loss)/d(logits)
// (= softmax - target) into grad.
double smoothed_loss(const Eigen::VectorXd& logits, const Eigen::VectorXd& target,
                     Eigen::VectorXd& grad);

// Numerically stable softmax (max subtraction), reused by the model code.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

}  // namespace infercal

#endif  // INFERCAL_SMOOTHING_HPP
