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

#include "infercal/smoothing.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "infercal/util.hpp"

namespace infercal {

SmoothingPolicy SmoothingPolicy::none() { return SmoothingPolicy{}; }

SmoothingPolicy SmoothingPolicy::uniform(double eps) {
  SmoothingPolicy p;
  p.kind = SmoothingKind::Uniform;
  p.epsilon = eps;
  return p;
}

SmoothingPolicy SmoothingPolicy::graduated() {
  SmoothingPolicy p;
  p.kind = SmoothingKind::Graduated;
  return p;
}

std::string SmoothingPolicy::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case SmoothingKind::None:
      os << "none";
      break;
    case SmoothingKind::Uniform:
      os << "uniform:" << epsilon;
      break;
    case SmoothingKind::Graduated:
      os << "graduated:" << conf_lo << "," << conf_hi << "," << eps_lo << ","
         << eps_mid << "," << eps_hi;
      break;
  }
  return os.str();
}

namespace {

double parse_double_or_die(const std::string& s, const std::string& flag) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw UsageError("bad smoothing flag '" + flag + "': '" + s + "' is not a number");
  }
}

void check_epsilon(double eps, const std::string& flag) {
  if (!(eps >= 0.0) || !(eps < 1.0)) {
    throw UsageError("bad smoothing flag '" + flag + "': epsilon must lie in [0,1), got " +
                     std::to_string(eps));
  }
}

}  // namespace

SmoothingPolicy parse_smoothing_flag(const std::string& flag) {
  std::string head = flag;
  std::string args;
  if (auto colon = flag.find(':'); colon != std::string::npos) {
    head = flag.substr(0, colon);
    args = flag.substr(colon + 1);
  }
  if (head == "none") {
    if (!args.empty()) throw UsageError("bad smoothing flag '" + flag + "': none takes no arguments");
    return SmoothingPolicy::none();
  }
  if (head == "uniform") {
    SmoothingPolicy p = SmoothingPolicy::uniform();
    if (!args.empty()) p.epsilon = parse_double_or_die(args, flag);
    check_epsilon(p.epsilon, flag);
    return p;
  }
  if (head == "graduated") {
    SmoothingPolicy p = SmoothingPolicy::graduated();
    if (!args.empty()) {
      std::vector<std::string> parts;
      std::size_t start = 0;
      while (true) {
        std::size_t comma = args.find(',', start);
        parts.push_back(args.substr(start, comma == std::string::npos ? comma : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (parts.size() != 5) {
        throw UsageError("bad smoothing flag '" + flag +
                         "': graduated takes lo,hi,eps_lo,eps_mid,eps_hi");
      }
      p.conf_lo = parse_double_or_die(parts[0], flag);
      p.conf_hi = parse_double_or_die(parts[1], flag);
      p.eps_lo = parse_double_or_die(parts[2], flag);
      p.eps_mid = parse_double_or_die(parts[3], flag);
      p.eps_hi = parse_double_or_die(parts[4], flag);
    }
    if (!(p.conf_lo < p.conf_hi)) {
      throw UsageError("bad smoothing flag '" + flag + "': need lo < hi");
    }
    for (double e : {p.eps_lo, p.eps_mid, p.eps_hi}) check_epsilon(e, flag);
    return p;
  }
  throw UsageError("bad smoothing flag '" + flag + "': expected none, uniform or graduated");
}

double assign_epsilon(const SmoothingPolicy& policy, double first_pass_confidence) {
  switch (policy.kind) {
    case SmoothingKind::None:
      return 0.0;
    case SmoothingKind::Uniform:
      return policy.epsilon;
    case SmoothingKind::Graduated:
      break;
  }
  if (!(first_pass_confidence >= 0.0) || !(first_pass_confidence <= 1.0)) {
    throw ComputeError("assign_epsilon: confidence " + std::to_string(first_pass_confidence) +
                       " outside [0,1]");
  }
  if (first_pass_confidence > policy.conf_hi) return policy.eps_hi;
  if (first_pass_confidence < policy.conf_lo) return policy.eps_lo;
  return policy.eps_mid;
}

Eigen::VectorXd target_distribution(int truth_index, int vocab_size, double epsilon) {
  if (vocab_size < 2) {
    throw ComputeError("target_distribution: need at least two labels, got " +
                       std::to_string(vocab_size));
  }
  if (truth_index < 0 || truth_index >= vocab_size) {
    throw ComputeError("target_distribution: truth index " + std::to_string(truth_index) +
                       " outside vocabulary of size " + std::to_string(vocab_size));
  }
  if (!(epsilon >= 0.0) || !(epsilon < 1.0)) {
    throw ComputeError("target_distribution: epsilon must lie in [0,1), got " +
                       std::to_string(epsilon));
  }
  Eigen::VectorXd q = Eigen::VectorXd::Constant(vocab_size, epsilon / (vocab_size - 1));
  q[truth_index] = 1.0 - epsilon;
  return q;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw ComputeError("softmax: empty logits");
  Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  Eigen::VectorXd ex = shifted.array().exp();
  return ex / ex.sum();
}

double smoothed_loss(const Eigen::VectorXd& logits, const Eigen::VectorXd& target,
                     Eigen::VectorXd& grad) {
  if (logits.size() != target.size()) {
    throw ComputeError("smoothed_loss: logits size " + std::to_string(logits.size()) +
                       " does not match target size " + std::to_string(target.size()));
  }
  if (logits.size() == 0) throw ComputeError("smoothed_loss: empty logits");
  const double mx = logits.maxCoeff();
  Eigen::ArrayXd shifted = logits.array() - mx;
  const double logz = std::log(shifted.exp().sum());
  // loss = -sum_k q_k * log softmax_k = -sum_k q_k * (shifted_k - logz)
  double loss = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    if (target[k] != 0.0) loss -= target[k] * (shifted[k] - logz);
  }
  grad = (shifted - logz).exp().matrix() - target;
  return loss;
}

}  // namespace infercal
