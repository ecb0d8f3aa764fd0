// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ecd/model/transformer.hpp"

namespace ecd::model {

/// One teacher-forced sequence. tokens is the full text part (BOS, query,
/// answer, EOS); cross-entropy is taken on tokens[j] for j >= first_target.
struct TrainingExample {
  std::vector<int> visual_prefix_ids;
  std::vector<int> tokens;
  int first_target = 1;
};

/// Mean cross-entropy of the example. When grad is non-null the gradient
/// scaled by `weight` is added into it.
template <typename Scalar>
Scalar loss_and_gradient(const Transformer<Scalar>& model, const TrainingExample& example,
                         Params<Scalar>* grad, Scalar weight = Scalar(1));

/// Last-position vocabulary logits from the full-sequence training forward.
template <typename Scalar>
RowVector<Scalar> training_forward_last_logits(const Transformer<Scalar>& model,
                                               const TrainingExample& example);

struct TrainConfig {
  int steps = 1200;
  int batch_size = 8;
  double learning_rate = 3e-3;
  int warmup_steps = 50;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
};

using TrainProgress = std::function<void(int step, double loss)>;

/// Adam with linear warmup, cosine decay and global-norm clipping.
/// Batches are drawn from seeded epoch permutations.
Checkpoint fit(const Checkpoint& init, const std::vector<TrainingExample>& examples,
               const TrainConfig& config, const TrainProgress& progress = {});

}  // namespace ecd::model
