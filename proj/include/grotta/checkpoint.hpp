#pragma once

// Model checkpoints are plain text:
//
//   grotta-checkpoint 1
//   input_dim <n>
//   hidden_dims <k> <h1> ... <hk>
//   num_classes <C>
//   <name> <count> <v1> ... <vcount>      (one line per array)
//   end
//
// Arrays appear in a fixed order: for each block i, block.i.weight,
// block.i.bias, block.i.gamma, block.i.beta, block.i.mu_g, block.i.sigma2_g,
// block.i.mu_s, block.i.sigma2_s, block.i.alpha, block.i.eps; then
// head.weight, head.bias. Doubles are written in shortest round-trip form,
// so load(save(m)) == m exactly. Empty source statistics have count 0.

#include "grotta/model.hpp"

#include <filesystem>
#include <iosfwd>

namespace grotta {

void save_checkpoint(const Model &model, std::ostream &out);
void save_checkpoint(const Model &model, const std::filesystem::path &path);
Model load_checkpoint_from(std::istream &in);
Model load_checkpoint(const std::filesystem::path &path);

} // namespace grotta
