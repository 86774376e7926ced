#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bbs/nn.hpp"
#include "bbs/tensor.hpp"

namespace bbs::ckpt {

// Raised for unreadable files, bad magic/version, or tensor-table mismatches.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  int schema = 1;
  std::string variant;
  std::string config_hash;
  int64_t epoch = 0, iter = 0;
  double loss_alpha = 0.5;
  int64_t side = 0;
  std::map<std::string, std::string> extra;
};

// Self-describing container: magic + schema version, a JSON header carrying
// the metadata and the tensor name/shape table, then raw row-major doubles in
// table order.
struct Checkpoint {
  CheckpointMeta meta;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);
CheckpointMeta peek_checkpoint(const std::string& path);

// Copies every parameter tensor out of / back into a store. fill throws when
// the checkpoint is missing a parameter or shapes disagree; checkpoint
// entries not present in the store (e.g. optimizer state) are ignored.
Checkpoint snapshot(const nn::ParamStore& ps, CheckpointMeta meta);
void fill_param_store(const Checkpoint& c, nn::ParamStore& ps);

}  // namespace bbs::ckpt
