#pragma once

#include <map>
#include <string>

#include "genfeat/optim.hpp"
#include "genfeat/tensor.hpp"

namespace genfeat {

// Checkpoint layout ("GFT1"): 4-byte magic, then one record per tensor in
// name order: u32 name length, name bytes, u32 rank, u32 extents, 32-bit
// little-endian floats row-major. Records run to end of file.
void checkpoint_save(const std::map<std::string, Tensor>& tensors, const std::string& path);
void checkpoint_save(const ParamStore& params, const std::string& path);
std::map<std::string, Tensor> checkpoint_load(const std::string& path);

}  // namespace genfeat
