#pragma once
//
// Self-describing tensor container: JSON header (tree, ranks, supports)
// followed by a little-endian binary64 payload.
//

#include <string>

#include "htsolve/ht_tensor.hpp"

namespace hts {

void save_httensor(const std::string& path, const HTTensor& v);
HTTensor load_httensor(const std::string& path);

}  // namespace hts
