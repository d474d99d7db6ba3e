#pragma once

#include <string>

#include "lbe/trilevel.hpp"

namespace lbe {

// JSON state file: config text, standardizer, both encoders, similarity
// logits and the standardized training pool. Enough to reproduce every
// prediction the trained state can make.
void save_state(const LBEState& st, const std::string& path);
LBEState load_state(const std::string& path);

}  // namespace lbe
