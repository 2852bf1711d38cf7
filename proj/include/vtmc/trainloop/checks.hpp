// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "vtmc/ndcore/gradcheck.hpp"

namespace vtmc {

/// linear, prelu, tac, modtac, encoder, ctc, model
const std::vector<std::string>& gradcheck_modules();

/// Finite-difference check of one module on small random inputs. The model
/// entry is the tiny ModTAC second pass under CTC loss. Unknown names throw ConfigError.
GradcheckReport check_module(const std::string& name, const GradcheckOptions& opts = {}, std::uint64_t seed = 1);

}  // namespace vtmc
