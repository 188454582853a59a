// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include <json.hpp>

namespace scaopo {

/// Writes atomically: the document goes to a temporary sibling that is then renamed.
void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& ckpt);

nlohmann::json read_checkpoint(const std::filesystem::path& path);

}  // namespace scaopo
