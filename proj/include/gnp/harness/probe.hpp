#pragma once

#include <filesystem>

#include "gnp/flatness.hpp"
#include "gnp/harness/checkpoint.hpp"
#include "gnp/harness/config.hpp"

namespace gnp::harness {

/// Rebuilds the run's model and full training set from the checkpoint's
/// config snapshot.
RunConfig checkpoint_config(const Checkpoint& ck);

/// Flatness of the checkpointed parameters on the full training set.
/// Throws IoError for a malformed checkpoint.
FlatnessReport probe_checkpoint(const std::filesystem::path& path, const ProbeConfig& cfg);
FlatnessReport probe_checkpoint(const Checkpoint& ck, const ProbeConfig& cfg);

}  // namespace gnp::harness
