#include "gnp/harness/probe.hpp"

#include "gnp/error.hpp"
#include "gnp/mlp.hpp"
#include "gnp/objective.hpp"

namespace gnp::harness {

RunConfig checkpoint_config(const Checkpoint& ck) {
  if (!ck.meta.contains("config") || !ck.meta.at("config").is_object()) {
    throw IoError("checkpoint has no config snapshot");
  }
  KeyValues kv;
  try {
    for (const auto& [k, v] : ck.meta.at("config").items()) kv.emplace_back(k, v.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint config snapshot is malformed: ") + e.what());
  }
  return build_config(kv);
}

FlatnessReport probe_checkpoint(const Checkpoint& ck, const ProbeConfig& cfg) {
  const RunConfig run = checkpoint_config(ck);
  const ModelSpec model = run.resolved_model();
  if (!(model.layout() == ck.params.layout())) {
    throw IoError("checkpoint parameters do not match the model in its config snapshot");
  }
  const Dataset data = generate_dataset(run.resolved_dataset());
  return probe_flatness(MlpObjective(model, data.train), ck.params, cfg);
}

FlatnessReport probe_checkpoint(const std::filesystem::path& path, const ProbeConfig& cfg) {
  return probe_checkpoint(load_checkpoint(path), cfg);
}

}  // namespace gnp::harness
