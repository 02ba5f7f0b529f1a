#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dle {

// Stable exit-code contract for scripting.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitTrainingFailure = 3;
inline constexpr int kExitMissingArtifacts = 4;

int cmd_train(const std::string& config_path, const std::optional<std::string>& out_override);

int cmd_eval(const std::string& checkpoint_dir, const std::string& region_path, int episodes,
             uint64_t seed, const std::optional<std::string>& out_dir);

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir);

int cmd_replay(const std::string& log_path, const std::string& out_dir,
               const std::optional<std::string>& region_path);

int cmd_export_region_store(const std::string& checkpoint_dir, int region_id,
                            const std::string& out_path);

int cmd_import_region_store(const std::string& checkpoint_dir, const std::string& store_path);

}  // namespace dle
