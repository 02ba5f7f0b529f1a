#include <CLI11.hpp>
#include <optional>

#include "dle/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"DLE planner workbench: region-conditioned highway simulation, "
                 "policy training, and evaluation"};
    app.require_subcommand(1);

    std::string config_path, checkpoint, region, log_path, out, store_path;
    std::vector<std::string> run_dirs;
    int episodes = 100;
    int region_id = 0;
    uint64_t seed = 7;
    std::optional<std::string> out_opt;

    auto* train = app.add_subcommand("train", "Train a policy from a run config");
    train->add_option("--config", config_path, "run config JSON")->required();
    std::string train_out;
    auto* train_out_opt = train->add_option("--out", train_out, "override the output run directory");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint in a region");
    eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    eval->add_option("--region", region, "region spec JSON")->required();
    eval->add_option("--episodes", episodes, "number of evaluation episodes");
    eval->add_option("--seed", seed, "base episode seed");
    std::string eval_out;
    auto* eval_out_opt = eval->add_option("--out", eval_out, "output directory for metrics/logs");

    auto* compare = app.add_subcommand("compare", "Compare evaluated runs");
    compare->add_option("runs", run_dirs, "run directories")->required();
    compare->add_option("--out", out, "output directory")->required();

    auto* replay = app.add_subcommand("replay", "Export per-step frames and trace of an episode log");
    replay->add_option("--log", log_path, "episode log (JSONL)")->required();
    replay->add_option("--out", out, "output directory")->required();
    std::string replay_region;
    auto* replay_region_opt = replay->add_option("--region", replay_region, "region spec for lane rendering");

    auto* exp = app.add_subcommand("export-region-store", "Write a region's store to a file");
    exp->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    exp->add_option("--region-id", region_id, "region id")->required();
    exp->add_option("--out", out, "output file")->required();

    auto* imp = app.add_subcommand("import-region-store", "Install a regional store into a checkpoint");
    imp->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    imp->add_option("--store", store_path, "regional store JSON")->required();

    CLI11_PARSE(app, argc, argv);

    if (train->parsed())
        return dle::cmd_train(config_path, train_out_opt->count() ? std::optional(train_out) : std::nullopt);
    if (eval->parsed())
        return dle::cmd_eval(checkpoint, region, episodes, seed,
                             eval_out_opt->count() ? std::optional(eval_out) : std::nullopt);
    if (compare->parsed()) return dle::cmd_compare(run_dirs, out);
    if (replay->parsed())
        return dle::cmd_replay(log_path, out,
                               replay_region_opt->count() ? std::optional(replay_region) : std::nullopt);
    if (exp->parsed()) return dle::cmd_export_region_store(checkpoint, region_id, out);
    if (imp->parsed()) return dle::cmd_import_region_store(checkpoint, store_path);
    (void)out_opt;
    return 0;
}
