#include "dle/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "dle/eval.hpp"
#include "dle/log.hpp"
#include "dle/render.hpp"
#include "dle/runio.hpp"

namespace dle {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string region_set_hash(const std::vector<RegionSpec>& regions) {
    std::string blob;
    for (const auto& r : regions) blob += region_to_json_string(r);
    return hex64(fnv1a64(blob));
}

std::vector<RegionSpec> load_regions(const RunConfig& cfg) {
    std::vector<RegionSpec> regions;
    for (const auto& p : cfg.region_spec_paths) regions.push_back(load_region_file(p));
    return regions;
}

}  // namespace

int cmd_train(const std::string& config_path, const std::optional<std::string>& out_override) {
    RunConfig cfg;
    std::vector<RegionSpec> regions;
    try {
        cfg = load_run_config(config_path);
        if (out_override) cfg.out_dir = *out_override;
        cfg.validate();
        regions = load_regions(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    }

    std::string hash = config_snapshot_hash(cfg, regions);
    RunDirectory run{cfg.out_dir};
    run.create();

    json snapshot = json::parse(cfg.to_json_string());
    snapshot["config_hash"] = hash;
    snapshot["region_set_hash"] = region_set_hash(regions);
    json region_blobs = json::array();
    for (const auto& r : regions) region_blobs.push_back(json::parse(region_to_json_string(r)));
    snapshot["regions"] = region_blobs;
    write_text_file(run.config_snapshot_path(), snapshot.dump(2) + "\n");

    try {
        std::vector<TrainedModel> trained;
        PolicyHandle policy = make_policy(cfg.policy_kind, cfg.train, regions, hash, &trained);
        save_checkpoint(run.checkpoint_dir(), policy);

        if (cfg.policy_kind == PolicyKind::GM) {
            size_t max_ep = 0;
            for (const auto& t : trained) max_ep = std::max(max_ep, t.curve.size());
            std::vector<CurveRow> mean_curve;
            for (size_t i = 0; i < max_ep; ++i) {
                CurveRow row = trained.front().curve.size() > i ? trained.front().curve[i] : CurveRow{};
                double sum = 0.0;
                int cnt = 0;
                for (const auto& t : trained)
                    if (i < t.curve.size()) {
                        sum += t.curve[i].episode_reward;
                        ++cnt;
                    }
                row.episode = static_cast<int>(i);
                row.episode_reward = cnt ? sum / cnt : 0.0;
                mean_curve.push_back(row);
            }
            write_text_file(run.curve_path(), curve_to_csv(mean_curve));
            for (size_t i = 0; i < trained.size(); ++i)
                write_text_file(run.root + "/curve_expert_" + std::to_string(i) + ".csv",
                                curve_to_csv(trained[i].curve));
        } else {
            write_text_file(run.curve_path(), curve_to_csv(trained.front().curve));
        }
        std::printf("run complete: %s (config %s)\n", run.root.c_str(), hash.c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "training failure: %s\n", e.what());
        return kExitTrainingFailure;
    }
}

int cmd_eval(const std::string& checkpoint_dir, const std::string& region_path, int episodes,
             uint64_t seed, const std::optional<std::string>& out_dir) {
    PolicyHandle policy;
    try {
        policy = load_checkpoint(checkpoint_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "missing artifacts: %s\n", e.what());
        return kExitMissingArtifacts;
    }
    RegionSpec region;
    try {
        region = load_region_file(region_path);
        if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    }

    bool cross = std::find(policy.trained_region_ids.begin(), policy.trained_region_ids.end(),
                           region.region_id) == policy.trained_region_ids.end();
    if (cross)
        logf(LogLevel::Warn, "eval: region %d is outside %s's training regime (cross-region evaluation)",
             region.region_id, policy_kind_name(policy.kind));

    int workers = static_cast<int>(std::min<unsigned>(2, std::thread::hardware_concurrency()));
    auto logs = run_episodes(policy, region, episodes, seed, RewardWeights::defaults(),
                             std::max(1, workers));

    MetricsReport report;
    report.policy_kind = policy_kind_name(policy.kind);
    report.checkpoint_hash = policy.config_hash;
    RegionMetrics rm = summarize(logs, region.region_id);
    rm.cross_region = cross;
    report.regions.push_back(rm);

    std::string base = out_dir ? *out_dir
                               : (fs::path(checkpoint_dir).parent_path() / "eval").string();
    fs::create_directories(base);
    write_text_file(base + "/metrics_region" + std::to_string(region.region_id) + ".json",
                    report.to_json_string() + "\n");
    fs::path log_dir = fs::path(base) / ("logs_region" + std::to_string(region.region_id));
    fs::create_directories(log_dir);
    for (size_t i = 0; i < logs.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "ep_%05zu.jsonl", i);
        write_text_file((log_dir / name).string(), episode_to_jsonl(logs[i]));
    }
    std::fputs(report.to_table().c_str(), stdout);
    return kExitOk;
}

namespace {

struct RunInfo {
    std::string dir;
    std::string kind;
    std::string region_set_hash;
    std::vector<int> trained_regions;
    std::map<int, RegionMetrics> metrics;  // region id -> metrics
    std::vector<double> curve;
};

std::optional<RunInfo> load_run_info(const std::string& dir) {
    RunInfo info;
    info.dir = dir;
    try {
        json snap = json::parse(read_text_file(dir + "/config_snapshot.json"));
        info.region_set_hash = snap.value("region_set_hash", "");
        json manifest = json::parse(read_text_file(dir + "/checkpoint/manifest.json"));
        info.kind = manifest.at("kind").get<std::string>();
        info.trained_regions = manifest.at("trained_region_ids").get<std::vector<int>>();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "skipping %s: %s\n", dir.c_str(), e.what());
        return std::nullopt;
    }
    fs::path eval_dir = fs::path(dir) / "eval";
    if (fs::exists(eval_dir)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(eval_dir))
            if (entry.path().filename().string().rfind("metrics_region", 0) == 0) files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            MetricsReport rep = MetricsReport::from_json_string(read_text_file(f.string()));
            for (const auto& r : rep.regions) info.metrics[r.region_id] = r;
        }
    }
    if (info.metrics.empty()) {
        std::fprintf(stderr, "skipping %s: no eval metrics found\n", dir.c_str());
        return std::nullopt;
    }
    // curve (episode rewards) for the overlay chart
    try {
        std::string csv = read_text_file(dir + "/curve.csv");
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            size_t p1 = line.find(',');
            size_t p2 = line.find(',', p1 + 1);
            if (p1 == std::string::npos || p2 == std::string::npos) continue;
            info.curve.push_back(std::stod(line.substr(p1 + 1, p2 - p1 - 1)));
        }
    } catch (const std::exception&) {
        // chart data optional
    }
    return info;
}

int kind_order(const std::string& k) {
    if (k == "GM") return 0;
    if (k == "LM1") return 1;
    if (k == "LM2") return 2;
    if (k == "LM12") return 3;
    if (k == "DLE") return 4;
    return 5;
}

std::string regions_label(const std::vector<int>& ids) {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) out += (i ? "&" : "") + std::to_string(ids[i]);
    return out.empty() ? "-" : out;
}

}  // namespace

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    if (run_dirs.size() < 2) {
        std::fprintf(stderr, "comparison needs >= 2 run directories\n");
        return kExitMissingArtifacts;
    }
    std::vector<RunInfo> runs;
    for (const auto& d : run_dirs) {
        auto info = load_run_info(d);
        if (info) runs.push_back(std::move(*info));
    }
    if (runs.size() < 2) {
        std::fprintf(stderr, "comparison needs >= 2 usable runs (missing artifacts listed above)\n");
        return kExitMissingArtifacts;
    }
    for (const auto& r : runs) {
        if (r.region_set_hash != runs.front().region_set_hash) {
            std::fprintf(stderr, "region spec hash mismatch: %s has %s, %s has %s\n",
                         runs.front().dir.c_str(), runs.front().region_set_hash.c_str(), r.dir.c_str(),
                         r.region_set_hash.c_str());
            return kExitConfigError;
        }
    }

    const RunInfo* gm = nullptr;
    for (const auto& r : runs)
        if (r.kind == "GM") gm = &r;
    if (!gm) {
        std::fprintf(stderr, "comparison needs a GM run as the performance benchmark\n");
        return kExitMissingArtifacts;
    }
    std::map<int, double> opt_returns;
    for (const auto& [rid, m] : gm->metrics) opt_returns[rid] = m.mean_return;

    std::sort(runs.begin(), runs.end(), [](const RunInfo& a, const RunInfo& b) {
        return kind_order(a.kind) < kind_order(b.kind);
    });

    struct Row {
        std::string kind, trained, tested;
        double apr_v, rc;
    };
    std::vector<Row> rows;
    for (const auto& r : runs) {
        std::vector<double> pol, opt;
        std::vector<int> tested;
        double collisions = 0.0;
        int episodes = 0;
        for (const auto& [rid, m] : r.metrics) {
            if (!opt_returns.count(rid)) continue;
            pol.push_back(m.mean_return);
            opt.push_back(opt_returns[rid]);
            tested.push_back(rid);
            collisions += m.collision_count;
            episodes += m.episodes;
        }
        if (pol.empty()) continue;
        rows.push_back({r.kind, regions_label(r.trained_regions), regions_label(tested),
                        apr(pol, opt), episodes ? collisions / episodes : 0.0});
        // per-region rows for cross-region cells
        for (const auto& [rid, m] : r.metrics) {
            if (!m.cross_region || !opt_returns.count(rid)) continue;
            rows.push_back({r.kind, regions_label(r.trained_regions), std::to_string(rid),
                            m.mean_return / opt_returns[rid], m.collision_rate});
        }
    }

    std::string csv = "policy,training_scenario,test_scenario,apr,collision_rate\n";
    std::string table;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-8s %-12s %-10s %-8s %s\n", "policy", "trained", "tested", "APR",
                  "R_c");
    table += buf;
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.4f,%.4f\n", row.kind.c_str(), row.trained.c_str(),
                      row.tested.c_str(), row.apr_v, row.rc);
        csv += buf;
        std::snprintf(buf, sizeof(buf), "%-8s %-12s %-10s %-8.2f %.0f%%\n", row.kind.c_str(),
                      row.trained.c_str(), row.tested.c_str(), row.apr_v, row.rc * 100.0);
        table += buf;
    }

    fs::create_directories(out_dir);
    write_text_file(out_dir + "/comparison.csv", csv);
    write_text_file(out_dir + "/comparison.txt", table);

    std::vector<CurveSeries> series;
    std::string curves_csv = "episode";
    size_t max_n = 0;
    for (const auto& r : runs) {
        if (r.curve.empty()) continue;
        series.push_back({r.kind, r.curve});
        curves_csv += "," + r.kind;
        max_n = std::max(max_n, r.curve.size());
    }
    curves_csv += "\n";
    for (size_t i = 0; i < max_n; ++i) {
        curves_csv += std::to_string(i);
        for (const auto& s : series) {
            curves_csv += ",";
            if (i < s.values.size()) {
                std::snprintf(buf, sizeof(buf), "%.17g", s.values[i]);
                curves_csv += buf;
            }
        }
        curves_csv += "\n";
    }
    write_text_file(out_dir + "/curves.csv", curves_csv);
    write_text_file(out_dir + "/curves.svg", render_curves_svg(series));

    std::fputs(table.c_str(), stdout);
    return kExitOk;
}

int cmd_replay(const std::string& log_path, const std::string& out_dir,
               const std::optional<std::string>& region_path) {
    std::string text;
    try {
        text = read_text_file(log_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "missing artifacts: %s\n", e.what());
        return kExitMissingArtifacts;
    }
    std::optional<RegionSpec> region;
    if (region_path) {
        try {
            region = load_region_file(*region_path);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return kExitConfigError;
        }
    }

    EpisodeLog log;
    std::vector<std::string> errors;
    try {
        log = episode_from_jsonl(text);
    } catch (const std::exception& e) {
        // salvage parseable step lines, record the failure
        errors.push_back(e.what());
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                json j = json::parse(line);
                if (j.value("type", "") == "step") {
                    EpisodeLog tmp;
                    // reuse the parser by wrapping one step
                    std::string wrapped =
                        "{\"type\":\"header\",\"region_id\":0,\"seed\":0}\n" + line +
                        "\n{\"type\":\"summary\",\"terminal_cause\":\"?\",\"undiscounted_return\":0,"
                        "\"discounted_return\":0}\n";
                    tmp = episode_from_jsonl(wrapped);
                    log.steps.push_back(tmp.steps.front());
                }
            } catch (const std::exception& inner) {
                errors.push_back(inner.what());
            }
        }
    }

    fs::create_directories(out_dir);
    for (size_t i = 0; i < log.steps.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "frame_%05zu.svg", i);
        write_text_file(out_dir + "/" + name,
                        render_frame_svg(log.steps[i], region ? &*region : nullptr));
    }
    write_text_file(out_dir + "/trace.csv", replay_trace_csv(log));
    if (!errors.empty()) {
        std::string manifest = "replay errors:\n";
        for (const auto& e : errors) manifest += "  " + e + "\n";
        write_text_file(out_dir + "/errors.txt", manifest);
        std::fprintf(stderr, "replay completed partially: %zu errors (see errors.txt)\n", errors.size());
    }
    std::printf("replay: %zu frames -> %s\n", log.steps.size(), out_dir.c_str());
    return kExitOk;
}

int cmd_export_region_store(const std::string& checkpoint_dir, int region_id,
                            const std::string& out_path) {
    try {
        PolicyHandle policy = load_checkpoint(checkpoint_dir);
        auto it = policy.stores.find(region_id);
        if (it == policy.stores.end()) {
            std::fprintf(stderr, "missing artifacts: checkpoint has no regional store for region %d\n",
                         region_id);
            return kExitMissingArtifacts;
        }
        write_text_file(out_path, it->second.to_json_string() + "\n");
        std::printf("exported regional store %d -> %s\n", region_id, out_path.c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "missing artifacts: %s\n", e.what());
        return kExitMissingArtifacts;
    }
}

int cmd_import_region_store(const std::string& checkpoint_dir, const std::string& store_path) {
    try {
        RegionalStore store = RegionalStore::from_json_string(read_text_file(store_path));
        std::string manifest_path = checkpoint_dir + "/manifest.json";
        json manifest = json::parse(read_text_file(manifest_path));
        write_text_file(checkpoint_dir + "/regional_store_" + std::to_string(store.region_id) + ".json",
                        store.to_json_string());
        auto ids = manifest.at("store_region_ids").get<std::vector<int>>();
        if (std::find(ids.begin(), ids.end(), store.region_id) == ids.end())
            ids.push_back(store.region_id);
        std::sort(ids.begin(), ids.end());
        manifest["store_region_ids"] = ids;
        write_text_file(manifest_path, manifest.dump(2) + "\n");
        std::printf("imported regional store %d into %s\n", store.region_id, checkpoint_dir.c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "missing artifacts: %s\n", e.what());
        return kExitMissingArtifacts;
    }
}

}  // namespace dle
