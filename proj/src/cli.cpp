#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "genemut/datagen.hpp"
#include "genemut/errors.hpp"
#include "genemut/format.hpp"
#include "genemut/pipeline.hpp"
#include "genemut/selfcheck.hpp"

namespace genemut {

namespace fs = std::filesystem;

namespace {

RunConfig assemble_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_file(config_path, cfg);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw IngestionError("--set wants key=value, got '" + kv + "'");
        }
        cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

std::vector<std::size_t> all_indices(const Dataset& ds) {
    std::vector<std::size_t> idx(ds.slides.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

int run_gen_data(const std::string& out, SynthConfig synth, std::size_t group_count,
                 std::size_t group_size, double rho) {
    if (group_count > 0) {
        synth.groups = default_groups(synth.num_genes, group_count, group_size, rho);
    }
    Dataset ds = generate_dataset(synth);
    save_dataset(out, ds);
    std::cout << "wrote " << ds.slides.size() << " slides, K=" << synth.num_genes
              << ", C=" << synth.num_cancers << " to " << out << "\n";
    return 0;
}

int run_build_graph(const std::string& config_path,
                    const std::vector<std::string>& overrides) {
    RunConfig cfg = assemble_config(config_path, overrides);
    Dataset ds = load_dataset(cfg.dataset_dir);
    GeneGraph graph = build_graph(ds, cfg, all_indices(ds));
    fs::create_directories(cfg.out_dir);
    graph.initial_features.save_file((fs::path(cfg.out_dir) / "node_features.ten").string());
    graph.delta.save_file((fs::path(cfg.out_dir) / "delta.ten").string());
    graph.e_adj.save_file((fs::path(cfg.out_dir) / "e_adj.ten").string());
    graph.e_con.save_file((fs::path(cfg.out_dir) / "e_con.ten").string());
    std::cout << "graph: K=" << graph.vocab.num_genes()
              << " C=" << graph.vocab.num_cancers() << " d=" << cfg.dim << " -> "
              << cfg.out_dir << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    RunConfig cfg = assemble_config(config_path, overrides);
    Dataset ds = load_dataset(cfg.dataset_dir);
    RunRecord record = train(cfg, ds);
    write_run_outputs(cfg.out_dir, record);
    std::vector<double> of1s;
    for (const auto& rep : record.fold_reports) of1s.push_back(rep.of1);
    const FoldSummary s = mean_std(of1s);
    std::cout << "trained " << record.fold_reports.size() << " fold(s), OF1 "
              << fmt_double(s.mean) << " +/- " << fmt_double(s.stddev) << " in "
              << fmt_double(record.wall_seconds) << "s -> " << cfg.out_dir << "\n";
    return 0;
}

int run_eval(const std::string& config_path, const std::vector<std::string>& overrides,
             const std::string& checkpoint) {
    RunConfig cfg = assemble_config(config_path, overrides);
    Dataset ds = load_dataset(cfg.dataset_dir);
    ParamStore params = ParamStore::load_file(checkpoint);
    GeneGraph graph = build_graph(ds, cfg, all_indices(ds));
    EvalReport report = evaluate(params, cfg, graph, ds, all_indices(ds), -1);
    fs::create_directories(cfg.out_dir);
    write_metrics_csv((fs::path(cfg.out_dir) / "metrics.csv").string(), {report});
    write_summary_csv((fs::path(cfg.out_dir) / "summary.csv").string(), {report});
    std::cout << "evaluated " << ds.slides.size() << " slides: OF1 "
              << fmt_double(report.of1) << ", overall AUC "
              << fmt_double(report.overall_auc) << " -> " << cfg.out_dir << "\n";
    return 0;
}

int run_ablate(const std::string& config_path, const std::vector<std::string>& overrides,
               const std::string& axes_arg) {
    RunConfig cfg = assemble_config(config_path, overrides);
    Dataset ds = load_dataset(cfg.dataset_dir);
    std::vector<std::string> axes;
    std::string cur;
    for (char ch : axes_arg + ",") {
        if (ch == ',') {
            if (!cur.empty()) axes.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (axes.empty()) throw IngestionError("ablate: no axes given");
    const auto rows = ablation_suite(ds, cfg, axes, cfg.out_dir);
    fs::create_directories(cfg.out_dir);
    write_ablation_csv((fs::path(cfg.out_dir) / "ablation.csv").string(), rows);
    for (const auto& r : rows) {
        std::cout << r.axis << "/" << r.variant << ": OF1 " << fmt_double(r.of1_mean)
                  << " +/- " << fmt_double(r.of1_std) << "\n";
    }
    return 0;
}

int run_export_attention(const std::string& config_path,
                         const std::vector<std::string>& overrides,
                         const std::string& checkpoint, const std::string& slide_id) {
    RunConfig cfg = assemble_config(config_path, overrides);
    Dataset ds = load_dataset(cfg.dataset_dir);
    ParamStore params = ParamStore::load_file(checkpoint);
    GeneGraph graph = build_graph(ds, cfg, all_indices(ds));
    const SlideSample* slide = nullptr;
    for (const auto& s : ds.slides) {
        if (s.slide_id == slide_id) {
            slide = &s;
            break;
        }
    }
    if (!slide) throw IngestionError("export-attention: unknown slide " + slide_id);
    SlideEval ev = eval_slide(params, cfg, graph, slide->features);
    if (ev.attention.numel() == 0) {
        throw ContractError(
            "export-attention: the matrix-baseline fusion has no attention map");
    }
    fs::create_directories((fs::path(cfg.out_dir) / "attention").string());
    const std::string path =
        (fs::path(cfg.out_dir) / "attention" / (slide_id + ".csv")).string();
    write_attention_csv(path, ds.vocab, ev.attention, slide->coords);
    std::cout << "wrote " << path << " (" << ev.attention.shape[0] << " genes x "
              << ev.attention.shape[1] << " patches)\n";
    return 0;
}

int run_check(const CheckOptions& opt) {
    const auto results = run_self_checks(opt);
    bool all_pass = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail
                  << " (" << fmt_double(r.seconds) << "s)\n";
        all_pass = all_pass && r.pass;
    }
    std::cout << (all_pass ? "all checks passed\n" : "CHECKS FAILED\n");
    return all_pass ? 0 : 1;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"gene-mutation prediction from slide patch features with "
                 "knowledge-graph gene priors"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    SynthConfig synth;
    std::string gen_out = "dataset";
    std::size_t group_count = 5, group_size = 4;
    double rho = 0.9;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--seed", synth.seed, "RNG seed");
    gen->add_option("--slides", synth.num_slides, "number of slides");
    gen->add_option("--genes", synth.num_genes, "number of genes");
    gen->add_option("--cancers", synth.num_cancers, "number of cancer types");
    gen->add_option("--dim", synth.feature_dim, "patch feature dimension");
    gen->add_option("--patches-min", synth.patches_min, "min patches per slide");
    gen->add_option("--patches-max", synth.patches_max, "max patches per slide");
    gen->add_option("--groups", group_count, "number of co-mutation groups");
    gen->add_option("--group-size", group_size, "genes per group");
    gen->add_option("--rho", rho, "within-group mutation probability");
    gen->add_option("--base-rate", synth.base_rate, "ungrouped mutation rate");
    gen->add_option("--group-rate", synth.group_rate, "group activation rate");
    gen->add_option("--signal", synth.signal_strength, "feature signal strength");
    gen->add_option("--hit-fraction", synth.patch_hit_fraction,
                    "fraction of patches carrying each gene's signal");
    gen->add_option("--weak-member-scale", synth.weak_member_scale,
                    "signal factor for non-anchor group members");
    gen->add_option("--cancer-signal", synth.cancer_signal,
                    "tissue-wide cancer-type shift strength");

    // shared config plumbing
    std::string config_path;
    std::vector<std::string> overrides;
    auto add_config_opts = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value config file");
        cmd->add_option("--set", overrides, "override, e.g. --set epochs=50");
        cmd->add_option_function<std::string>(
            "--dataset", [&](const std::string& v) { overrides.push_back("dataset=" + v); },
            "dataset directory");
        cmd->add_option_function<std::string>(
            "--out", [&](const std::string& v) { overrides.push_back("out=" + v); },
            "output directory");
        cmd->add_option_function<std::string>(
            "--seed", [&](const std::string& v) { overrides.push_back("seed=" + v); },
            "run seed");
        cmd->add_option_function<std::string>(
            "--loss", [&](const std::string& v) { overrides.push_back("loss=" + v); },
            "comparative|bce");
    };

    auto* build = app.add_subcommand("build-graph", "build and export the gene graph");
    add_config_opts(build);

    auto* tr = app.add_subcommand("train", "train with k-fold cross-validation");
    add_config_opts(tr);

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string checkpoint;
    ev->add_option("--checkpoint", checkpoint, "fold<i>.params file")->required();
    add_config_opts(ev);

    auto* ab = app.add_subcommand("ablate", "run an ablation grid");
    std::string axes = "encodings,association,fusion,loss";
    ab->add_option("--axes", axes, "comma list of encodings,association,fusion,loss");
    add_config_opts(ab);

    auto* ex = app.add_subcommand("export-attention", "dump a slide's attention map");
    std::string ex_checkpoint, ex_slide;
    ex->add_option("--checkpoint", ex_checkpoint, "fold<i>.params file")->required();
    ex->add_option("--slide", ex_slide, "slide id")->required();
    add_config_opts(ex);

    auto* ck = app.add_subcommand("check", "run the oracle and invariant suite");
    CheckOptions check_opt;
    ck->add_option("--seed", check_opt.seed, "suite seed");
    ck->add_option("--fd-seeds", check_opt.fd_seeds, "gradient-check seeds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return run_gen_data(gen_out, synth, group_count, group_size, rho);
        if (build->parsed()) return run_build_graph(config_path, overrides);
        if (tr->parsed()) return run_train(config_path, overrides);
        if (ev->parsed()) return run_eval(config_path, overrides, checkpoint);
        if (ab->parsed()) return run_ablate(config_path, overrides, axes);
        if (ex->parsed()) {
            return run_export_attention(config_path, overrides, ex_checkpoint, ex_slide);
        }
        if (ck->parsed()) return run_check(check_opt);
    } catch (const IngestionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace genemut
