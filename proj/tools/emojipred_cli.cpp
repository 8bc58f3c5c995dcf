#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "emojipred/config.hpp"
#include "emojipred/corpus.hpp"
#include "emojipred/emoji.hpp"
#include "emojipred/eval.hpp"
#include "emojipred/fusion.hpp"
#include "emojipred/text_model.hpp"
#include "emojipred/vision.hpp"

namespace fs = std::filesystem;
using namespace emojipred;

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream in(s);
    std::string field;
    while (std::getline(in, field, ','))
        if (!field.empty()) out.push_back(std::stoi(field));
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::istringstream in(s);
    std::string field;
    while (std::getline(in, field, ','))
        if (!field.empty()) out.push_back(std::stod(field));
    return out;
}

fusion::RunSystemConfig system_config(const cli::RunConfig& cfg) {
    fusion::RunSystemConfig sc;
    sc.text.dim = cfg.get_int("text_dim");
    sc.text.lr0 = cfg.get_double("text_lr0");
    sc.text.epochs = cfg.get_int("text_epochs");
    sc.text.min_count = cfg.get_int("text_min_count");
    sc.text.patience = cfg.get_int("text_patience");
    sc.text.normalize_embedding = cfg.get_bool("text_normalize_embedding");
    sc.text.seed = cfg.get_seed("train_seed");
    sc.logreg.max_iters = cfg.get_int("logreg_max_iters");
    sc.logreg.grad_tol = cfg.get_double("logreg_grad_tol");
    sc.logreg.init_scale = cfg.get_double("logreg_init_scale");
    sc.logreg.seed = cfg.get_seed("train_seed");
    sc.lambda_grid = parse_double_list(cfg.get("lambda_grid"));
    sc.featurizer_grid = cfg.get_int("featurizer_grid");
    sc.standardize_features = cfg.get_bool("standardize_features");
    return sc;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
}

void write_metrics_outputs(const eval::MetricsReport& metrics,
                           const eval::ConfusionMatrix& cm, const std::string& mode,
                           const fs::path& out_dir) {
    fs::create_directories(out_dir);
    nlohmann::json j = nlohmann::json::parse(eval::metrics_to_json(metrics));
    j["mode"] = mode;
    write_text_file(out_dir / "metrics.json", j.dump(2) + "\n");
    write_text_file(out_dir / "confusion.csv",
                    eval::confusion_to_csv(cm, metrics.labels));
    eval::confusion_to_pgm(cm, (out_dir / "confusion.pgm").string());
}

corpus::DatasetSplit load_split_dir(const std::string& dir) {
    corpus::DatasetSplit split;
    split.train = corpus::load_posts(dir + "/train.jsonl");
    split.dev = corpus::load_posts(dir + "/dev.jsonl");
    if (fs::exists(dir + "/test.jsonl"))
        split.test = corpus::load_posts(dir + "/test.jsonl");
    return split;
}

double pct(double v) { return 100.0 * v; }

int cmd_synth(const std::string& out, int k, int n, const std::string& text_classes,
              const std::string& image_classes, double noise_rate, uint64_t seed,
              bool raw) {
    corpus::SyntheticSpec spec;
    spec.k = k;
    spec.n = n;
    spec.text_signal_classes = parse_int_list(text_classes);
    spec.image_signal_classes = parse_int_list(image_classes);
    spec.noise_rate = noise_rate;
    spec.seed = seed;
    auto posts = corpus::generate_synthetic(spec);
    if (raw) {
        // Raw corpus: label embedded in the text, for `prepare` to extract.
        for (auto& p : posts) {
            p.text += " " + p.label;
            p.label.clear();
        }
    }
    corpus::save_posts(posts, out);
    std::cout << "wrote " << posts.size() << " posts to " << out << "\n";
    return 0;
}

int cmd_prepare(const std::string& in, const std::string& out_dir,
                const cli::RunConfig& cfg) {
    auto raw = corpus::load_posts(in);
    std::vector<corpus::Post> labeled;
    size_t rejected = 0;
    for (auto& p : raw) {
        if (!p.label.empty()) {
            labeled.push_back(p);
            continue;
        }
        auto res = corpus::extract_label(p.text);
        if (!res.accepted) {
            ++rejected;
            continue;
        }
        p.text = res.clean_text;
        p.label = res.emoji;
        labeled.push_back(p);
    }
    if (labeled.empty()) throw std::runtime_error("prepare: no posts survive filtering");

    auto vocab = corpus::build_label_vocab(labeled, cfg.get_int("k"));
    auto kept = corpus::filter_topk(labeled, vocab);
    if (kept.empty()) throw std::runtime_error("prepare: no posts in the top-k classes");
    auto split = corpus::split(kept, cfg.get_seed("split_seed"));

    fs::create_directories(out_dir);
    corpus::save_posts(split.train, out_dir + "/train.jsonl");
    corpus::save_posts(split.dev, out_dir + "/dev.jsonl");
    corpus::save_posts(split.test, out_dir + "/test.jsonl");
    corpus::save_vocab(vocab, out_dir + "/vocab.json");
    cfg.write(out_dir + "/config_effective.txt");

    std::printf("kept %zu of %zu labeled posts (%zu rejected by filters)\n",
                kept.size(), labeled.size() + rejected, rejected);
    std::printf("split: train=%zu dev=%zu test=%zu\n", split.train.size(),
                split.dev.size(), split.test.size());
    long long total = 0;
    for (long long c : vocab.counts) total += c;
    std::printf("%-6s %10s %8s\n", "label", "count", "%");
    for (int i = 0; i < vocab.k(); ++i)
        std::printf("%-6s %10lld %7.2f%%\n", vocab.labels[i].c_str(), vocab.counts[i],
                    100.0 * double(vocab.counts[i]) / double(total));
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& mode_str,
              const std::string& out_dir, const cli::RunConfig& cfg,
              const std::string& embeddings_path) {
    auto split = load_split_dir(data_dir);
    auto vocab = corpus::load_vocab(data_dir + "/vocab.json");
    auto mode = fusion::modality_from_string(mode_str);

    vision::PrecomputedEmbeddingTable table;
    const vision::PrecomputedEmbeddingTable* table_ptr = nullptr;
    if (!embeddings_path.empty()) {
        table = vision::load_embedding_table(embeddings_path);
        table_ptr = &table;
    }

    auto run = fusion::run_system(mode, split, vocab, system_config(cfg), table_ptr);
    fusion::save_pipeline(run.pipeline, out_dir);
    cfg.write(out_dir + "/config_effective.txt");

    std::printf("trained %s pipeline, lambda=%g\n", fusion::to_string(mode),
                run.best_lambda);
    if (!split.test.empty())
        std::printf("test macro P/R/F1: %.1f / %.1f / %.1f\n",
                    pct(run.test_metrics.macro.precision),
                    pct(run.test_metrics.macro.recall), pct(run.test_metrics.macro.f1));
    return 0;
}

int cmd_eval(const std::string& model_dir, const std::string& data_path,
             const std::string& out_dir, const std::string& embeddings_path) {
    auto pipe = fusion::load_pipeline(model_dir);
    auto posts = corpus::load_posts(data_path);

    vision::PrecomputedEmbeddingTable table;
    const vision::PrecomputedEmbeddingTable* table_ptr = nullptr;
    if (!embeddings_path.empty()) {
        table = vision::load_embedding_table(embeddings_path);
        table_ptr = &table;
    }

    std::vector<int> gold, pred;
    for (const auto& p : posts) {
        int g = pipe.labels.index_of(p.label);
        if (g < 0)
            throw std::runtime_error("eval: post " + p.id +
                                     " has a label outside the model vocabulary");
        auto probs = fusion::pipeline_predict(pipe, p, table_ptr);
        int best = 0;
        for (int i = 1; i < int(probs.size()); ++i)
            if (probs[i] > probs[best]) best = i;
        gold.push_back(g);
        pred.push_back(best);
    }
    auto cm = eval::confusion_matrix(gold, pred, pipe.labels.k());
    auto metrics = eval::metrics_report(cm, pipe.labels.labels);
    write_metrics_outputs(metrics, cm, fusion::to_string(pipe.mode), out_dir);
    std::printf("%s: n=%lld macro P/R/F1: %.1f / %.1f / %.1f\n",
                fusion::to_string(pipe.mode), metrics.n, pct(metrics.macro.precision),
                pct(metrics.macro.recall), pct(metrics.macro.f1));
    return 0;
}

int cmd_predict(const std::string& model_dir, const std::string& text,
                const std::string& image, int m) {
    auto pipe = fusion::load_pipeline(model_dir);
    corpus::Post post;
    post.id = "cli";
    post.text = text;
    if (!image.empty()) post.image_ref = image;
    auto feats = fusion::pipeline_features(pipe, post, nullptr);
    auto top = fusion::predict_topk(pipe.classifier, feats, m);
    for (const auto& [idx, prob] : top)
        std::printf("%s\t%.6f\n", pipe.labels.labels[idx].c_str(), prob);
    return 0;
}

int cmd_saliency(const std::string& model_dir, const std::string& image_path,
                 const std::string& out_dir, const std::string& classes_arg) {
    auto pipe = fusion::load_pipeline(model_dir);
    if (!pipe.vision_head)
        throw std::runtime_error(
            "saliency: model has no featurizer-space vision head (train a visual "
            "pipeline on image posts)");
    auto img = vision::load_image(image_path);
    auto maps = vision::compute_feature_maps(img, pipe.featurizer_grid);

    std::vector<int> classes = parse_int_list(classes_arg);
    if (classes.empty()) {
        // Default: the four most likely predicted classes.
        auto probs = vision::vision_head_predict(*pipe.vision_head,
                                                 vision::global_average_pool(maps));
        std::vector<int> order(probs.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return probs[a] > probs[b]; });
        for (int i = 0; i < std::min<int>(4, int(order.size())); ++i)
            classes.push_back(order[i]);
    }
    fs::create_directories(out_dir);
    for (int c : classes) {
        auto cam = vision::class_activation_map(maps, *pipe.vision_head, c);
        std::string path = out_dir + "/cam_" + std::to_string(c) + ".pgm";
        vision::render_heatmap(cam, path);
        std::printf("class %d (%s) -> %s\n", c, pipe.labels.labels.at(c).c_str(),
                    path.c_str());
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& run_files,
               const std::string& baseline_data_dir, uint64_t baseline_seed,
               const std::string& out_path) {
    struct Row {
        std::string name;
        double p, r, f1;
    };
    std::vector<Row> rows;
    double tex_f1 = -1, tex_p = -1, tex_r = -1;
    double mul_f1 = -1, mul_p = -1, mul_r = -1;

    if (!baseline_data_dir.empty()) {
        auto split = load_split_dir(baseline_data_dir);
        auto vocab = corpus::load_vocab(baseline_data_dir + "/vocab.json");
        std::vector<int> y_train, y_test;
        for (const auto& p : split.train) y_train.push_back(vocab.index_of(p.label));
        for (const auto& p : split.test) y_test.push_back(vocab.index_of(p.label));

        int maj = eval::majority_baseline(y_train, vocab.k());
        std::vector<int> pred(y_test.size(), maj);
        auto m = eval::macro_prf(eval::confusion_matrix(y_test, pred, vocab.k()));
        rows.push_back({"Maj", pct(m.precision), pct(m.recall), pct(m.f1)});

        eval::WeightedRandomBaseline wr(y_train, vocab.k(), baseline_seed);
        for (auto& v : pred) v = wr.sample();
        m = eval::macro_prf(eval::confusion_matrix(y_test, pred, vocab.k()));
        rows.push_back({"W.R.", pct(m.precision), pct(m.recall), pct(m.f1)});
    }

    for (const auto& file : run_files) {
        std::ifstream f(file);
        if (!f) throw std::runtime_error("report: cannot open " + file);
        nlohmann::json j = nlohmann::json::parse(f);
        Row row;
        row.name = j.value("mode", file);
        row.p = pct(j.at("macro").at("precision").get<double>());
        row.r = pct(j.at("macro").at("recall").get<double>());
        row.f1 = pct(j.at("macro").at("f1").get<double>());
        if (row.name == "textual") {
            tex_p = row.p;
            tex_r = row.r;
            tex_f1 = row.f1;
        }
        if (row.name == "multimodal") {
            mul_p = row.p;
            mul_r = row.r;
            mul_f1 = row.f1;
        }
        rows.push_back(row);
    }

    nlohmann::json out = nlohmann::json::array();
    std::printf("%-12s %8s %8s %8s\n", "system", "P", "R", "F1");
    for (const auto& r : rows) {
        std::printf("%-12s %8.1f %8.1f %8.1f\n", r.name.c_str(), r.p, r.r, r.f1);
        out.push_back({{"system", r.name}, {"P", r.p}, {"R", r.r}, {"F1", r.f1}});
    }
    if (tex_f1 > 0 && mul_f1 > 0) {
        double ip = eval::relative_improvement(mul_p, tex_p);
        double ir = eval::relative_improvement(mul_r, tex_r);
        double if1 = eval::relative_improvement(mul_f1, tex_f1);
        std::printf("%-12s %8.1f %8.1f %8.1f\n", "%", ip, ir, if1);
        out.push_back({{"system", "%"}, {"P", ip}, {"R", ir}, {"F1", if1}});
    }
    if (!out_path.empty()) write_text_file(out_path, out.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal emoji prediction pipeline"};
    app.require_subcommand(1);

    std::string config_file;
    std::vector<std::string> overrides;
    app.add_option("--config", config_file, "key=value config file");
    app.add_option("--set", overrides, "config override key=value (wins over file)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    std::string synth_out, synth_text_classes, synth_image_classes;
    int synth_k = 10, synth_n = 1000;
    double synth_noise = 0.1;
    uint64_t synth_seed = 1;
    bool synth_raw = false;
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--k", synth_k);
    synth->add_option("--n", synth_n);
    synth->add_option("--text-classes", synth_text_classes,
                      "comma-separated class ids carrying a text cue");
    synth->add_option("--image-classes", synth_image_classes,
                      "comma-separated class ids carrying an image cue");
    synth->add_option("--noise-rate", synth_noise);
    synth->add_option("--seed", synth_seed);
    synth->add_flag("--raw", synth_raw,
                    "embed the emoji in the text and drop the label field");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "filter, label, split a raw corpus");
    std::string prep_in, prep_out;
    prepare->add_option("--in", prep_in)->required();
    prepare->add_option("--out-dir", prep_out)->required();

    // train
    auto* train = app.add_subcommand("train", "train a unimodal or multimodal system");
    std::string train_data, train_mode, train_out, train_embeddings;
    train->add_option("--data-dir", train_data)->required();
    train->add_option("--mode", train_mode, "textual|visual|multimodal")->required();
    train->add_option("--out", train_out)->required();
    train->add_option("--embeddings", train_embeddings,
                      "precomputed visual embedding table");

    // eval
    auto* evalc = app.add_subcommand("eval", "evaluate a trained pipeline");
    std::string eval_model, eval_data, eval_out, eval_embeddings;
    evalc->add_option("--model", eval_model)->required();
    evalc->add_option("--data", eval_data)->required();
    evalc->add_option("--out-dir", eval_out)->required();
    evalc->add_option("--embeddings", eval_embeddings);

    // predict
    auto* predict = app.add_subcommand("predict", "top-m emojis for one post");
    std::string pred_model, pred_text, pred_image;
    int pred_m = 4;
    predict->add_option("--model", pred_model)->required();
    predict->add_option("--text", pred_text);
    predict->add_option("--image", pred_image);
    predict->add_option("-m,--top", pred_m);

    // saliency
    auto* saliency = app.add_subcommand("saliency", "class activation maps for an image");
    std::string sal_model, sal_image, sal_out, sal_classes;
    saliency->add_option("--model", sal_model)->required();
    saliency->add_option("--image", sal_image)->required();
    saliency->add_option("--out-dir", sal_out)->required();
    saliency->add_option("--classes", sal_classes,
                         "comma-separated class ids (default: top-4 predicted)");

    // report
    auto* report = app.add_subcommand("report", "tabulate runs and improvement row");
    std::vector<std::string> report_runs;
    std::string report_baseline_dir, report_out;
    report->add_option("--runs", report_runs, "metrics.json files")->expected(-1);
    report->add_option("--baseline-data", report_baseline_dir,
                       "prepared data dir for Maj/W.R. baseline rows");
    report->add_option("--out", report_out);

    // Let --config/--set appear after the subcommand name as well.
    for (CLI::App* sc : app.get_subcommands([](const CLI::App*) { return true; }))
        sc->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        cli::RunConfig cfg;
        if (!config_file.empty()) cfg.load_file(config_file);
        cfg.apply_overrides(overrides);

        if (*synth)
            return cmd_synth(synth_out, synth_k, synth_n, synth_text_classes,
                             synth_image_classes, synth_noise, synth_seed, synth_raw);
        if (*prepare) return cmd_prepare(prep_in, prep_out, cfg);
        if (*train)
            return cmd_train(train_data, train_mode, train_out, cfg, train_embeddings);
        if (*evalc) return cmd_eval(eval_model, eval_data, eval_out, eval_embeddings);
        if (*predict) return cmd_predict(pred_model, pred_text, pred_image, pred_m);
        if (*saliency) return cmd_saliency(sal_model, sal_image, sal_out, sal_classes);
        if (*report)
            return cmd_report(report_runs, report_baseline_dir,
                              cfg.get_seed("baseline_seed"), report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
