// Copyright 2026 The metrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// metrec command line: prepare, train, evaluate, recommend.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "metrec/json_io.hpp"
#include "metrec/metrec.hpp"

namespace {

using namespace metrec;

struct DataOptions {
    std::string ratings;
    std::string format = "ml1m";
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
    cmd->add_option("--ratings", opts.ratings, "Ratings file")->required();
    cmd->add_option("--format", opts.format, "Ratings format: ml1m (UserID::MovieID::Rating::Timestamp), csv or tsv");
}

Dataset load_dataset(const DataOptions& opts) {
    const RatingFormat format = parse_rating_format(opts.format);
    std::ifstream in(opts.ratings);
    if (!in) {
        throw Error("cannot open ratings file: " + opts.ratings);
    }
    ParseResult parsed = parse_ratings(in, format);
    if (parsed.duplicates > 0) {
        std::cerr << "warning: " << parsed.duplicates << " duplicate (user, item) records; kept the latest\n";
    }
    return build_dataset(std::move(parsed.interactions));
}

ImplicitSplit load_manifest(const std::string& path, const Dataset& ds) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open manifest: " + path);
    }
    return read_manifest(in, ds);
}

Model load_model(const std::string& path, const Dataset& ds) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open checkpoint: " + path);
    }
    Model model = load_checkpoint(in);
    if (model.features.n_users != ds.n_users() || model.features.n_items != ds.n_items()) {
        throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                              "checkpoint shape mismatch: checkpoint expects " +
                                  std::to_string(model.features.n_users) + " users and " +
                                  std::to_string(model.features.n_items) + " items, dataset has " +
                                  std::to_string(ds.n_users()) + " and " + std::to_string(ds.n_items()));
    }
    return model;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path);
    }
    out << content;
    if (!out) {
        throw Error("failed writing " + path);
    }
}

std::vector<std::size_t> parse_dims(const std::string& text, const std::string& key) {
    std::vector<std::size_t> dims;
    if (text.empty()) {
        return dims;
    }
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        std::size_t v = 0;
        if (!detail::parse_number(part, v)) {
            throw ConfigError(key, key + " must be a comma-separated list of positive integers");
        }
        dims.push_back(v);
    }
    return dims;
}

// ---------------------------------------------------------------- prepare

struct PrepareOptions {
    DataOptions data;
    double threshold = 4.0;
    double ratio = 0.8;
    std::uint64_t seed = 42;
    std::string manifest;
};

int run_prepare(const PrepareOptions& opts) {
    if (!(opts.threshold >= 1.0 && opts.threshold <= 5.0)) {
        throw ConfigError("rating_threshold", "rating_threshold must lie in [1, 5]");
    }
    if (!(opts.ratio > 0.0 && opts.ratio < 1.0)) {
        throw ConfigError("train_ratio", "train_ratio must lie in (0, 1)");
    }
    const Dataset ds = load_dataset(opts.data);
    const auto positives = binarize(ds, opts.threshold);
    const ImplicitSplit split = split_train_test(positives, ds.n_items(), opts.ratio, derive_seed(opts.seed, "split"));
    std::ostringstream manifest;
    write_manifest(manifest, ds, split);
    write_file(opts.manifest, manifest.str());

    std::size_t test_users = 0;
    for (const auto& t : split.test) test_users += t.empty() ? 0 : 1;
    std::cout << "users " << ds.n_users() << "\n"
              << "items " << ds.n_items() << "\n"
              << "interactions " << ds.interactions().size() << "\n"
              << "positives " << split.train_size() + split.test_size() << "\n"
              << "train " << split.train_size() << "\n"
              << "test " << split.test_size() << "\n"
              << "test_users " << test_users << "\n";
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    DataOptions data;
    std::string manifest;
    std::string config_file;
    std::string checkpoint;
    std::string log;
    std::string config_out;

    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs, steps_per_epoch, batch_size, embedding_dim;
    std::optional<double> learning_rate, adam_beta1, adam_beta2, adam_epsilon, margin;
    std::optional<double> rating_threshold, train_ratio, clip_radius;
    std::optional<std::string> optimizer, activation, user_hidden_dims, item_hidden_dims;
};

TrainConfig resolve_config(const TrainOptions& opts) {
    TrainConfig config;
    if (!opts.config_file.empty()) {
        std::ifstream in(opts.config_file);
        if (!in) {
            throw Error("cannot open config: " + opts.config_file);
        }
        Json j;
        try {
            j = Json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
        }
        config = config_from_json(j, config);
    }
    if (opts.seed) config.seed = *opts.seed;
    if (opts.epochs) config.epochs = *opts.epochs;
    if (opts.steps_per_epoch) config.steps_per_epoch = *opts.steps_per_epoch;
    if (opts.batch_size) config.batch_size = *opts.batch_size;
    if (opts.embedding_dim) config.embedding_dim = *opts.embedding_dim;
    if (opts.learning_rate) config.learning_rate = *opts.learning_rate;
    if (opts.adam_beta1) config.adam_beta1 = *opts.adam_beta1;
    if (opts.adam_beta2) config.adam_beta2 = *opts.adam_beta2;
    if (opts.adam_epsilon) config.adam_epsilon = *opts.adam_epsilon;
    if (opts.margin) config.margin = *opts.margin;
    if (opts.rating_threshold) config.rating_threshold = *opts.rating_threshold;
    if (opts.train_ratio) config.train_ratio = *opts.train_ratio;
    if (opts.clip_radius) {
        if (*opts.clip_radius == 0.0) config.clip_radius.reset();
        else config.clip_radius = *opts.clip_radius;
    }
    if (opts.optimizer) config.optimizer = parse_optimizer(*opts.optimizer);
    if (opts.activation) config.activation = parse_activation(*opts.activation);
    if (opts.user_hidden_dims) config.user_hidden_dims = parse_dims(*opts.user_hidden_dims, "user_hidden_dims");
    if (opts.item_hidden_dims) config.item_hidden_dims = parse_dims(*opts.item_hidden_dims, "item_hidden_dims");
    config.validate();
    return config;
}

int run_train(const TrainOptions& opts) {
    const TrainConfig config = resolve_config(opts);
    const std::string resolved = config_to_json(config).dump(2);
    std::cout << resolved << std::endl;
    if (!opts.config_out.empty()) {
        write_file(opts.config_out, resolved + "\n");
    }

    const Dataset ds = load_dataset(opts.data);
    const ImplicitSplit split =
        opts.manifest.empty()
            ? split_train_test(binarize(ds, config.rating_threshold), ds.n_items(), config.train_ratio,
                               derive_seed(config.seed, "split"))
            : load_manifest(opts.manifest, ds);

    std::ofstream log;
    if (!opts.log.empty()) {
        log.open(opts.log);
        if (!log) {
            throw Error("cannot write " + opts.log);
        }
        log << "epoch,mean_loss,active_fraction,seconds\n";
    }
    const auto on_epoch = [&](const EpochStats& e) {
        char line[128];
        std::snprintf(line, sizeof line, "%zu,%.8f,%.6f,%.3f", e.epoch, e.mean_loss, e.active_fraction, e.seconds);
        if (log.is_open()) log << line << '\n' << std::flush;
        std::cerr << "epoch " << line << '\n';
    };
    const TrainResult result = train(config, split, {ds.n_users(), ds.n_items()}, on_epoch);

    std::ofstream out(opts.checkpoint, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + opts.checkpoint);
    }
    save_checkpoint(result.model, out);
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvalOptions {
    DataOptions data;
    std::string manifest;
    std::string checkpoint;
    std::string scorer = "model";
    std::vector<std::size_t> ks{5, 10, 20};
    std::size_t knn_neighbors = 50;
    std::uint64_t seed = 42;
    std::string out_csv;
    std::string out_json;
};

struct ScorerBundle {
    std::unique_ptr<Model> model;
    std::unique_ptr<Scorer> scorer;
    std::uint64_t hash = 0;
};

ScorerBundle make_scorer(const std::string& kind, const std::string& checkpoint, std::size_t knn_neighbors,
                         const Dataset& ds, const ImplicitSplit& split) {
    ScorerBundle bundle;
    bundle.hash = fnv1a(kind);
    if (kind == "model") {
        if (checkpoint.empty()) {
            throw ConfigError("checkpoint", "scorer=model requires --checkpoint");
        }
        bundle.model = std::make_unique<Model>(load_model(checkpoint, ds));
        const auto bytes = save_checkpoint(*bundle.model);
        bundle.hash = fnv1a(std::string_view(bytes.data(), bytes.size()), bundle.hash);
        bundle.scorer = std::make_unique<ModelScorer>(*bundle.model);
    } else if (kind == "popularity") {
        bundle.scorer = std::make_unique<PopularityScorer>(split);
    } else if (kind == "knn") {
        bundle.hash = fnv1a(std::to_string(knn_neighbors), bundle.hash);
        bundle.scorer = std::make_unique<UserKnnScorer>(split, knn_neighbors);
    } else {
        throw ConfigError("scorer", "scorer must be model, popularity or knn");
    }
    return bundle;
}

int run_evaluate(const EvalOptions& opts) {
    std::vector<std::size_t> ks = opts.ks;
    if (ks.empty() || !std::is_sorted(ks.begin(), ks.end()) ||
        std::adjacent_find(ks.begin(), ks.end()) != ks.end() || ks.front() == 0) {
        throw ConfigError("k", "K list must be nonempty, positive and strictly ascending");
    }
    const Dataset ds = load_dataset(opts.data);
    const ImplicitSplit split = load_manifest(opts.manifest, ds);
    const ScorerBundle bundle = make_scorer(opts.scorer, opts.checkpoint, opts.knn_neighbors, ds, split);

    EvaluateOptions eval_opts;
    eval_opts.seed = opts.seed;
    std::uint64_t hash = bundle.hash;
    for (std::size_t k : ks) hash = fnv1a(std::to_string(k) + ",", hash);
    eval_opts.config_hash = hash;
    const MetricsReport report = evaluate(*bundle.scorer, split, ks, eval_opts);

    std::ostringstream csv;
    write_metrics_csv(csv, report);
    if (opts.out_csv.empty()) {
        std::cout << csv.str();
    } else {
        write_file(opts.out_csv, csv.str());
    }
    if (!opts.out_json.empty()) {
        write_file(opts.out_json, metrics_to_json(report).dump(2) + "\n");
    }
    return 0;
}

// ---------------------------------------------------------------- recommend

struct RecommendOptions {
    DataOptions data;
    std::string manifest;
    std::string checkpoint;
    std::string scorer = "model";
    std::size_t knn_neighbors = 50;
    ExternalId user = 0;
    std::size_t k = 10;
};

int run_recommend(const RecommendOptions& opts) {
    if (opts.k == 0) {
        throw ConfigError("k", "k must be >= 1");
    }
    const Dataset ds = load_dataset(opts.data);
    const ImplicitSplit split = load_manifest(opts.manifest, ds);
    const auto user = ds.user_index(opts.user);
    if (!user) {
        throw DomainError("unknown user id " + std::to_string(opts.user));
    }
    const ScorerBundle bundle = make_scorer(opts.scorer, opts.checkpoint, opts.knn_neighbors, ds, split);

    std::vector<ItemId> candidates;
    for (ItemId i = 0; i < ds.n_items(); ++i) {
        if (!contains(split.train[*user], i)) candidates.push_back(i);
    }
    if (candidates.empty()) {
        return 0;
    }
    const auto scores = bundle.scorer->score(*user, candidates);
    const RankedList ranked = top_k(candidates, scores, opts.k, {}, *user);
    for (std::size_t r = 0; r < ranked.items.size(); ++r) {
        char score[32];
        std::snprintf(score, sizeof score, "%.6f", ranked.scores[r]);
        std::cout << r + 1 << '\t' << ds.external_item(ranked.items[r]) << '\t' << score << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"metrec: dual-tower metric-learning recommender"};
    app.require_subcommand(1);

    PrepareOptions prep;
    auto* prepare = app.add_subcommand("prepare", "Binarize ratings and write a train/test split manifest");
    add_data_options(prepare, prep.data);
    prepare->add_option("--threshold", prep.threshold, "Rating at or above which an item is positive");
    prepare->add_option("--ratio", prep.ratio, "Per-user train fraction");
    prepare->add_option("--seed", prep.seed, "Master seed");
    prepare->add_option("--manifest", prep.manifest, "Output manifest path")->required();

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "Train the two towers and write a checkpoint");
    add_data_options(train_cmd, tr.data);
    train_cmd->add_option("--manifest", tr.manifest, "Split manifest (default: split the ratings here)");
    train_cmd->add_option("--config", tr.config_file, "Flat JSON config; flags override its keys");
    train_cmd->add_option("--checkpoint", tr.checkpoint, "Output checkpoint path")->required();
    train_cmd->add_option("--log", tr.log, "Per-epoch CSV log");
    train_cmd->add_option("--config-out", tr.config_out, "Write the resolved config JSON here");
    train_cmd->add_option("--seed", tr.seed);
    train_cmd->add_option("--epochs", tr.epochs);
    train_cmd->add_option("--steps-per-epoch", tr.steps_per_epoch);
    train_cmd->add_option("--batch-size", tr.batch_size);
    train_cmd->add_option("--learning-rate", tr.learning_rate);
    train_cmd->add_option("--optimizer", tr.optimizer, "sgd or adam");
    train_cmd->add_option("--adam-beta1", tr.adam_beta1);
    train_cmd->add_option("--adam-beta2", tr.adam_beta2);
    train_cmd->add_option("--adam-epsilon", tr.adam_epsilon);
    train_cmd->add_option("--margin", tr.margin);
    train_cmd->add_option("--embedding-dim", tr.embedding_dim);
    train_cmd->add_option("--user-hidden-dims", tr.user_hidden_dims, "Comma-separated widths, empty for none");
    train_cmd->add_option("--item-hidden-dims", tr.item_hidden_dims, "Comma-separated widths, empty for none");
    train_cmd->add_option("--activation", tr.activation, "relu, tanh or identity");
    train_cmd->add_option("--threshold", tr.rating_threshold);
    train_cmd->add_option("--ratio", tr.train_ratio);
    train_cmd->add_option("--clip-radius", tr.clip_radius, "Max-norm of embeddings, 0 disables");

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Precision@K and Recall@K on the test split");
    add_data_options(eval_cmd, ev.data);
    eval_cmd->add_option("--manifest", ev.manifest)->required();
    eval_cmd->add_option("--checkpoint", ev.checkpoint);
    eval_cmd->add_option("--scorer", ev.scorer, "model, popularity or knn");
    eval_cmd->add_option("--k", ev.ks, "Comma-separated K list")->delimiter(',');
    eval_cmd->add_option("--knn-neighbors", ev.knn_neighbors);
    eval_cmd->add_option("--seed", ev.seed, "Seed recorded in the JSON report");
    eval_cmd->add_option("--out", ev.out_csv, "Metrics CSV path (default: stdout)");
    eval_cmd->add_option("--json", ev.out_json, "Metrics JSON path");

    RecommendOptions rec;
    auto* rec_cmd = app.add_subcommand("recommend", "Top-k items for one user");
    add_data_options(rec_cmd, rec.data);
    rec_cmd->add_option("--manifest", rec.manifest)->required();
    rec_cmd->add_option("--checkpoint", rec.checkpoint);
    rec_cmd->add_option("--scorer", rec.scorer, "model, popularity or knn");
    rec_cmd->add_option("--knn-neighbors", rec.knn_neighbors);
    rec_cmd->add_option("--user", rec.user, "External user id")->required();
    rec_cmd->add_option("--k", rec.k);

    CLI11_PARSE(app, argc, argv);

    try {
        if (prepare->parsed()) return run_prepare(prep);
        if (train_cmd->parsed()) return run_train(tr);
        if (eval_cmd->parsed()) return run_evaluate(ev);
        if (rec_cmd->parsed()) return run_recommend(rec);
    } catch (const metrec::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
