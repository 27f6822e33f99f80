#include "plae/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "plae/artifacts.hpp"

namespace plae {
namespace {

const std::map<std::string, std::string>& default_values() {
    static const std::map<std::string, std::string> defaults = {
        {"regime", "bae"},
        {"dataset", "synthetic"},
        {"out_dir", "runs/out"},
        // synthetic corpus
        {"synthetic_classes", "2"},
        {"synthetic_per_class", "100"},
        {"synthetic_test_per_class", "50"},
        {"synthetic_seed", "1"},
        // file-backed datasets
        {"mnist_train_images", ""},
        {"mnist_train_labels", ""},
        {"mnist_test_images", ""},
        {"mnist_test_labels", ""},
        {"cifar_train_files", ""},
        {"cifar_test_files", ""},
        {"svhn_train_files", ""},
        {"svhn_test_files", ""},
        // subsetting
        {"class_filter", ""},
        {"train_limit", "0"},
        {"test_limit", "0"},
        // training
        {"epochs", "90"},
        {"batch_size", "100"},
        {"embedding_dim", "300"},
        {"lr", "0.001"},
        {"beta1", "0.9"},
        {"beta2", "0.999"},
        {"adam_eps", "1e-8"},
        {"arch", "paper64"},
        {"policy", "none"},
        {"perceptual", "none"},
        {"perceptual_seed", "7"},
        {"seed_init", "1"},
        {"seed_shuffle", "2"},
        {"seed_augment", "3"},
        {"eval_every", "1"},
        {"checkpoint_every", "0"},
        // probe
        {"probe_solver", "logistic"},
        {"probe_lambda", "1e-4"},
        {"probe_iters", "500"},
        {"probe_lr", "0.25"},
        {"probe_seed", "0"},
    };
    return defaults;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (default_values().find(key) == default_values().end()) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    values_[key] = value;
    explicit_[key] = true;
}

void ExperimentConfig::finalize() {
    for (const auto& [key, value] : default_values()) {
        if (values_.find(key) == values_.end()) {
            values_[key] = value;
            explicit_[key] = false;
        }
    }
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text,
                                             const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" +
                              line + "'");
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects key=value, got '" + ov + "'");
        }
        cfg.set(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
    }
    cfg.finalize();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path,
                                             const std::vector<std::string>& overrides) {
    return from_text(read_text_file(path), overrides);
}

std::string ExperimentConfig::resolved_text() const {
    std::ostringstream os;
    for (const auto& [key, value] : values_) {
        os << key << " = " << value << "\n";
    }
    return os.str();
}

const std::string& ExperimentConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

bool ExperimentConfig::is_default(const std::string& key) const {
    auto it = explicit_.find(key);
    return it == explicit_.end() || !it->second;
}

std::string ExperimentConfig::dataset_name() const { return get("dataset"); }
std::string ExperimentConfig::out_dir() const { return get("out_dir"); }
int ExperimentConfig::checkpoint_every() const {
    return parse_int("checkpoint_every", get("checkpoint_every"));
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig cfg;
    cfg.regime = parse_regime(get("regime"));
    cfg.epochs = parse_int("epochs", get("epochs"));
    cfg.batch_size = parse_int("batch_size", get("batch_size"));
    cfg.embedding_dim = parse_int("embedding_dim", get("embedding_dim"));
    cfg.adam.lr = float(parse_double("lr", get("lr")));
    cfg.adam.beta1 = float(parse_double("beta1", get("beta1")));
    cfg.adam.beta2 = float(parse_double("beta2", get("beta2")));
    cfg.adam.eps = float(parse_double("adam_eps", get("adam_eps")));
    cfg.arch = ArchConfig::parse(get("arch"));
    cfg.seed_init = parse_u64("seed_init", get("seed_init"));
    cfg.seed_shuffle = parse_u64("seed_shuffle", get("seed_shuffle"));
    cfg.seed_augment = parse_u64("seed_augment", get("seed_augment"));
    cfg.eval_every = parse_int("eval_every", get("eval_every"));

    const std::string policy = get("policy");
    if (policy != "none") cfg.policy = parse_policy(policy);

    const std::string perceptual = get("perceptual");
    if (perceptual == "seeded-desk") {
        cfg.extractor = std::make_shared<PerceptualExtractor>(PerceptualExtractor::seeded(
            parse_u64("perceptual_seed", get("perceptual_seed")), ExtractorScale::Desk));
    } else if (perceptual == "seeded-full") {
        cfg.extractor = std::make_shared<PerceptualExtractor>(PerceptualExtractor::seeded(
            parse_u64("perceptual_seed", get("perceptual_seed")), ExtractorScale::Full));
    } else if (perceptual.rfind("file:", 0) == 0) {
        cfg.extractor = std::make_shared<PerceptualExtractor>(
            PerceptualExtractor::load(perceptual.substr(5)));
    } else if (perceptual != "none") {
        throw ConfigError("perceptual: expected none|seeded-desk|seeded-full|file:<path>, got '" +
                          perceptual + "'");
    }

    const std::string solver = get("probe_solver");
    if (solver == "logistic") {
        cfg.probe.solver = ProbeSolver::Logistic;
    } else if (solver == "linear_svm") {
        cfg.probe.solver = ProbeSolver::LinearSvm;
    } else {
        throw ConfigError("probe_solver: expected logistic|linear_svm, got '" + solver + "'");
    }
    cfg.probe.lambda = parse_double("probe_lambda", get("probe_lambda"));
    cfg.probe.max_iters = parse_int("probe_iters", get("probe_iters"));
    cfg.probe.learning_rate = parse_double("probe_lr", get("probe_lr"));
    cfg.probe.seed = parse_u64("probe_seed", get("probe_seed"));
    return cfg;
}

std::vector<std::string> ExperimentConfig::input_files() const {
    const std::string dataset = get("dataset");
    std::vector<std::string> files;
    if (dataset == "mnist") {
        for (const char* key :
             {"mnist_train_images", "mnist_train_labels", "mnist_test_images", "mnist_test_labels"}) {
            if (get(key).empty()) throw ConfigError(std::string(key) + ": required for dataset=mnist");
            files.push_back(get(key));
        }
    } else if (dataset == "cifar10" || dataset == "svhn") {
        const std::string prefix = dataset == "cifar10" ? "cifar" : "svhn";
        for (const std::string suffix : {"_train_files", "_test_files"}) {
            const std::string key = prefix + suffix;
            if (get(key).empty()) {
                throw ConfigError(key + ": required for dataset=" + dataset);
            }
            for (auto& f : split_list(get(key))) files.push_back(f);
        }
    } else if (dataset != "synthetic") {
        throw ConfigError("dataset: expected synthetic|mnist|cifar10|svhn, got '" + dataset + "'");
    }
    return files;
}

DataBundle ExperimentConfig::load_data() const {
    const std::string dataset = get("dataset");
    std::vector<int> keep;
    for (const auto& c : split_list(get("class_filter"))) {
        keep.push_back(parse_int("class_filter", c));
    }
    const int train_limit = parse_int("train_limit", get("train_limit"));
    const int test_limit = parse_int("test_limit", get("test_limit"));

    if (dataset == "synthetic") {
        const int classes = parse_int("synthetic_classes", get("synthetic_classes"));
        const std::uint64_t seed = parse_u64("synthetic_seed", get("synthetic_seed"));
        Dataset train = synthetic_dataset(
            classes, parse_int("synthetic_per_class", get("synthetic_per_class")), seed);
        Dataset test = synthetic_dataset(
            classes, parse_int("synthetic_test_per_class", get("synthetic_test_per_class")),
            seed + 1);
        return {std::move(train), std::move(test)};
    }

    (void)input_files(); // validates presence of the path keys

    auto load_split = [&](bool is_train) {
        std::pair<RawImages, std::vector<int>> raw;
        DatasetKind kind;
        if (dataset == "mnist") {
            kind = DatasetKind::Mnist;
            raw = is_train ? load_idx(get("mnist_train_images"), get("mnist_train_labels"))
                           : load_idx(get("mnist_test_images"), get("mnist_test_labels"));
        } else {
            kind = dataset == "cifar10" ? DatasetKind::Cifar10 : DatasetKind::Svhn;
            const std::string key = (dataset == "cifar10" ? "cifar" : "svhn") +
                                    std::string(is_train ? "_train_files" : "_test_files");
            raw = load_cifar_bin(split_list(get(key)));
        }
        const int limit = is_train ? train_limit : test_limit;
        if (!keep.empty() || limit > 0) subset(raw.first, raw.second, keep, limit);
        Dataset full = preprocess(raw.first, kind, raw.second);
        if (keep.empty()) return full;
        // preprocess assumes the canonical 10 classes; rebuild with the
        // filtered class count so labels stay dense
        return Dataset(full.name(), int(keep.size()), full.images(),
                       [&] {
                           std::vector<int> ls(static_cast<std::size_t>(full.size()));
                           for (int i = 0; i < full.size(); ++i) ls[size_t(i)] = full.label(i);
                           return ls;
                       }());
    };
    Dataset train = load_split(true);
    Dataset test = load_split(false);
    return {std::move(train), std::move(test)};
}

} // namespace plae
