#include "plae/grid.hpp"

#include <algorithm>
#include <sstream>
#include <thread>

#include "plae/artifacts.hpp"

namespace plae {

std::vector<std::pair<std::string, double>> GridResult::ranked() const {
    std::vector<std::pair<std::string, double>> out;
    const std::size_t n = single_names.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            if (!at(i, j)) continue;
            const std::string name =
                i == j ? single_names[i] : single_names[i] + "+" + single_names[j];
            out.emplace_back(name, *at(i, j));
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

std::string GridResult::to_csv() const {
    std::ostringstream os;
    os << "spec";
    for (const auto& name : single_names) os << "," << name;
    os << "\n";
    const std::size_t n = single_names.size();
    for (std::size_t i = 0; i < n; ++i) {
        os << single_names[i];
        for (std::size_t j = 0; j < n; ++j) {
            os << ",";
            if (at(i, j)) os << format_double(*at(i, j));
        }
        os << "\n";
    }
    return os.str();
}

std::string GridResult::ranked_csv() const {
    std::ostringstream os;
    os << "rank,spec,accuracy\n";
    int rank = 1;
    for (const auto& [name, acc] : ranked()) {
        os << rank++ << "," << name << "," << format_double(acc) << "\n";
    }
    return os.str();
}

std::string GridResult::top10_csv() const {
    std::ostringstream os;
    os << "rank,spec,accuracy\n";
    int rank = 1;
    for (const auto& [name, acc] : ranked()) {
        if (rank > 10) break;
        os << rank++ << "," << name << "," << format_double(acc) << "\n";
    }
    return os.str();
}

GridResult grid_search(const std::vector<TransformKind>& singles, const TrainConfig& base,
                       const DataBundle& data, int epochs, int jobs) {
    if (singles.empty()) throw ConfigError("grid_search needs at least one transform");
    const auto specs = grid_specs_from(singles);

    GridResult result;
    result.dataset = data.train.name();
    for (TransformKind k : singles) result.single_names.push_back(transform_kind_name(k));
    result.cells.assign(singles.size() * singles.size(), std::nullopt);

    std::vector<double> accuracies(specs.size(), 0.0);
    std::vector<std::string> errors(specs.size());

    auto run_spec = [&](std::size_t s) {
        TrainConfig cfg = base;
        cfg.regime = Regime::PLAE;
        cfg.policy = single_spec_policy(specs[s]);
        cfg.epochs = epochs;
        cfg.eval_every = epochs; // final probe only
        // each run owns its label-read counters so parallel runs stay independent
        DataBundle own = {data.train.detached(), data.test.detached()};
        try {
            TrainResult r = train(cfg, own);
            accuracies[s] = r.metrics.back().accuracy.value();
        } catch (const std::exception& e) {
            errors[s] = "grid spec '" + specs[s].name() + "': " + e.what();
        }
    };

    if (jobs <= 1) {
        for (std::size_t s = 0; s < specs.size(); ++s) run_spec(s);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int t = 0; t < jobs; ++t) {
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t s = next.fetch_add(1);
                    if (s >= specs.size()) return;
                    run_spec(s);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    for (const auto& err : errors) {
        if (!err.empty()) throw std::runtime_error(err);
    }

    const std::size_t n = singles.size();
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) result.at(i, i) = accuracies[idx++];
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) result.at(i, j) = accuracies[idx++];
    }
    return result;
}

} // namespace plae
