#pragma once

#include <map>
#include <string>
#include <vector>

#include "plae/train.hpp"

namespace plae {

// Flat key=value experiment description; '#' starts a comment, later keys win,
// and command-line "--set key=value" overrides both. A run is reconstructible
// from the resolved form plus the data files.
class ExperimentConfig {
public:
    static ExperimentConfig from_file(const std::string& path,
                                      const std::vector<std::string>& overrides = {});
    static ExperimentConfig from_text(const std::string& text,
                                      const std::vector<std::string>& overrides = {});

    // Canonical resolved text: every key explicit, sorted, defaults filled.
    std::string resolved_text() const;

    TrainConfig train_config() const;
    DataBundle load_data() const;

    std::string dataset_name() const;
    std::string out_dir() const;
    int checkpoint_every() const;

    // Data files referenced by this config (empty for synthetic).
    std::vector<std::string> input_files() const;

    const std::string& get(const std::string& key) const;
    bool is_default(const std::string& key) const;

private:
    ExperimentConfig() = default;
    void set(const std::string& key, const std::string& value);
    void finalize();

    std::map<std::string, std::string> values_;
    std::map<std::string, bool> explicit_;
};

} // namespace plae
