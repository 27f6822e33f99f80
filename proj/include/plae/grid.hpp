#pragma once

#include <optional>
#include <string>
#include <vector>

#include "plae/train.hpp"

namespace plae {

// Accuracy matrix of the augmentation search: diagonal = single transforms,
// upper triangle = pairs (row transform applied first). Lower triangle stays
// empty.
struct GridResult {
    std::string dataset;
    std::vector<std::string> single_names;
    std::vector<std::optional<double>> cells; // n*n row-major

    std::optional<double>& at(std::size_t i, std::size_t j) {
        return cells[i * single_names.size() + j];
    }
    const std::optional<double>& at(std::size_t i, std::size_t j) const {
        return cells[i * single_names.size() + j];
    }

    // Populated cells by descending accuracy; ties break on canonical spec name.
    std::vector<std::pair<std::string, double>> ranked() const;

    std::string to_csv() const;
    std::string ranked_csv() const;
    std::string top10_csv() const;
};

// One fresh PL-AE per spec, all from the identical init seed, each trained
// for `epochs` epochs with that spec as its whole sampling policy; the final
// probe accuracy fills the matrix. `jobs` > 1 runs specs in parallel; results
// are position-stable so the output is identical for any job count.
GridResult grid_search(const std::vector<TransformKind>& singles, const TrainConfig& base,
                       const DataBundle& data, int epochs, int jobs = 1);

} // namespace plae
