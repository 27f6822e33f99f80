#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "plae/train.hpp"

namespace plae {

// Shortest-ish deterministic decimal form shared by every CSV/JSON artifact.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Deterministic per-epoch record: epoch,dataset,embedding_dim,loss,
// probe_accuracy (blank when not evaluated). Wall time is nondeterministic by
// nature and lives in the separate timings CSV.
std::string metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& dataset,
                        int embedding_dim);
std::string timings_csv(const std::vector<EpochMetrics>& metrics);

std::string bestfit_json(const LineFit& fit);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::string& path);

// Self-description of a run directory: resolved config hash plus a content
// hash per input file.
std::string manifest_json(const std::string& config_sha,
                          const std::map<std::string, std::string>& input_shas);

} // namespace plae
