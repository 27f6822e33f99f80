#pragma once

#include <string>
#include <utility>
#include <vector>

#include "plae/adam.hpp"
#include "plae/tensor.hpp"

namespace plae {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

// Checkpoint container. Layout, all integers little-endian:
//   magic "PLAE1"
//   repeated until EOF:
//     u64 name length, name bytes,
//     u64 rank, u64 dims[rank],
//     f32 data[prod(dims)]
// Adam moments travel as extra records named "adam.m.<param>" / "adam.v.<param>"
// plus a one-element "adam.step" record, so a run can resume.
void save_records(const std::string& path, const std::vector<NamedParam>& records);
std::vector<NamedParam> load_records(const std::string& path);

// Model parameters plus, when an optimizer is given, its moment state.
void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params,
                     const Adam* optimizer = nullptr);

// Fills existing tensors by name; every parameter must be present with the
// exact shape. Returns leftover records (e.g. optimizer state).
std::vector<NamedParam> load_checkpoint(const std::string& path,
                                        const std::vector<NamedParam>& params);

} // namespace plae
