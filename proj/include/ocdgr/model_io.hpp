#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "ocdgr/hyperparameters.hpp"
#include "ocdgr/rbm.hpp"

namespace ocdgr
{

inline constexpr std::uint32_t model_format_version = 1;

/// Contents of a model file. Layout (all integers and floats little-endian,
/// floats IEEE-754 binary64) is documented in docs/file_formats.md.
struct ModelFile
{
    RbmParameters<double> params;
    Hyperparameters hyper;
    std::size_t observed_count = 0;  ///< nonzero for training checkpoints
    std::string metadata;            ///< free-form, by convention the resolved config as JSON
};

std::string encode_model(const ModelFile& model);
ModelFile decode_model(const std::string& bytes, const std::string& source = "<memory>");

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace ocdgr
