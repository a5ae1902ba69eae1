#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ocdgr/binary_batch.hpp"
#include "ocdgr/random.hpp"

namespace ocdgr
{

/// Grayscale images with one byte per pixel, as stored in IDX files.
struct RawDataset
{
    std::size_t n_items = 0;
    std::vector<std::uint32_t> item_dims;  ///< e.g. {28, 28}
    std::vector<std::uint8_t> pixels;      ///< n_items * prod(item_dims), row-major
    std::vector<int> labels;               ///< empty or n_items entries

    std::size_t item_size() const
    {
        std::size_t n = 1;
        for (auto d : item_dims)
            n *= d;
        return n;
    }
};

/// Reads an IDX image file (magic 0x00000803) and optional label file (magic
/// 0x00000801). Gzip-compressed files are detected by their header and
/// inflated transparently. Errors carry the byte offset within the
/// (decompressed) stream.
RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels = {});

/// Writes uncompressed IDX files (the labels file only if labels exist).
void write_idx(const RawDataset& data, const std::filesystem::path& images, const std::filesystem::path& labels = {});

enum class Binarization
{
    threshold,   ///< 1 iff pixel >= 128
    stochastic,  ///< 1 with probability pixel / 255
};

Binarization parse_binarization(const std::string& name);
std::string to_string(Binarization mode);

/// Stochastic mode draws one uniform per pixel in storage order from `rng`.
BinaryBatch binarize(const RawDataset& data, Binarization mode, Rng* rng = nullptr);

/// Whitespace-separated 0/1 tokens, one row per line. Blank lines and lines
/// starting with '#' are skipped. Errors carry the 1-based line number.
BinaryBatch load_binary_text(const std::filesystem::path& path);
void write_binary_text(const BinaryBatch& batch, const std::filesystem::path& path, const std::string& comment = {});

/// Synthetic class-block data: class c (0-based) sets coordinate i to 1 with
/// probability p when c*block <= i < (c+1)*block and to 0 elsewhere. Rows are
/// grouped by class, `n_per_class` each, labeled 0..n_classes-1.
BinaryBatch toy_generate(std::size_t n_per_class, Rng& rng, std::size_t n_classes = 10, std::size_t block = 10,
                         double p = 0.3);

/// One prototype per toy class: the indicator of the class block.
BinaryBatch toy_prototypes(std::size_t n_classes = 10, std::size_t block = 10);

struct StreamOrder
{
    enum class Mode
    {
        sorted_by_class,
        random,
    };
    Mode mode = Mode::random;
    std::uint64_t seed = 0;
};

StreamOrder::Mode parse_stream_mode(const std::string& name);
std::string to_string(StreamOrder::Mode mode);

/// Row indices in presentation order: a stable sort by ascending label, or a
/// seeded uniform permutation.
std::vector<std::size_t> order_stream(const BinaryBatch& dataset, const StreamOrder& order);

/// Binary dataset cache: see docs/file_formats.md.
void save_dataset_cache(const BinaryBatch& batch, const std::filesystem::path& path);
BinaryBatch load_dataset_cache(const std::filesystem::path& path);

/// Whole file as bytes, gunzipped if it starts with the gzip magic.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace ocdgr
