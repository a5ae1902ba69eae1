#include "ocdgr/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <zlib.h>

#include "ocdgr/training.hpp"

namespace ocdgr
{

namespace
{

constexpr std::uint32_t idx_images_magic = 0x00000803;
constexpr std::uint32_t idx_labels_magic = 0x00000801;
constexpr char cache_magic[8] = {'O', 'C', 'D', 'G', 'R', 'D', 'S', '1'};

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in, const std::filesystem::path& path)
{
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK)
        throw IoError("zlib initialization failed");
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());

    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    int rc = Z_OK;
    while (rc != Z_STREAM_END)
    {
        zs.next_out = buf;
        zs.avail_out = sizeof(buf);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END)
        {
            const auto offset = zs.total_in;
            inflateEnd(&zs);
            throw FormatError(path.string() + ": corrupt gzip stream at compressed byte " + std::to_string(offset),
                              offset);
        }
        out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
        if (rc != Z_STREAM_END && zs.avail_in == 0 && zs.avail_out != 0)
        {
            inflateEnd(&zs);
            throw FormatError(path.string() + ": truncated gzip stream", in.size());
        }
    }
    inflateEnd(&zs);
    return out;
}

class ByteReader
{
public:
    ByteReader(const std::vector<std::uint8_t>& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

    std::uint32_t u32_be()
    {
        need(4);
        std::uint32_t x = 0;
        for (int i = 0; i < 4; ++i)
            x = (x << 8) | bytes_[pos_ + std::size_t(i)];
        pos_ += 4;
        return x;
    }

    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size())
            throw FormatError(name_ + ": truncated file, bytes [" + std::to_string(bytes_.size()) + ", " +
                                  std::to_string(pos_ + n) + ") are missing",
                              bytes_.size());
    }

    std::size_t position() const noexcept { return pos_; }
    void skip(std::size_t n) { pos_ += n; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

void put_u32_be(std::ostream& out, std::uint32_t x)
{
    const char b[4] = {char(x >> 24), char(x >> 16), char(x >> 8), char(x)};
    out.write(b, 4);
}

void put_u64_le(std::ostream& out, std::uint64_t x)
{
    char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = char(x >> (8 * i));
    out.write(b, 8);
}

std::uint64_t get_u64_le(const std::vector<std::uint8_t>& bytes, std::size_t pos)
{
    std::uint64_t x = 0;
    for (int i = 7; i >= 0; --i)
        x = (x << 8) | bytes[pos + std::size_t(i)];
    return x;
}

std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
        return gunzip(bytes, path);
    return bytes;
}

RawDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels)
{
    RawDataset data;
    {
        const auto bytes = read_file_bytes(images);
        ByteReader r(bytes, images.string());
        const auto magic = r.u32_be();
        if (magic != idx_images_magic)
        {
            std::ostringstream msg;
            msg << images.string() << ": bad magic 0x" << std::hex << magic << " at byte 0 (expected 0x00000803)";
            throw FormatError(msg.str(), 0);
        }
        data.n_items = r.u32_be();
        data.item_dims = {r.u32_be(), r.u32_be()};
        const std::size_t payload = data.n_items * data.item_size();
        r.need(payload);
        data.pixels.assign(bytes.begin() + std::ptrdiff_t(r.position()),
                           bytes.begin() + std::ptrdiff_t(r.position() + payload));
        r.skip(payload);
        if (r.position() != bytes.size())
            throw FormatError(images.string() + ": " + std::to_string(bytes.size() - r.position()) +
                                  " trailing bytes after byte " + std::to_string(r.position()),
                              r.position());
    }
    if (!labels.empty())
    {
        const auto bytes = read_file_bytes(labels);
        ByteReader r(bytes, labels.string());
        const auto magic = r.u32_be();
        if (magic != idx_labels_magic)
        {
            std::ostringstream msg;
            msg << labels.string() << ": bad magic 0x" << std::hex << magic << " at byte 0 (expected 0x00000801)";
            throw FormatError(msg.str(), 0);
        }
        const std::size_t n = r.u32_be();
        if (n != data.n_items)
            throw FormatError("count mismatch: " + std::to_string(data.n_items) + " images in " + images.string() +
                                  " but " + std::to_string(n) + " labels in " + labels.string(),
                              4);
        r.need(n);
        data.labels.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            data.labels.push_back(bytes[r.position() + i]);
    }
    return data;
}

void write_idx(const RawDataset& data, const std::filesystem::path& images, const std::filesystem::path& labels)
{
    if (data.item_dims.size() != 2)
        throw DimensionError("IDX image files need two item dimensions");
    {
        auto out = open_output(images);
        put_u32_be(out, idx_images_magic);
        put_u32_be(out, std::uint32_t(data.n_items));
        for (auto d : data.item_dims)
            put_u32_be(out, d);
        out.write(reinterpret_cast<const char*>(data.pixels.data()), std::streamsize(data.pixels.size()));
    }
    if (!labels.empty() && !data.labels.empty())
    {
        auto out = open_output(labels);
        put_u32_be(out, idx_labels_magic);
        put_u32_be(out, std::uint32_t(data.n_items));
        for (int l : data.labels)
            out.put(char(l));
    }
}

Binarization parse_binarization(const std::string& name)
{
    if (name == "threshold")
        return Binarization::threshold;
    if (name == "stochastic")
        return Binarization::stochastic;
    throw ConfigError("unknown binarization '" + name + "' (expected threshold or stochastic)");
}

std::string to_string(Binarization mode)
{
    return mode == Binarization::threshold ? "threshold" : "stochastic";
}

BinaryBatch binarize(const RawDataset& data, Binarization mode, Rng* rng)
{
    const std::size_t width = data.item_size();
    if (data.pixels.size() != data.n_items * width)
        throw DimensionError("pixel buffer does not match the item count");
    if (mode == Binarization::stochastic && rng == nullptr)
        throw ConfigError("stochastic binarization needs a random stream");

    BinaryBatch out;
    out.rows.resize(Eigen::Index(data.n_items), Eigen::Index(width));
    std::uint8_t* dst = out.rows.data();
    for (std::size_t k = 0; k < data.pixels.size(); ++k)
    {
        const std::uint8_t px = data.pixels[k];
        if (mode == Binarization::threshold)
            dst[k] = px >= 128 ? 1 : 0;
        else
            dst[k] = rng->uniform() < double(px) / 255.0 ? 1 : 0;
    }
    out.labels = data.labels;
    return out;
}

BinaryBatch load_binary_text(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());

    std::vector<std::uint8_t> values;
    std::size_t width = 0;
    std::size_t n_rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        std::istringstream tokens(line);
        std::string tok;
        std::size_t count = 0;
        while (tokens >> tok)
        {
            if (tok != "0" && tok != "1")
                throw FormatError(path.string() + ":" + std::to_string(line_no) + ": non-binary token '" + tok + "'",
                                  line_no);
            values.push_back(tok == "1" ? 1 : 0);
            ++count;
        }
        if (n_rows == 0)
            width = count;
        else if (count != width)
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                                  " values, found " + std::to_string(count),
                              line_no);
        ++n_rows;
    }
    BinaryBatch out;
    out.rows = Eigen::Map<BinaryMatrix>(values.data(), Eigen::Index(n_rows), Eigen::Index(width));
    return out;
}

void write_binary_text(const BinaryBatch& batch, const std::filesystem::path& path, const std::string& comment)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    if (!comment.empty())
    {
        std::istringstream lines(comment);
        std::string line;
        while (std::getline(lines, line))
            out << "# " << line << '\n';
    }
    std::string buf;
    for (Eigen::Index r = 0; r < batch.rows.rows(); ++r)
    {
        buf.clear();
        for (Eigen::Index c = 0; c < batch.rows.cols(); ++c)
        {
            if (c > 0)
                buf.push_back(' ');
            buf.push_back(batch.rows(r, c) ? '1' : '0');
        }
        buf.push_back('\n');
        out << buf;
    }
}

BinaryBatch toy_generate(std::size_t n_per_class, Rng& rng, std::size_t n_classes, std::size_t block, double p)
{
    if (n_per_class == 0 || n_classes == 0 || block == 0)
        throw ConfigError("toy data needs positive n_per_class, n_classes and block");
    if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError("toy activation probability must lie in [0, 1]");

    const std::size_t width = n_classes * block;
    BinaryBatch out;
    out.rows = BinaryMatrix::Zero(Eigen::Index(n_per_class * n_classes), Eigen::Index(width));
    out.labels.reserve(n_per_class * n_classes);
    for (std::size_t c = 0; c < n_classes; ++c)
        for (std::size_t n = 0; n < n_per_class; ++n)
        {
            const auto r = Eigen::Index(c * n_per_class + n);
            for (std::size_t i = c * block; i < (c + 1) * block; ++i)
                out.rows(r, Eigen::Index(i)) = rng.uniform() < p ? 1 : 0;
            out.labels.push_back(int(c));
        }
    return out;
}

BinaryBatch toy_prototypes(std::size_t n_classes, std::size_t block)
{
    BinaryBatch out;
    out.rows = BinaryMatrix::Zero(Eigen::Index(n_classes), Eigen::Index(n_classes * block));
    for (std::size_t c = 0; c < n_classes; ++c)
    {
        out.rows.row(Eigen::Index(c)).segment(Eigen::Index(c * block), Eigen::Index(block)).setOnes();
        out.labels.push_back(int(c));
    }
    return out;
}

StreamOrder::Mode parse_stream_mode(const std::string& name)
{
    if (name == "sorted_by_class" || name == "sorted")
        return StreamOrder::Mode::sorted_by_class;
    if (name == "random")
        return StreamOrder::Mode::random;
    throw ConfigError("unknown stream order '" + name + "' (expected sorted_by_class or random)");
}

std::string to_string(StreamOrder::Mode mode)
{
    return mode == StreamOrder::Mode::sorted_by_class ? "sorted_by_class" : "random";
}

std::vector<std::size_t> order_stream(const BinaryBatch& dataset, const StreamOrder& order)
{
    if (order.mode == StreamOrder::Mode::random)
    {
        Rng rng(order.seed);
        return random_permutation(dataset.size(), rng);
    }
    if (!dataset.has_labels())
        throw ConfigError("class-sorted stream order needs labels");
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t x, std::size_t y) { return dataset.labels[x] < dataset.labels[y]; });
    return idx;
}

void save_dataset_cache(const BinaryBatch& batch, const std::filesystem::path& path)
{
    auto out = open_output(path);
    out.write(cache_magic, sizeof(cache_magic));
    put_u64_le(out, batch.size());
    put_u64_le(out, batch.n_visible());
    put_u64_le(out, batch.has_labels() ? 1 : 0);
    out.write(reinterpret_cast<const char*>(batch.rows.data()), std::streamsize(batch.rows.size()));
    for (int l : batch.labels)
        put_u64_le(out, std::uint64_t(std::int64_t(l)));
}

BinaryBatch load_dataset_cache(const std::filesystem::path& path)
{
    const auto bytes = read_file_bytes(path);
    constexpr std::size_t header = 8 + 3 * 8;
    if (bytes.size() < header)
        throw FormatError(path.string() + ": truncated cache header, bytes [" + std::to_string(bytes.size()) + ", " +
                              std::to_string(header) + ") are missing",
                          bytes.size());
    if (!std::equal(std::begin(cache_magic), std::end(cache_magic), bytes.begin()))
        throw FormatError(path.string() + ": bad dataset cache magic at byte 0", 0);
    const std::size_t n = get_u64_le(bytes, 8);
    const std::size_t width = get_u64_le(bytes, 16);
    const bool labeled = get_u64_le(bytes, 24) != 0;
    const std::size_t expected = header + n * width + (labeled ? 8 * n : 0);
    if (bytes.size() != expected)
        throw FormatError(path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                              std::to_string(bytes.size()),
                          std::min(bytes.size(), expected));
    BinaryBatch out;
    out.rows = Eigen::Map<const BinaryMatrix>(bytes.data() + header, Eigen::Index(n), Eigen::Index(width));
    if (labeled)
        for (std::size_t i = 0; i < n; ++i)
            out.labels.push_back(int(std::int64_t(get_u64_le(bytes, header + n * width + 8 * i))));
    out.validate();
    return out;
}

}  // namespace ocdgr
