#include "ocdgr/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ocdgr
{

namespace
{

constexpr char magic[8] = {'O', 'C', 'D', 'G', 'R', 'R', 'B', 'M'};
constexpr std::size_t header_bytes = 136;

class Writer
{
public:
    void bytes(const char* p, std::size_t n) { out_.append(p, n); }

    void u32(std::uint32_t x)
    {
        for (int i = 0; i < 4; ++i)
            out_.push_back(char(x >> (8 * i)));
    }

    void u64(std::uint64_t x)
    {
        for (int i = 0; i < 8; ++i)
            out_.push_back(char(x >> (8 * i)));
    }

    void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }

    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader
{
public:
    Reader(const std::string& in, std::string source) : in_(in), source_(std::move(source)) {}

    std::uint64_t uint(int width)
    {
        need(std::size_t(width));
        std::uint64_t x = 0;
        for (int i = width - 1; i >= 0; --i)
            x = (x << 8) | static_cast<unsigned char>(in_[pos_ + std::size_t(i)]);
        pos_ += std::size_t(width);
        return x;
    }

    std::uint32_t u32() { return std::uint32_t(uint(4)); }
    std::uint64_t u64() { return uint(8); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::string str(std::size_t n)
    {
        need(n);
        std::string s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void need(std::size_t n) const
    {
        if (n > in_.size() - pos_)
            throw FormatError(source_ + ": truncated model file, bytes [" + std::to_string(in_.size()) + ", " +
                                  std::to_string(pos_ + n) + ") are missing",
                              in_.size());
    }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }

private:
    const std::string& in_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_model(const ModelFile& model)
{
    const auto& p = model.params;
    p.validate();
    const auto& h = model.hyper;

    Writer w;
    w.bytes(magic, sizeof(magic));
    w.u32(model_format_version);
    w.u32(0);
    w.u64(p.n_visible());
    w.u64(p.n_hidden());
    w.u64(model.observed_count);
    w.u64(h.n_gibbs_generate);
    w.u64(h.n_cd);
    w.u64(h.n_epochs);
    w.u64(h.batch_size);
    w.u64(h.replay_size);
    w.u64(h.momentum_warmup_epochs);
    w.f64(h.learning_rate);
    w.f64(h.momentum);
    w.f64(h.momentum_warmup);
    w.f64(h.weight_decay);
    w.f64(h.init_stddev);
    w.u64(h.decay_biases ? 1 : 0);
    for (Eigen::Index j = 0; j < p.weights.rows(); ++j)
        for (Eigen::Index i = 0; i < p.weights.cols(); ++i)
            w.f64(p.weights(j, i));
    for (Eigen::Index i = 0; i < p.visible_bias.size(); ++i)
        w.f64(p.visible_bias(i));
    for (Eigen::Index j = 0; j < p.hidden_bias.size(); ++j)
        w.f64(p.hidden_bias(j));
    w.u64(model.metadata.size());
    w.bytes(model.metadata.data(), model.metadata.size());
    return w.take();
}

ModelFile decode_model(const std::string& bytes, const std::string& source)
{
    Reader r(bytes, source);
    r.need(header_bytes);
    if (std::memcmp(bytes.data(), magic, sizeof(magic)) != 0)
        throw FormatError(source + ": not a model file (bad magic at byte 0)", 0);
    r.str(sizeof(magic));
    const auto version = r.u32();
    if (version != model_format_version)
        throw FormatError(source + ": unsupported model format version " + std::to_string(version) + " at byte 8", 8);
    r.u32();

    ModelFile model;
    const std::size_t n_v = r.u64();
    const std::size_t n_h = r.u64();
    if (n_v == 0 || n_h == 0)
        throw FormatError(source + ": zero layer size at byte 16", 16);
    model.observed_count = r.u64();

    auto& h = model.hyper;
    h.n_visible = n_v;
    h.n_hidden = n_h;
    h.n_gibbs_generate = r.u64();
    h.n_cd = r.u64();
    h.n_epochs = r.u64();
    h.batch_size = r.u64();
    h.replay_size = r.u64();
    h.momentum_warmup_epochs = r.u64();
    h.learning_rate = r.f64();
    h.momentum = r.f64();
    h.momentum_warmup = r.f64();
    h.weight_decay = r.f64();
    h.init_stddev = r.f64();
    h.decay_biases = (r.u64() & 1U) != 0;

    // Guard the size product against overflow before trusting it.
    const std::size_t available = r.remaining() / 8;
    if (n_v > available || n_h > available || n_h > available / n_v)
        throw FormatError(source + ": truncated model file, " + std::to_string(n_h) + "x" + std::to_string(n_v) +
                              " weights do not fit in the remaining " + std::to_string(r.remaining()) + " bytes",
                          bytes.size());
    r.need((n_h * n_v + n_v + n_h) * 8);
    RbmParameters<double> p(n_v, n_h);
    for (Eigen::Index j = 0; j < p.weights.rows(); ++j)
        for (Eigen::Index i = 0; i < p.weights.cols(); ++i)
            p.weights(j, i) = r.f64();
    for (Eigen::Index i = 0; i < p.visible_bias.size(); ++i)
        p.visible_bias(i) = r.f64();
    for (Eigen::Index j = 0; j < p.hidden_bias.size(); ++j)
        p.hidden_bias(j) = r.f64();
    p.validate();
    model.params = std::move(p);

    const std::size_t meta = r.u64();
    model.metadata = r.str(meta);
    if (r.remaining() != 0)
        throw FormatError(source + ": " + std::to_string(r.remaining()) + " trailing bytes after byte " +
                              std::to_string(r.position()),
                          r.position());
    return model;
}

void save_model(const ModelFile& model, const std::filesystem::path& path)
{
    const std::string bytes = encode_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

ModelFile load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open model file " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_model(bytes, path.string());
}

}  // namespace ocdgr
