#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ocdgr/errors.hpp"

namespace ocdgr
{

using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A set of binary row vectors (one observation per row) with optional
/// integer class labels. Labels are either absent or given for every row.
struct BinaryBatch
{
    BinaryMatrix rows;
    std::vector<int> labels;

    BinaryBatch() = default;

    explicit BinaryBatch(BinaryMatrix r, std::vector<int> l = {})
        : rows(std::move(r)), labels(std::move(l))
    {
        validate();
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(rows.rows()); }
    std::size_t n_visible() const noexcept { return static_cast<std::size_t>(rows.cols()); }
    bool empty() const noexcept { return rows.rows() == 0; }
    bool has_labels() const noexcept { return !labels.empty(); }

    std::optional<int> label(std::size_t i) const
    {
        if (!has_labels())
            return std::nullopt;
        return labels[i];
    }

    template <typename Scalar>
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> as_matrix() const
    {
        return rows.template cast<Scalar>();
    }

    void validate() const
    {
        if (!labels.empty() && labels.size() != size())
            throw DimensionError("label count does not match row count");
        for (Eigen::Index i = 0; i < rows.size(); ++i)
            if (rows.data()[i] > 1)
                throw DomainError("binary batch entries must be 0 or 1");
    }
};

/// Rows of `batch` in the order given by `index` (labels follow their rows).
inline BinaryBatch select_rows(const BinaryBatch& batch, const std::vector<std::size_t>& index)
{
    BinaryBatch out;
    out.rows.resize(static_cast<Eigen::Index>(index.size()), batch.rows.cols());
    if (batch.has_labels())
        out.labels.reserve(index.size());
    for (std::size_t k = 0; k < index.size(); ++k)
    {
        if (index[k] >= batch.size())
            throw DimensionError("row index out of range");
        out.rows.row(static_cast<Eigen::Index>(k)) = batch.rows.row(static_cast<Eigen::Index>(index[k]));
        if (batch.has_labels())
            out.labels.push_back(batch.labels[index[k]]);
    }
    return out;
}

/// Converts a real matrix whose entries are exactly 0 or 1 into a batch.
template <typename Derived>
BinaryBatch to_binary_batch(const Eigen::MatrixBase<Derived>& m)
{
    BinaryBatch out;
    out.rows.resize(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
        {
            const auto x = m(i, j);
            if (x != 0 && x != 1)
                throw DomainError("matrix entry is not binary");
            out.rows(i, j) = static_cast<std::uint8_t>(x);
        }
    return out;
}

}  // namespace ocdgr
