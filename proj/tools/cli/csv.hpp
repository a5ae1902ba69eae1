#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ocdgr::cli
{

/// RFC 4180 writer: CRLF record separators; fields containing a comma,
/// double quote, CR or LF are quoted with embedded quotes doubled.
class CsvWriter
{
public:
    explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) { row(header); }

    void row(const std::vector<std::string>& fields)
    {
        for (std::size_t k = 0; k < fields.size(); ++k)
        {
            if (k > 0)
                out_ += ',';
            append_field(fields[k]);
        }
        out_ += "\r\n";
    }

    std::size_t width() const noexcept { return width_; }
    const std::string& str() const noexcept { return out_; }

private:
    void append_field(std::string_view f)
    {
        if (f.find_first_of(",\"\r\n") == std::string_view::npos)
        {
            out_ += f;
            return;
        }
        out_ += '"';
        for (char c : f)
        {
            if (c == '"')
                out_ += '"';
            out_ += c;
        }
        out_ += '"';
    }

    std::size_t width_;
    std::string out_;
};

/// Shortest round-trip decimal form; empty for NaN.
inline std::string format_number(double x)
{
    if (std::isnan(x))
        return {};
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

/// Parses one RFC 4180 document into records. Accepts CRLF or LF.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text)
{
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false, field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i)
    {
        const char c = text[i];
        if (quoted)
        {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"')
            {
                field += '"';
                ++i;
            }
            else if (c == '"')
                quoted = false;
            else
                field += c;
            continue;
        }
        if (c == '"' && !field_started)
        {
            quoted = field_started = true;
        }
        else if (c == ',')
        {
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
        }
        else if (c == '\r' || c == '\n')
        {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
                ++i;
            record.push_back(std::move(field));
            records.push_back(std::move(record));
            record.clear();
            field.clear();
            field_started = false;
        }
        else
        {
            field += c;
            field_started = true;
        }
    }
    if (field_started || !record.empty())
    {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace ocdgr::cli
