#include "text_table.hpp"

#include <algorithm>
#include <cstdio>

namespace nidsllm::detail {

namespace {

// Display width, counting each UTF-8 sequence as one column.
std::size_t width(const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++w;
    return w;
}

std::string pad(const std::string& s, std::size_t target, bool left) {
    const auto w = width(s);
    if (w >= target) return s;
    const std::string fill(target - w, ' ');
    return left ? s + fill : fill + s;
}

}  // namespace

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) widths[c] = width(header[c]);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size() && c < widths.size(); ++c)
            widths[c] = std::max(widths[c], width(row[c]));

    auto line = [&](const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t c = 0; c < widths.size(); ++c) {
            if (c) out += " | ";
            out += pad(c < cells.size() ? cells[c] : std::string(), widths[c], c == 0);
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        return out + '\n';
    };

    std::string out = line(header);
    for (std::size_t c = 0; c < widths.size(); ++c) {
        if (c) out += "-+-";
        out += std::string(widths[c], '-');
    }
    out += '\n';
    for (const auto& row : rows) out += line(row);
    return out;
}

std::string fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

}  // namespace nidsllm::detail
