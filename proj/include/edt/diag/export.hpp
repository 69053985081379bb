#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "edt/core/container.hpp"
#include "edt/diag/attention_distance.hpp"
#include "edt/diag/cka.hpp"

namespace edt::diag {

// ---- activation dumps ----

/// One file per trace: manifest of (layer label, [m, p]) entries plus f64
/// payloads, in depth order.
inline void write_trace(const std::string& path, const std::vector<ActivationMatrix>& trace) {
    std::vector<io::Entry> entries;
    for (const ActivationMatrix& a : trace) entries.push_back({a.layer, a.x});
    io::write_container(path, entries);
}

inline std::vector<ActivationMatrix> read_trace(const std::string& path,
                                                const std::string& model_id = "") {
    std::vector<ActivationMatrix> trace;
    for (io::Entry& e : io::read_container(path)) {
        if (e.value.rank() != 2)
            throw io::IoError(path + ": trace entry '" + e.name + "' is not an [m,p] matrix");
        trace.emplace_back(std::move(e.value), e.name, model_id);
    }
    if (trace.empty()) throw io::IoError(path + ": empty trace");
    return trace;
}

// ---- CSV ----

namespace detail {
inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string fmt_value(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}
}  // namespace detail

inline std::string cka_map_csv(const CkaMap& map) {
    std::ostringstream os;
    os << "# estimator="
       << (map.estimator == Estimator::Full
               ? std::string("full")
               : "minibatch(batch=" + std::to_string(map.batch) +
                     ",passes=" + std::to_string(map.passes) + ")")
       << "\n";
    os << "layer";
    for (const std::string& c : map.col_labels) os << ',' << detail::csv_quote(c);
    os << '\n';
    for (std::size_t i = 0; i < map.values.dim(0); ++i) {
        os << detail::csv_quote(map.row_labels[i]);
        for (std::size_t j = 0; j < map.values.dim(1); ++j) {
            os << ',';
            if (map.defined(i, j))
                os << detail::fmt_value(map.values.at2(i, j));
            else
                os << "undef";
        }
        os << '\n';
    }
    return os.str();
}

inline std::string ratios_csv(const CkaMap& map, double threshold) {
    std::vector<double> r = similarity_ratio(map, threshold);
    std::ostringstream os;
    os << "layer,ratio_above_" << detail::fmt_value(threshold) << '\n';
    for (std::size_t i = 0; i < r.size(); ++i)
        os << detail::csv_quote(map.row_labels[i]) << ',' << detail::fmt_value(r[i]) << '\n';
    return os.str();
}

inline std::string attention_profile_csv(const std::vector<AttentionProfileRow>& rows) {
    std::ostringstream os;
    os << "stage,block,branch,head,mean,std,excluded\n";
    for (const AttentionProfileRow& r : rows) {
        os << r.stage << ',' << r.block << ',' << r.branch << ',';
        if (r.excluded)
            os << ",,,1\n";
        else
            os << r.head << ',' << detail::fmt_value(r.mean) << ',' << detail::fmt_value(r.stddev)
               << ",0\n";
    }
    return os.str();
}

// ---- SVG heatmap ----

// Viridis approximation: 256 steps linearly interpolated in RGB between
// these nine anchor stops.
inline constexpr std::array<const char*, 9> kViridisStops = {
    "#440154", "#472d7b", "#3b528b", "#2c728e", "#21918c",
    "#28ae80", "#5ec962", "#addc30", "#fde725"};

namespace detail {
inline std::array<int, 3> parse_hex(const char* s) {
    auto hex = [](char c) {
        return c <= '9' ? c - '0' : (c | 0x20) - 'a' + 10;
    };
    return {hex(s[1]) * 16 + hex(s[2]), hex(s[3]) * 16 + hex(s[4]), hex(s[5]) * 16 + hex(s[6])};
}
}  // namespace detail

/// 256-step colormap entry for t in [0,1], as "#rrggbb".
inline std::string viridis(double t) {
    if (t < 0.0) t = 0.0;
    if (t > 1.0) t = 1.0;
    int step = static_cast<int>(t * 255.0 + 0.5);
    double pos = step / 255.0 * 8.0;
    int seg = std::min(7, static_cast<int>(pos));
    double frac = pos - seg;
    auto lo = detail::parse_hex(kViridisStops[seg]);
    auto hi = detail::parse_hex(kViridisStops[seg + 1]);
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                  static_cast<int>(lo[0] + frac * (hi[0] - lo[0]) + 0.5),
                  static_cast<int>(lo[1] + frac * (hi[1] - lo[1]) + 0.5),
                  static_cast<int>(lo[2] + frac * (hi[2] - lo[2]) + 0.5));
    return buf;
}

/// Heatmap as standalone SVG: one `cell`-sized rect per map entry, rows top
/// to bottom in depth order. Flagged entries render as crosshatch gray.
inline std::string cka_map_svg(const CkaMap& map, std::size_t cell = 12) {
    std::size_t rows = map.values.dim(0), cols = map.values.dim(1);
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cols * cell << "\" height=\""
       << rows * cell << "\" viewBox=\"0 0 " << cols * cell << ' ' << rows * cell << "\">\n";
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            std::string fill = map.defined(i, j) ? viridis(map.values.at2(i, j)) : "#808080";
            os << "  <rect x=\"" << j * cell << "\" y=\"" << i * cell << "\" width=\"" << cell
               << "\" height=\"" << cell << "\" fill=\"" << fill << "\">"
               << "<title>" << detail::xml_escape(map.row_labels[i]) << " vs "
               << detail::xml_escape(map.col_labels[j]) << ": "
               << (map.defined(i, j) ? detail::fmt_value(map.values.at2(i, j)) : "undefined")
               << "</title></rect>\n";
        }
    os << "</svg>\n";
    return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io::IoError(path + ": cannot open for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw io::IoError(path + ": write failed");
}

}  // namespace edt::diag
