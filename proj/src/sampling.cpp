#include "hfvol/sampling.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

#include "hfvol/errors.hpp"

namespace hfvol {
namespace {

void check_dimension(int d) {
    if (d < 1 || d > kMaxDimension) {
        throw ConfigError("dimension d = " + std::to_string(d) + " outside [1, " + std::to_string(kMaxDimension) + "]");
    }
}

bool parse_double(std::string_view text, double& out) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    return out;
}

}  // namespace

RegularGrid RegularGrid::from_horizon(double t, double delta_n) {
    if (!(delta_n > 0.0) || !std::isfinite(delta_n)) throw ConfigError("delta_n must be positive and finite");
    if (!(t >= 0.0)) throw ConfigError("horizon must be non-negative");
    // Guard against t / delta_n landing a hair below an integer.
    const double ratio = t / delta_n;
    const double rounded = std::round(ratio);
    const double count = std::abs(ratio - rounded) < 1e-9 * std::max(1.0, ratio) ? rounded : std::floor(ratio);
    return RegularGrid{delta_n, static_cast<std::size_t>(count)};
}

ObservationSet::ObservationSet(RegularGrid grid, int d, std::vector<double> component_major)
    : grid_(grid), d_(d), values_(std::move(component_major)) {
    check_dimension(d);
    if (!(grid_.delta_n > 0.0)) throw ConfigError("delta_n must be positive");
    if (values_.size() != grid_.n * static_cast<std::size_t>(d)) {
        throw ConfigError("observation buffer holds " + std::to_string(values_.size()) + " values, expected n*d = " +
                          std::to_string(grid_.n * static_cast<std::size_t>(d)));
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
        if (!std::isfinite(values_[k])) {
            throw ConfigError("non-finite observation at row " + std::to_string(k % grid_.n + 1));
        }
    }
}

ObservationSet ObservationSet::from_rows(RegularGrid grid, int d, std::span<const double> row_major) {
    check_dimension(d);
    const std::size_t n = grid.n;
    if (row_major.size() != n * static_cast<std::size_t>(d)) throw ConfigError("row-major buffer size mismatch");
    std::vector<double> cm(row_major.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (int r = 0; r < d; ++r) cm[static_cast<std::size_t>(r) * n + i] = row_major[i * static_cast<std::size_t>(d) + r];
    }
    return ObservationSet(grid, d, std::move(cm));
}

Eigen::VectorXd ObservationSet::row(std::size_t i) const {
    Eigen::VectorXd v(d_);
    for (int r = 0; r < d_; ++r) v[r] = at(i, r);
    return v;
}

std::vector<double> increments(std::span<const double> u) {
    if (u.size() < 2) return {};
    std::vector<double> out(u.size() - 1);
    for (std::size_t i = 1; i < u.size(); ++i) out[i - 1] = u[i] - u[i - 1];
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

ObservationSet load_csv(const std::filesystem::path& path, double delta_n) {
    if (!(delta_n > 0.0)) throw ConfigError("delta_n must be positive");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path.string() + "' is empty (expected header t,y1,...)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_commas(line);
    if (header.size() < 2 || header[0] != "t") {
        throw ParseError("header must be 't,y1,...,yd', got '" + line + "'");
    }
    for (std::size_t k = 1; k < header.size(); ++k) {
        if (header[k] != "y" + std::to_string(k)) {
            throw ParseError("header column " + std::to_string(k + 1) + " must be 'y" + std::to_string(k) + "'");
        }
    }
    const int d = static_cast<int>(header.size() - 1);
    check_dimension(d);

    std::vector<double> rows;
    std::size_t row = 0;
    double t_first = 0.0;
    double t_prev = 0.0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        const auto cells = split_commas(line);
        if (cells.size() != header.size()) {
            throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) + " fields, got " +
                             std::to_string(cells.size()));
        }
        double t = 0.0;
        if (!parse_double(cells[0], t) || !std::isfinite(t)) {
            throw ParseError("row " + std::to_string(row) + ": invalid time value");
        }
        if (row == 1) {
            t_first = t;
        } else {
            // Either the local step or the cumulative offset must match; the
            // latter tolerates times printed with few digits.
            const double spacing = t - t_prev;
            const double expected = static_cast<double>(row - 1) * delta_n;
            if (std::abs(spacing - delta_n) > 1e-9 * delta_n && std::abs((t - t_first) - expected) > 1e-9 * expected) {
                throw ParseError("row " + std::to_string(row) + ": non-uniform spacing (" + format_double(spacing) +
                                 " vs delta_n " + format_double(delta_n) + ")");
            }
        }
        t_prev = t;
        for (int r = 0; r < d; ++r) {
            double v = 0.0;
            if (!parse_double(cells[static_cast<std::size_t>(r) + 1], v) || !std::isfinite(v)) {
                throw ParseError("row " + std::to_string(row) + ": non-finite or invalid value in column y" + std::to_string(r + 1));
            }
            rows.push_back(v);
        }
    }
    return ObservationSet::from_rows(RegularGrid{delta_n, row}, d, rows);
}

void save_csv(const ObservationSet& obs, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    out << "t";
    for (int r = 0; r < obs.dimension(); ++r) out << ",y" << (r + 1);
    out << '\n';
    std::string line;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        line = format_double(static_cast<double>(i) * obs.grid().delta_n);
        for (int r = 0; r < obs.dimension(); ++r) {
            line += ',';
            line += format_double(obs.at(i, r));
        }
        line += '\n';
        out << line;
    }
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

void save_latents_csv(const PathBundle& bundle, const std::filesystem::path& path) {
    const auto& obs = bundle.observations;
    const int d = obs.dimension();
    const std::size_t n = obs.size();
    auto out = open_for_write(path);
    out << "t";
    for (int r = 0; r < d; ++r) out << ",x" << (r + 1);
    for (int j = 0; j < d; ++j) {
        for (int k = j; k < d; ++k) out << ",c" << (j + 1) << '_' << (k + 1);
    }
    out << '\n';
    std::string line;
    for (std::size_t i = 0; i < n; ++i) {
        line = format_double(static_cast<double>(i) * obs.grid().delta_n);
        for (int r = 0; r < d; ++r) {
            line += ',';
            line += format_double(bundle.latent_x[static_cast<std::size_t>(r) * n + i]);
        }
        const auto& c = bundle.latent_c[i];
        for (int j = 0; j < d; ++j) {
            for (int k = j; k < d; ++k) {
                line += ',';
                line += format_double(c(j, k));
            }
        }
        line += '\n';
        out << line;
    }
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

void save_jumps_csv(const PathBundle& bundle, const std::filesystem::path& path) {
    const int d = bundle.observations.dimension();
    auto out = open_for_write(path);
    out << "index,t";
    for (int r = 0; r < d; ++r) out << ",j" << (r + 1);
    out << '\n';
    for (const auto& j : bundle.jumps) {
        out << j.index << ',' << format_double(static_cast<double>(j.index) * bundle.observations.grid().delta_n);
        for (int r = 0; r < d; ++r) out << ',' << format_double(j.size[r]);
        out << '\n';
    }
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace hfvol
