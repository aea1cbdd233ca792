#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hfvol {

inline constexpr int kMaxDimension = 64;

/// Regular observation grid: n samples, delta_n time units apart.
struct RegularGrid {
    double delta_n = 0.0;
    std::size_t n = 0;

    double horizon() const { return static_cast<double>(n) * delta_n; }

    /// n = floor(t / delta_n); throws ConfigError for delta_n <= 0.
    static RegularGrid from_horizon(double t, double delta_n);
};

/// Regularly sampled d-dimensional path. Values are stored component-major
/// (all samples of component 0, then component 1, ...) so per-component
/// sliding-window kernels run over contiguous memory.
class ObservationSet {
public:
    ObservationSet() = default;
    /// `component_major` holds d * grid.n values. Throws ConfigError on a
    /// size mismatch, d outside [1, 64] or a non-finite entry.
    ObservationSet(RegularGrid grid, int d, std::vector<double> component_major);

    /// Builds from row-major data (n rows of d values).
    static ObservationSet from_rows(RegularGrid grid, int d, std::span<const double> row_major);

    const RegularGrid& grid() const { return grid_; }
    std::size_t size() const { return grid_.n; }
    int dimension() const { return d_; }

    std::span<const double> component(int r) const {
        return {values_.data() + static_cast<std::size_t>(r) * grid_.n, grid_.n};
    }
    double at(std::size_t i, int r) const { return values_[static_cast<std::size_t>(r) * grid_.n + i]; }
    Eigen::VectorXd row(std::size_t i) const;

    const std::vector<double>& raw() const { return values_; }

private:
    RegularGrid grid_;
    int d_ = 0;
    std::vector<double> values_;
};

struct JumpEvent {
    std::size_t index = 0;
    Eigen::VectorXd size;
};

/// Simulated path: observations plus the latent quantities used as ground
/// truth. latent_c holds one d x d spot covariance per sample.
struct PathBundle {
    ObservationSet observations;
    std::vector<double> latent_x;  // component-major, same layout as observations
    std::vector<Eigen::MatrixXd> latent_c;
    std::vector<JumpEvent> jumps;
    std::vector<double> noise_sd;
};

/// Increments U_i - U_{i-1}, i = 1..n-1 (length n-1).
std::vector<double> increments(std::span<const double> u);

/// Reads `t,y1,...,yd`. The time column must be uniformly spaced by delta_n
/// to 1e-9 relative; the grid is taken from delta_n. Errors name the row
/// number (1-based, header excluded).
ObservationSet load_csv(const std::filesystem::path& path, double delta_n);

/// Writes `t,y1,...,yd` with shortest round-trip decimals.
void save_csv(const ObservationSet& obs, const std::filesystem::path& path);

/// Latent path as `t,x1..xd,c11,c12,...` (upper triangle of c) and the jump
/// list as `index,t,j1..jd`.
void save_latents_csv(const PathBundle& bundle, const std::filesystem::path& path);
void save_jumps_csv(const PathBundle& bundle, const std::filesystem::path& path);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

}  // namespace hfvol
