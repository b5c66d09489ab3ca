#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "freqflow/error.hpp"

namespace freqflow {

// Real-valued grid sample, row-major with the channel index innermost:
// data[(y * width + x) * channels + c]. C=2 holds a 2D velocity field
// (u_x, u_y), C=1 a scalar field such as a stream function. The layout is
// the same everywhere, including on disk.
struct Field {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Field() = default;
    Field(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, 0.0) {}

    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double& at(int y, int x, int c) { return data[index(y, x, c)]; }
    double at(int y, int x, int c) const { return data[index(y, x, c)]; }

    std::size_t size() const { return data.size(); }

    bool same_shape(const Field& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// H and W must be even and at least 4 (the centered band partition needs
// both), every value finite.
inline void validate_field(const Field& f) {
    if (f.height < 4 || f.width < 4)
        throw invalid_input("field dimensions must be at least 4x4, got " +
                            std::to_string(f.height) + "x" + std::to_string(f.width));
    if (f.height % 2 != 0 || f.width % 2 != 0)
        throw invalid_input("field dimensions must be even, got " +
                            std::to_string(f.height) + "x" + std::to_string(f.width));
    if (f.channels < 1) throw invalid_input("field must have at least one channel");
    if (f.data.size() != static_cast<std::size_t>(f.height) * f.width * f.channels)
        throw invalid_input("field data length does not match dimensions");
    for (std::size_t i = 0; i < f.data.size(); ++i)
        if (!std::isfinite(f.data[i]))
            throw invalid_input("field contains non-finite value at flat index " + std::to_string(i));
}

inline void require_same_shape(const Field& a, const Field& b, const char* what = "field") {
    if (!a.same_shape(b))
        throw invalid_input(std::string(what) + ": shape mismatch, " + std::to_string(a.height) +
                            "x" + std::to_string(a.width) + "x" + std::to_string(a.channels) +
                            " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) +
                            "x" + std::to_string(b.channels));
}

// Scene parameters c_1..c_p.
struct ParamVector {
    std::vector<double> values;

    ParamVector() = default;
    explicit ParamVector(std::vector<double> v) : values(std::move(v)) {}

    std::size_t dim() const { return values.size(); }
};

inline void validate_params(const ParamVector& c) {
    if (c.values.empty()) throw invalid_input("parameter vector must have at least one entry");
    for (double v : c.values)
        if (!std::isfinite(v)) throw invalid_input("parameter vector contains non-finite value");
}

// Discrete stencils. All finite differences in this project are plain
// forward differences of neighboring cells with periodic wrap and no
// division by the grid spacing; the convention is fixed here once and the
// loss, the curl head, and the divergence diagnostic all share it.

// Forward-difference Jacobian: output has 2*C channels, ordered
// (d/dx ch0, d/dy ch0, d/dx ch1, ...).
inline Field forward_diff_jacobian(const Field& f) {
    Field g(f.height, f.width, 2 * f.channels);
    for (int y = 0; y < f.height; ++y) {
        const int yn = (y + 1) % f.height;
        for (int x = 0; x < f.width; ++x) {
            const int xn = (x + 1) % f.width;
            for (int c = 0; c < f.channels; ++c) {
                g.at(y, x, 2 * c) = f.at(y, xn, c) - f.at(y, x, c);
                g.at(y, x, 2 * c + 1) = f.at(yn, x, c) - f.at(y, x, c);
            }
        }
    }
    return g;
}

// Forward-difference divergence of a 2-channel velocity field.
inline Field discrete_divergence(const Field& u) {
    if (u.channels != 2) throw invalid_input("divergence expects a 2-channel field");
    Field d(u.height, u.width, 1);
    for (int y = 0; y < u.height; ++y) {
        const int yn = (y + 1) % u.height;
        for (int x = 0; x < u.width; ++x) {
            const int xn = (x + 1) % u.width;
            d.at(y, x, 0) = (u.at(y, xn, 0) - u.at(y, x, 0)) + (u.at(yn, x, 1) - u.at(y, x, 1));
        }
    }
    return d;
}

// Forward-difference curl of a scalar field: u = (D_y psi, -D_x psi).
// Paired with discrete_divergence above this satisfies div(curl) = 0 up to
// rounding, because the two difference operators commute.
inline Field discrete_curl(const Field& psi) {
    if (psi.channels != 1) throw invalid_input("curl expects a 1-channel field");
    Field u(psi.height, psi.width, 2);
    for (int y = 0; y < psi.height; ++y) {
        const int yn = (y + 1) % psi.height;
        for (int x = 0; x < psi.width; ++x) {
            const int xn = (x + 1) % psi.width;
            u.at(y, x, 0) = psi.at(yn, x, 0) - psi.at(y, x, 0);
            u.at(y, x, 1) = -(psi.at(y, xn, 0) - psi.at(y, x, 0));
        }
    }
    return u;
}

inline double max_abs(const Field& f) {
    double m = 0.0;
    for (double v : f.data) m = std::max(m, std::abs(v));
    return m;
}

inline double mean_abs(const Field& f) {
    double s = 0.0;
    for (double v : f.data) s += std::abs(v);
    return f.data.empty() ? 0.0 : s / static_cast<double>(f.data.size());
}

}  // namespace freqflow
