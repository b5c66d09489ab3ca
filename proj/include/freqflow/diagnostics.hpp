#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "freqflow/error.hpp"
#include "freqflow/field.hpp"
#include "freqflow/io.hpp"
#include "freqflow/spectral.hpp"
#include "freqflow/util.hpp"

namespace freqflow {

namespace detail {

inline void check_sample_lists(const std::vector<Field>& recons, const std::vector<Field>& truths,
                               const BandPartition& p) {
    if (recons.empty() || truths.empty())
        throw invalid_input("sample lists must be nonempty");
    if (recons.size() != truths.size())
        throw invalid_input("got " + std::to_string(recons.size()) + " reconstructions but " +
                            std::to_string(truths.size()) + " ground-truth samples");
    for (std::size_t i = 0; i < recons.size(); ++i) {
        require_same_shape(recons[i], truths[i], "diagnostics");
        if (!p.matches(recons[i]))
            throw invalid_input("sample " + std::to_string(i) +
                                " does not match the partition dimensions");
        if (recons[i].channels != recons[0].channels)
            throw invalid_input("samples disagree on channel count");
    }
}

}  // namespace detail

// Per-fine-band mean relative error: the summed modulus of spectrum
// differences, pooled over samples, bins and channels, divided by the
// pooled modulus of the ground truth. Bands whose truth content is exactly
// zero have no meaningful ratio and come back as nullopt.
inline std::vector<std::optional<double>> band_mre(const std::vector<Field>& recons,
                                                   const std::vector<Field>& truths,
                                                   const BandPartition& p) {
    detail::check_sample_lists(recons, truths, p);
    std::vector<double> num(static_cast<std::size_t>(p.fine_bands), 0.0);
    std::vector<double> den(static_cast<std::size_t>(p.fine_bands), 0.0);
    for (std::size_t i = 0; i < recons.size(); ++i) {
        const Spectrum st = dft(truths[i]);
        const Spectrum sr = dft(recons[i]);
        for (int ky = 0; ky < st.height; ++ky)
            for (int kx = 0; kx < st.width; ++kx) {
                const auto band = static_cast<std::size_t>(p.band_at(ky, kx));
                for (int c = 0; c < st.channels; ++c) {
                    num[band] += std::abs(st.at(ky, kx, c) - sr.at(ky, kx, c));
                    den[band] += std::abs(st.at(ky, kx, c));
                }
            }
    }
    std::vector<std::optional<double>> out(static_cast<std::size_t>(p.fine_bands));
    for (std::size_t b = 0; b < out.size(); ++b)
        if (den[b] > 0.0) out[b] = num[b] / den[b];
    return out;
}

// Population standard deviations of bin moduli pooled per band, for the
// reconstruction and the truth, plus their ratio.
struct BandStd {
    std::vector<double> std_truth;
    std::vector<double> std_recon;
    std::vector<std::optional<double>> ratio;  // nullopt where truth std is 0
};

inline BandStd relative_band_std(const std::vector<Field>& recons,
                                 const std::vector<Field>& truths, const BandPartition& p) {
    detail::check_sample_lists(recons, truths, p);
    const auto nb = static_cast<std::size_t>(p.fine_bands);
    std::vector<double> sum_t(nb, 0.0), sq_t(nb, 0.0), sum_r(nb, 0.0), sq_r(nb, 0.0);
    std::vector<std::size_t> cnt(nb, 0);
    for (std::size_t i = 0; i < recons.size(); ++i) {
        const Spectrum st = dft(truths[i]);
        const Spectrum sr = dft(recons[i]);
        for (int ky = 0; ky < st.height; ++ky)
            for (int kx = 0; kx < st.width; ++kx) {
                const auto band = static_cast<std::size_t>(p.band_at(ky, kx));
                for (int c = 0; c < st.channels; ++c) {
                    const double mt = std::abs(st.at(ky, kx, c));
                    const double mr = std::abs(sr.at(ky, kx, c));
                    sum_t[band] += mt;
                    sq_t[band] += mt * mt;
                    sum_r[band] += mr;
                    sq_r[band] += mr * mr;
                    ++cnt[band];
                }
            }
    }
    BandStd out;
    out.std_truth.resize(nb);
    out.std_recon.resize(nb);
    out.ratio.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        const double n = static_cast<double>(cnt[b]);
        const double mean_t = sum_t[b] / n;
        const double mean_r = sum_r[b] / n;
        out.std_truth[b] = std::sqrt(std::max(0.0, sq_t[b] / n - mean_t * mean_t));
        out.std_recon[b] = std::sqrt(std::max(0.0, sq_r[b] / n - mean_r * mean_r));
        if (out.std_truth[b] > 0.0) out.ratio[b] = out.std_recon[b] / out.std_truth[b];
    }
    return out;
}

// Histogram of ln|FT| over all samples, bins and channels. Moduli under
// exp(log_floor) carry no useful magnitude and are counted separately.
struct Histogram {
    std::vector<double> edges;        // bin_count + 1, strictly increasing
    std::vector<std::size_t> counts;  // per bin
    std::size_t included = 0;
    std::size_t excluded = 0;         // below the floor
    double log_floor = 0.0;
};

inline Histogram log_mag_histogram(const std::vector<Field>& fields, int bins, double log_floor) {
    if (fields.empty()) throw invalid_input("histogram needs at least one sample");
    if (bins < 2) throw invalid_input("histogram needs at least 2 bins");
    if (!std::isfinite(log_floor)) throw invalid_input("log floor must be finite");

    std::vector<double> values;
    Histogram h;
    h.log_floor = log_floor;
    for (const auto& f : fields) {
        const Spectrum s = dft(f);
        for (const auto& z : s.data) {
            const double lm = std::log(std::abs(z));  // -inf for exact zeros
            if (lm >= log_floor)
                values.push_back(lm);
            else
                ++h.excluded;
        }
    }
    if (values.empty())
        throw invalid_input("all spectrum magnitudes fall below the log floor " +
                            format_double(log_floor));

    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (lo == hi) {  // widen a degenerate range so the single value has a bin
        lo -= 0.5;
        hi += 0.5;
    }
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i)
        h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / static_cast<double>(bins);
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (double v : values) {
        int idx = static_cast<int>(std::floor((v - lo) / width));
        idx = std::clamp(idx, 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(idx)];
    }
    h.included = values.size();
    return h;
}

// Everything the evaluation reports, per fine band. Log-magnitude stats
// cover only bins with nonzero modulus; bands with none stay undefined.
struct BandReport {
    std::size_t sample_count = 0;
    std::vector<int> boundaries;
    std::vector<std::optional<double>> mre;
    std::vector<double> std_truth;
    std::vector<double> std_recon;
    std::vector<std::optional<double>> std_ratio;
    std::vector<std::optional<double>> log_mean_truth, log_std_truth;
    std::vector<std::optional<double>> log_mean_recon, log_std_recon;
};

inline BandReport make_band_report(const std::vector<Field>& recons,
                                   const std::vector<Field>& truths, const BandPartition& p) {
    detail::check_sample_lists(recons, truths, p);
    BandReport r;
    r.sample_count = recons.size();
    r.boundaries = p.boundaries;
    r.mre = band_mre(recons, truths, p);
    BandStd bs = relative_band_std(recons, truths, p);
    r.std_truth = std::move(bs.std_truth);
    r.std_recon = std::move(bs.std_recon);
    r.std_ratio = std::move(bs.ratio);

    const auto nb = static_cast<std::size_t>(p.fine_bands);
    std::vector<double> sum_t(nb, 0.0), sq_t(nb, 0.0), sum_r(nb, 0.0), sq_r(nb, 0.0);
    std::vector<std::size_t> cnt_t(nb, 0), cnt_r(nb, 0);
    for (std::size_t i = 0; i < recons.size(); ++i) {
        const Spectrum st = dft(truths[i]);
        const Spectrum sr = dft(recons[i]);
        for (int ky = 0; ky < st.height; ++ky)
            for (int kx = 0; kx < st.width; ++kx) {
                const auto band = static_cast<std::size_t>(p.band_at(ky, kx));
                for (int c = 0; c < st.channels; ++c) {
                    const double mt = std::abs(st.at(ky, kx, c));
                    if (mt > 0.0) {
                        const double lm = std::log(mt);
                        sum_t[band] += lm;
                        sq_t[band] += lm * lm;
                        ++cnt_t[band];
                    }
                    const double mr = std::abs(sr.at(ky, kx, c));
                    if (mr > 0.0) {
                        const double lm = std::log(mr);
                        sum_r[band] += lm;
                        sq_r[band] += lm * lm;
                        ++cnt_r[band];
                    }
                }
            }
    }
    auto finish = [](double sum, double sq, std::size_t cnt, std::optional<double>& mean,
                     std::optional<double>& sd) {
        if (cnt == 0) return;
        const double m = sum / static_cast<double>(cnt);
        mean = m;
        sd = std::sqrt(std::max(0.0, sq / static_cast<double>(cnt) - m * m));
    };
    r.log_mean_truth.resize(nb);
    r.log_std_truth.resize(nb);
    r.log_mean_recon.resize(nb);
    r.log_std_recon.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        finish(sum_t[b], sq_t[b], cnt_t[b], r.log_mean_truth[b], r.log_std_truth[b]);
        finish(sum_r[b], sq_r[b], cnt_r[b], r.log_mean_recon[b], r.log_std_recon[b]);
    }
    return r;
}

// ---------------------------------------------------------------------------
// CSV export. Floats use the shortest round-trip representation; undefined
// band values are written literally as "undefined".

inline std::string csv_cell(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("undefined");
}

inline void write_mre_csv(const std::filesystem::path& path,
                          const std::vector<std::optional<double>>& mre) {
    std::string out = "band,mre\n";
    for (std::size_t b = 0; b < mre.size(); ++b)
        out += std::to_string(b) + "," + csv_cell(mre[b]) + "\n";
    write_file_bytes(path, out);
}

inline void write_band_std_csv(const std::filesystem::path& path, const BandStd& bs) {
    std::string out = "band,std_truth,std_recon,ratio\n";
    for (std::size_t b = 0; b < bs.ratio.size(); ++b)
        out += std::to_string(b) + "," + format_double(bs.std_truth[b]) + "," +
               format_double(bs.std_recon[b]) + "," + csv_cell(bs.ratio[b]) + "\n";
    write_file_bytes(path, out);
}

inline void write_histogram_csv(const std::filesystem::path& path, const Histogram& h) {
    // Comment line records the log base and floor so the numbers are
    // interpretable without the meta record.
    std::string out = "# log_base=e,log_floor=" + format_double(h.log_floor) +
                      ",excluded=" + std::to_string(h.excluded) + "\n";
    out += "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out += format_double(h.edges[i]) + "," + format_double(h.edges[i + 1]) + "," +
               std::to_string(h.counts[i]) + "\n";
    write_file_bytes(path, out);
}

}  // namespace freqflow
