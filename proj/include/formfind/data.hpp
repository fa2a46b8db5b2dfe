#pragma once

// Sequential dataset construction: curve sampling to point records,
// K-fold splits over curves, per-channel standardization and CSV I/O.

#include <array>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "formfind/geom.hpp"
#include "formfind/util.hpp"

namespace formfind::data {

inline constexpr const char* kCsvHeader =
    "curve_id,point_index,x,y,z,u,curvature,tangent_x,tangent_y,tangent_z";

struct PointRecord {
    int curve_id = 0;
    int point_index = 0;
    double x = 0, y = 0, z = 0;
    double u = 0;  // relative position in [0,1]
    double curvature = 0;
    double tangent_x = 0, tangent_y = 0, tangent_z = 0;
};

// mean/std per channel; channel order x,y,z for features (u is left unscaled)
// and curvature,tangent_x,tangent_y,tangent_z for targets.
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct SequenceDataset {
    std::vector<std::vector<PointRecord>> sequences;
    ChannelStats feature_stats;  // x, y, z
    ChannelStats target_stats;   // curvature, tx, ty, tz

    std::size_t total_records() const {
        std::size_t n = 0;
        for (const auto& s : sequences) n += s.size();
        return n;
    }
    bool normalized() const { return !feature_stats.mean.empty(); }
};

struct FoldSpec {
    std::vector<std::vector<int>> folds;  // curve ids per fold

    void validate(std::size_t n_curves) const {
        std::set<int> seen;
        std::size_t total = 0;
        for (const auto& f : folds) {
            total += f.size();
            for (int id : f)
                if (!seen.insert(id).second)
                    throw std::invalid_argument("fold overlap at curve " + std::to_string(id));
        }
        if (total != n_curves || seen.size() != n_curves ||
            (!seen.empty() && (*seen.begin() < 0 ||
                               *seen.rbegin() >= static_cast<int>(n_curves))))
            throw std::invalid_argument("folds must partition all curve ids");
    }
};

inline SequenceDataset curves_to_dataset(const std::vector<geom::NurbsCurve>& curves,
                                         int n_segments) {
    if (curves.empty()) throw std::invalid_argument("no curves");
    SequenceDataset ds;
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        std::vector<geom::CurveSample> samples;
        try {
            samples = geom::sample_curve(curves[ci], n_segments);
        } catch (const std::exception& e) {
            throw std::runtime_error("curve " + std::to_string(ci) + ": " + e.what());
        }
        std::vector<PointRecord> seq;
        const double a = curves[ci].domain_begin(), b = curves[ci].domain_end();
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const auto& s = samples[k];
            PointRecord r;
            r.curve_id = static_cast<int>(ci);
            r.point_index = static_cast<int>(k);
            r.x = s.position.x();
            r.y = s.position.y();
            r.z = s.position.z();
            r.u = (s.u - a) / (b - a);
            r.curvature = s.curvature;
            r.tangent_x = s.tangent.x();
            r.tangent_y = s.tangent.y();
            r.tangent_z = s.tangent.z();
            seq.push_back(r);
        }
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

inline FoldSpec kfold_split(const SequenceDataset& ds, const std::vector<int>& fold_sizes,
                            std::uint64_t seed) {
    const int n = static_cast<int>(ds.sequences.size());
    if (std::accumulate(fold_sizes.begin(), fold_sizes.end(), 0) != n)
        throw std::invalid_argument("fold sizes must sum to curve count");
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    util::Rng rng(seed);
    rng.shuffle(ids);
    FoldSpec spec;
    std::size_t pos = 0;
    for (int sz : fold_sizes) {
        if (sz < 0) throw std::invalid_argument("negative fold size");
        spec.folds.emplace_back(ids.begin() + pos, ids.begin() + pos + sz);
        pos += sz;
    }
    spec.validate(n);
    return spec;
}

namespace detail {

inline void accumulate_stats(const std::vector<const PointRecord*>& recs,
                             ChannelStats& fs, ChannelStats& ts) {
    auto stats_of = [&](auto get) {
        double mean = 0;
        for (const auto* r : recs) mean += get(*r);
        mean /= recs.size();
        double var = 0;
        for (const auto* r : recs) {
            const double d = get(*r) - mean;
            var += d * d;
        }
        var /= recs.size();
        const double sd = std::max(std::sqrt(var), 1e-8);
        return std::pair<double, double>{mean, sd};
    };
    auto push = [](ChannelStats& cs, std::pair<double, double> ms) {
        cs.mean.push_back(ms.first);
        cs.stddev.push_back(ms.second);
    };
    push(fs, stats_of([](const PointRecord& r) { return r.x; }));
    push(fs, stats_of([](const PointRecord& r) { return r.y; }));
    push(fs, stats_of([](const PointRecord& r) { return r.z; }));
    push(ts, stats_of([](const PointRecord& r) { return r.curvature; }));
    push(ts, stats_of([](const PointRecord& r) { return r.tangent_x; }));
    push(ts, stats_of([](const PointRecord& r) { return r.tangent_y; }));
    push(ts, stats_of([](const PointRecord& r) { return r.tangent_z; }));
}

}  // namespace detail

// Standardize (x-mean)/std per channel with stats computed over the training
// folds only; u stays as-is.
inline SequenceDataset normalize(const SequenceDataset& ds, const FoldSpec& folds,
                                 const std::vector<int>& train_fold_ids) {
    std::set<int> train_curves;
    for (int f : train_fold_ids) {
        if (f < 0 || f >= static_cast<int>(folds.folds.size()))
            throw std::invalid_argument("train fold index out of range");
        train_curves.insert(folds.folds[f].begin(), folds.folds[f].end());
    }
    std::vector<const PointRecord*> train_recs;
    for (int ci : train_curves)
        for (const auto& r : ds.sequences.at(ci)) train_recs.push_back(&r);
    if (train_recs.empty()) throw std::invalid_argument("empty training folds");

    SequenceDataset out = ds;
    out.feature_stats = ChannelStats{};
    out.target_stats = ChannelStats{};
    detail::accumulate_stats(train_recs, out.feature_stats, out.target_stats);

    const auto& fm = out.feature_stats.mean;
    const auto& fsd = out.feature_stats.stddev;
    const auto& tm = out.target_stats.mean;
    const auto& tsd = out.target_stats.stddev;
    for (auto& seq : out.sequences)
        for (auto& r : seq) {
            r.x = (r.x - fm[0]) / fsd[0];
            r.y = (r.y - fm[1]) / fsd[1];
            r.z = (r.z - fm[2]) / fsd[2];
            r.curvature = (r.curvature - tm[0]) / tsd[0];
            r.tangent_x = (r.tangent_x - tm[1]) / tsd[1];
            r.tangent_y = (r.tangent_y - tm[2]) / tsd[2];
            r.tangent_z = (r.tangent_z - tm[3]) / tsd[3];
        }
    return out;
}

inline void write_dataset_csv(const SequenceDataset& ds, std::ostream& os) {
    os << kCsvHeader << "\n";
    for (const auto& seq : ds.sequences)
        for (const auto& r : seq)
            os << r.curve_id << ',' << r.point_index << ',' << util::format_double(r.x) << ','
               << util::format_double(r.y) << ',' << util::format_double(r.z) << ','
               << util::format_double(r.u) << ',' << util::format_double(r.curvature) << ','
               << util::format_double(r.tangent_x) << ',' << util::format_double(r.tangent_y)
               << ',' << util::format_double(r.tangent_z) << "\n";
}

inline SequenceDataset read_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader)
        throw std::runtime_error("dataset CSV: bad or missing header (line 1)");
    SequenceDataset ds;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> f;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t comma = line.find(',', pos);
            const std::string tok =
                line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0' || errno == ERANGE)
                throw std::runtime_error("dataset CSV: malformed value at line " +
                                         std::to_string(lineno));
            f.push_back(v);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (f.size() != 10)
            throw std::runtime_error("dataset CSV: expected 10 fields at line " +
                                     std::to_string(lineno));
        PointRecord r;
        r.curve_id = static_cast<int>(f[0]);
        r.point_index = static_cast<int>(f[1]);
        r.x = f[2]; r.y = f[3]; r.z = f[4]; r.u = f[5];
        r.curvature = f[6]; r.tangent_x = f[7]; r.tangent_y = f[8]; r.tangent_z = f[9];
        if (r.curve_id >= static_cast<int>(ds.sequences.size()))
            ds.sequences.resize(r.curve_id + 1);
        ds.sequences[r.curve_id].push_back(r);
    }
    return ds;
}

inline void write_dataset_csv_file(const SequenceDataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_dataset_csv(ds, os);
}

inline SequenceDataset read_dataset_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_dataset_csv(is);
}

// Deterministic family of smooth clamped cubic arcs standing in for a real
// grid-shell curve corpus. Shapes are shallow arches over a ~24 m span with
// mild in-plane waviness; z amplitudes are rescaled until the densely sampled
// curvature respects the cap.
inline std::vector<geom::NurbsCurve> synth_corpus(std::uint64_t seed, int n_curves,
                                                  double curvature_cap = 1.0 / 30.0) {
    if (n_curves < 1) throw std::invalid_argument("n_curves must be >= 1");
    util::Rng rng(seed);
    std::vector<geom::NurbsCurve> out;
    for (int c = 0; c < n_curves; ++c) {
        const int n_ctrl = 8;
        const double span = 24.0 + rng.uniform(-2.0, 2.0);
        const double height = rng.uniform(1.0, 2.0);
        const double y0 = rng.uniform(-3.0, 3.0);
        geom::NurbsCurve curve;
        curve.degree = 3;
        std::vector<double> dy(n_ctrl), dz(n_ctrl);
        for (int i = 0; i < n_ctrl; ++i) {
            const double t = static_cast<double>(i) / (n_ctrl - 1);
            dy[i] = rng.uniform(-0.2, 0.2);
            dz[i] = height * std::sin(M_PI * t) + rng.uniform(-0.1, 0.1);
            curve.control_points.emplace_back(span * t + rng.uniform(-0.1, 0.1), y0, 0.0);
            curve.weights.push_back(1.0 + rng.uniform(-0.1, 0.1));
        }
        curve.knots = geom::uniform_clamped_knots(curve.degree, n_ctrl);
        double scale = 1.0;
        for (int attempt = 0; attempt < 60; ++attempt) {
            for (int i = 0; i < n_ctrl; ++i) {
                curve.control_points[i].y() = y0 + scale * dy[i];
                curve.control_points[i].z() = scale * dz[i];
            }
            double kmax = 0.0;
            for (const auto& s : geom::sample_curve(curve, 200))
                kmax = std::max(kmax, s.curvature);
            if (kmax <= curvature_cap) break;
            scale *= 0.8;
        }
        curve.validate();
        out.push_back(std::move(curve));
    }
    return out;
}

}  // namespace formfind::data
