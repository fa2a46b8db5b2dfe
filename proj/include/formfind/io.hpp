#pragma once

// JSON (de)serialization for geometry, structural models, trained model
// parameters and run configs, plus atomic file writes.

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "formfind/data.hpp"
#include "formfind/evo.hpp"
#include "formfind/frame.hpp"
#include "formfind/geom.hpp"
#include "formfind/problem.hpp"
#include "formfind/seqnet.hpp"

namespace formfind::io {

using nlohmann::json;

// Write-to-temp-then-rename so failed commands never leave partial outputs.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os << content;
        if (!os) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

// ---- geometry ----

inline json curve_to_json(const geom::NurbsCurve& c) {
    json j;
    j["degree"] = c.degree;
    j["knots"] = c.knots.values;
    json pts = json::array();
    for (const auto& p : c.control_points) pts.push_back({p.x(), p.y(), p.z()});
    j["points"] = pts;
    j["weights"] = c.weights;
    return j;
}

inline geom::NurbsCurve curve_from_json(const json& j) {
    geom::NurbsCurve c;
    c.degree = j.at("degree").get<int>();
    c.knots.values = j.at("knots").get<std::vector<double>>();
    for (const auto& p : j.at("points"))
        c.control_points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(),
                                      p.at(2).get<double>());
    c.weights = j.at("weights").get<std::vector<double>>();
    c.validate();
    return c;
}

inline json surface_to_json(const geom::NurbsSurface& s) {
    json j;
    j["degree"] = s.degree_u;
    j["degree_v"] = s.degree_v;
    j["knots"] = s.knots_u.values;
    j["knots_v"] = s.knots_v.values;
    json pts = json::array();
    for (const auto& row : s.control_net) {
        json r = json::array();
        for (const auto& p : row) r.push_back({p.x(), p.y(), p.z()});
        pts.push_back(r);
    }
    j["points"] = pts;
    j["weights"] = s.weights;
    return j;
}

inline geom::NurbsSurface surface_from_json(const json& j) {
    geom::NurbsSurface s;
    s.degree_u = j.at("degree").get<int>();
    s.degree_v = j.at("degree_v").get<int>();
    s.knots_u.values = j.at("knots").get<std::vector<double>>();
    s.knots_v.values = j.at("knots_v").get<std::vector<double>>();
    for (const auto& row : j.at("points")) {
        std::vector<geom::Vec3> r;
        for (const auto& p : row)
            r.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
        s.control_net.push_back(std::move(r));
    }
    s.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    s.validate();
    return s;
}

inline json curves_to_json(const std::vector<geom::NurbsCurve>& curves) {
    json j = json::array();
    for (const auto& c : curves) j.push_back(curve_to_json(c));
    return j;
}

inline std::vector<geom::NurbsCurve> curves_from_json(const json& j) {
    std::vector<geom::NurbsCurve> out;
    for (const auto& c : j) out.push_back(curve_from_json(c));
    return out;
}

// ---- folds ----

inline json folds_to_json(const data::FoldSpec& f) {
    json j;
    j["folds"] = f.folds;
    return j;
}

inline data::FoldSpec folds_from_json(const json& j) {
    data::FoldSpec f;
    f.folds = j.at("folds").get<std::vector<std::vector<int>>>();
    return f;
}

// ---- structural model ----

inline json material_to_json(const frame::Material& m) {
    return {{"elastic_modulus", m.elastic_modulus},
            {"shear_modulus", m.shear_modulus},
            {"density", m.density}};
}

inline frame::Material material_from_json(const json& j) {
    frame::Material m;
    m.elastic_modulus = j.at("elastic_modulus").get<double>();
    m.shear_modulus = j.at("shear_modulus").get<double>();
    m.density = j.at("density").get<double>();
    m.validate();
    return m;
}

inline json section_to_json(const frame::Section& s) {
    return {{"width", s.width}, {"height", s.height}};
}

inline frame::Section section_from_json(const json& j) {
    frame::Section s;
    s.width = j.at("width").get<double>();
    s.height = j.at("height").get<double>();
    s.validate();
    return s;
}

inline json grid_model_to_json(const frame::GridModel& m) {
    json j;
    json nodes = json::array();
    for (const auto& n : m.nodes) nodes.push_back({n.x(), n.y(), n.z()});
    j["nodes"] = nodes;
    json elems = json::array();
    for (const auto& e : m.elements)
        elems.push_back({{"i", e.node_i},
                         {"j", e.node_j},
                         {"material", material_to_json(e.material)},
                         {"section", section_to_json(e.section)}});
    j["elements"] = elems;
    json sup = json::array();
    for (std::size_t n = 0; n < m.supports.size(); ++n)
        if (!m.supports[n].empty())
            sup.push_back({{"node", n}, {"dofs", std::vector<int>(m.supports[n].begin(),
                                                                  m.supports[n].end())}});
    j["supports"] = sup;
    j["boundary"] = m.boundary;
    return j;
}

inline frame::GridModel grid_model_from_json(const json& j) {
    frame::GridModel m;
    for (const auto& n : j.at("nodes"))
        m.nodes.emplace_back(n.at(0).get<double>(), n.at(1).get<double>(), n.at(2).get<double>());
    for (const auto& e : j.at("elements")) {
        frame::Element el;
        el.node_i = e.at("i").get<int>();
        el.node_j = e.at("j").get<int>();
        el.material = material_from_json(e.at("material"));
        el.section = section_from_json(e.at("section"));
        m.elements.push_back(el);
    }
    m.supports.resize(m.nodes.size());
    for (const auto& s : j.at("supports")) {
        const int node = s.at("node").get<int>();
        if (node < 0 || node >= static_cast<int>(m.nodes.size()))
            throw std::runtime_error("support references invalid node");
        for (int d : s.at("dofs").get<std::vector<int>>()) m.supports[node].insert(d);
    }
    if (j.contains("boundary")) m.boundary = j.at("boundary").get<std::vector<bool>>();
    m.validate();
    return m;
}

inline json analysis_result_to_json(const frame::AnalysisResult& r) {
    json j;
    j["displacements"] = std::vector<double>(r.displacements.data(),
                                             r.displacements.data() + r.displacements.size());
    j["strain_energy"] = r.strain_energy;
    j["element_energies"] = r.element_energies;
    j["mass"] = r.mass;
    j["sigma_max"] = r.sigma_max;
    j["max_z_displacement"] = r.max_z_displacement;
    return j;
}

// ---- trained model ----

inline json stats_to_json(const data::ChannelStats& s) {
    return {{"mean", s.mean}, {"stddev", s.stddev}};
}

inline data::ChannelStats stats_from_json(const json& j) {
    data::ChannelStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    return s;
}

inline json model_config_to_json(const seqnet::ModelConfig& c) {
    return {{"d_model", c.d_model},   {"n_heads", c.n_heads},
            {"n_layers", c.n_layers}, {"d_ff", c.d_ff},
            {"in_channels", c.in_channels}, {"out_channels", c.out_channels},
            {"seq_len", c.seq_len}};
}

inline seqnet::ModelConfig model_config_from_json(const json& j) {
    seqnet::ModelConfig c;
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.out_channels = j.value("out_channels", c.out_channels);
    c.seq_len = j.value("seq_len", c.seq_len);
    c.validate();
    return c;
}

struct TrainedModel {
    seqnet::ModelConfig config;
    seqnet::ModelParameters params;
    data::ChannelStats feature_stats;
    data::ChannelStats target_stats;
};

inline json trained_model_to_json(const TrainedModel& m) {
    json j;
    j["config"] = model_config_to_json(m.config);
    j["stats"] = {{"features", stats_to_json(m.feature_stats)},
                  {"targets", stats_to_json(m.target_stats)}};
    json weights;
    seqnet::ModelParameters& p = const_cast<seqnet::ModelParameters&>(m.params);
    for (const auto& ref : seqnet::param_refs(p))
        weights[ref.name] = std::vector<double>(ref.values, ref.values + ref.size);
    j["weights"] = weights;
    return j;
}

inline TrainedModel trained_model_from_json(const json& j) {
    TrainedModel m;
    m.config = model_config_from_json(j.at("config"));
    m.feature_stats = stats_from_json(j.at("stats").at("features"));
    m.target_stats = stats_from_json(j.at("stats").at("targets"));
    m.params = seqnet::zero_parameters(m.config);
    for (auto& ref : seqnet::param_refs(m.params)) {
        const auto vals = j.at("weights").at(ref.name).get<std::vector<double>>();
        if (static_cast<Eigen::Index>(vals.size()) != ref.size)
            throw std::runtime_error("weight array size mismatch for " + ref.name);
        std::copy(vals.begin(), vals.end(), ref.values);
    }
    return m;
}

// ---- optimization artifacts ----

inline json archive_to_json(const evo::RunHistory& h) {
    json j = json::array();
    for (const auto& entry : h.final_front)
        j.push_back({{"design", entry.design}, {"objectives", entry.objectives}});
    return j;
}

}  // namespace formfind::io
