#pragma once

// The grid-shell form-finding problem: design variables applied to section
// curves, lofted to a surface, discretized and analyzed under gravity and
// mesh loads.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "formfind/evo.hpp"
#include "formfind/frame.hpp"
#include "formfind/geom.hpp"

namespace formfind::evo {

struct AnalysisConfig {
    frame::Material material;
    frame::Section section;
    double mesh_load = 0.02;
    int grid_nu = 10;
    int grid_nv = 6;
    int loft_degree_v = 2;
    // Curvature cap 1/(150 h) unless overridden (<=0 means derive from section).
    double curvature_cap = -1.0;

    double effective_curvature_cap() const {
        return curvature_cap > 0 ? curvature_cap : 1.0 / (150.0 * section.height);
    }
};

// Apply a design vector to copies of the base section curves.
inline std::vector<geom::NurbsCurve> apply_design(const std::vector<geom::NurbsCurve>& base,
                                                  const DesignVariableSpec& spec,
                                                  const DesignVector& design) {
    if (design.size() != spec.variables.size())
        throw std::invalid_argument("design vector length mismatch");
    std::vector<geom::NurbsCurve> curves = base;
    for (std::size_t i = 0; i < design.size(); ++i) {
        const auto& v = spec.variables[i];
        if (!(design[i] >= v.lower && design[i] <= v.upper))
            throw std::invalid_argument("design value outside bounds");
        auto& curve = curves.at(v.curve_index);
        if (v.kind == DesignVariable::Kind::control_point_z)
            curve.control_points.at(v.control_point_index).z() = design[i];
        else
            curve.weights.at(v.control_point_index) = design[i];
    }
    return curves;
}

// Full candidate evaluation. Degenerate geometry, curvature-cap violations and
// solver failures yield the infeasibility penalty instead of aborting.
inline ObjectiveVector evaluate(const DesignVector& design,
                                const std::vector<geom::NurbsCurve>& base_curves,
                                const DesignVariableSpec& spec, const AnalysisConfig& cfg) {
    try {
        const auto curves = apply_design(base_curves, spec, design);
        const auto surface = geom::loft_surface(curves, cfg.loft_degree_v);
        const auto shell = geom::extract_grid(surface, cfg.grid_nu, cfg.grid_nv);
        if (shell.max_discrete_curvature() > cfg.effective_curvature_cap())
            return ObjectiveVector::infeasible();
        const auto model = frame::make_grid_model(shell, cfg.material, cfg.section);
        const auto [results, obj] = frame::analyze(
            model, {frame::LoadCase::gravity(), frame::LoadCase::mesh(cfg.mesh_load)});
        ObjectiveVector ov;
        ov.u_gravity = obj.u_gravity;
        ov.u_mesh = obj.u_mesh;
        ov.mass = obj.mass;
        ov.sigma_max = obj.sigma_max;
        return ov;
    } catch (const std::exception&) {
        return ObjectiveVector::infeasible();
    }
}

struct ReferenceProblem {
    std::vector<geom::NurbsCurve> base_curves;
    DesignVariableSpec variable_spec;
    AnalysisConfig analysis;
    DesignVector baseline;

    Problem as_problem() const {
        Problem p;
        for (const auto& v : variable_spec.variables) p.bounds.emplace_back(v.lower, v.upper);
        p.baseline = baseline;
        p.evaluate = [*this](const DesignVector& x) {
            const auto ov = evaluate(x, base_curves, variable_spec, analysis);
            const auto a = ov.as_array();
            return std::vector<double>(a.begin(), a.end());
        };
        return p;
    }
};

// Three compatible cubic section curves (22 control points each) spanning a
// shallow vault. The two side curves expose the z-coordinate of their middle
// control point; the central curve exposes the 11th and 12th weights.
// Weight bounds [0.2, 5]; z bounds are baseline +/- 25% of surface height.
inline ReferenceProblem make_reference_problem() {
    ReferenceProblem rp;
    const int n_ctrl = 22;
    const double span = 24.0;
    const double height = 1.0;  // shallow: keeps the vault well under the curvature cap
    const double spacing = 6.0;  // section separation in y

    for (int s = 0; s < 3; ++s) {
        geom::NurbsCurve c;
        c.degree = 3;
        // side sections nearly as tall as the middle one: the transverse arc
        // stays well under the member curvature cap, leaving the weight
        // variables a usable feasible interval
        const double rise = (s == 1) ? height : 0.85 * height;
        for (int i = 0; i < n_ctrl; ++i) {
            const double t = static_cast<double>(i) / (n_ctrl - 1);
            c.control_points.emplace_back(span * t, spacing * s, rise * std::sin(M_PI * t));
            c.weights.push_back(1.0);
        }
        c.knots = geom::uniform_clamped_knots(c.degree, n_ctrl);
        c.validate();
        rp.base_curves.push_back(std::move(c));
    }

    const int mid = n_ctrl / 2;  // middle control point of the side curves
    const double z0 = rp.base_curves[0].control_points[mid].z();
    const double z1 = rp.base_curves[2].control_points[mid].z();
    const double dz = 0.25 * height;
    rp.variable_spec.variables = {
        {DesignVariable::Kind::control_point_z, 0, mid, z0 - dz, z0 + dz},
        {DesignVariable::Kind::control_point_z, 2, mid, z1 - dz, z1 + dz},
        {DesignVariable::Kind::weight, 1, 10, 0.2, 5.0},
        {DesignVariable::Kind::weight, 1, 11, 0.2, 5.0},
    };
    rp.variable_spec.validate();
    rp.baseline = {z0, z1, 1.0, 1.0};
    return rp;
}

}  // namespace formfind::evo
