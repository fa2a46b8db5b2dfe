#pragma once

// Linear-elastic 3D frame analysis for grid shells: 12-DOF Euler-Bernoulli
// elements, sparse symmetric assembly, SPD solve, strain energy, mass and
// extreme-fiber stress.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "formfind/geom.hpp"

namespace formfind::frame {

using geom::Vec3;
using SparseMat = Eigen::SparseMatrix<double>;

constexpr double kGravity = 9.81;  // m/s^2

struct Material {
    double elastic_modulus = 11.5e9;  // Pa, glulam-class default
    double shear_modulus = 0.72e9;    // Pa
    double density = 420.0;           // kg/m^3

    void validate() const {
        if (!(elastic_modulus > 0 && shear_modulus > 0 && density > 0))
            throw std::invalid_argument("material constants must be positive");
    }
};

struct Section {
    double width = 0.1;   // b, along local y (m)
    double height = 0.2;  // h, along local z (m)

    void validate() const {
        if (!(width > 0 && height > 0)) throw std::invalid_argument("section dims must be positive");
    }
    double area() const { return width * height; }
    double inertia_y() const { return width * height * height * height / 12.0; }  // bending about y
    double inertia_z() const { return height * width * width * width / 12.0; }    // bending about z
    // Saint-Venant torsion constant for a solid rectangle (Roark).
    double torsion_constant() const {
        const double a = std::max(width, height), b = std::min(width, height);
        return a * b * b * b * (1.0 / 3.0 - 0.21 * (b / a) * (1.0 - std::pow(b / a, 4) / 12.0));
    }
};

struct Element {
    int node_i = 0, node_j = 0;
    Material material;
    Section section;
};

struct GridModel {
    std::vector<Vec3> nodes;
    std::vector<Element> elements;
    // supports[n] = set of constrained DOFs (0..5: ux,uy,uz,rx,ry,rz) at node n.
    std::vector<std::set<int>> supports;
    std::vector<bool> boundary;

    int n_dof() const { return 6 * static_cast<int>(nodes.size()); }

    void validate() const {
        for (const auto& e : elements) {
            if (e.node_i < 0 || e.node_j < 0 || e.node_i >= static_cast<int>(nodes.size()) ||
                e.node_j >= static_cast<int>(nodes.size()))
                throw std::invalid_argument("element references invalid node");
            if ((nodes[e.node_i] - nodes[e.node_j]).norm() < 1e-9)
                throw std::invalid_argument("zero-length element");
            e.material.validate();
            e.section.validate();
        }
        if (supports.size() > nodes.size())
            throw std::invalid_argument("support set references invalid nodes");
    }
};

struct LoadCase {
    enum class Kind { gravity, mesh };
    Kind kind = Kind::gravity;
    double mesh_load = 0.02;  // force per node, applied downward

    static LoadCase gravity() { return {Kind::gravity, 0.0}; }
    static LoadCase mesh(double magnitude) { return {Kind::mesh, magnitude}; }
};

struct AnalysisResult {
    Eigen::VectorXd displacements;         // 6 per node
    double strain_energy = 0.0;
    std::vector<double> element_energies;
    double mass = 0.0;
    double sigma_max = 0.0;
    double max_z_displacement = 0.0;
};

namespace detail {

// Rotation from global to local axes; rows are the local x,y,z directions.
inline Eigen::Matrix3d element_rotation(const Vec3& a, const Vec3& b) {
    const Vec3 ex = (b - a).normalized();
    Vec3 ref = Vec3::UnitZ();
    if (std::abs(ex.dot(ref)) > 1.0 - 1e-6) ref = Vec3::UnitY();
    const Vec3 ey = ref.cross(ex).normalized();  // horizontal-ish, perpendicular to ex
    const Vec3 ez = ex.cross(ey);                // local z: projection of the reference axis
    Eigen::Matrix3d r;
    r.row(0) = ex.transpose();
    r.row(1) = ey.transpose();
    r.row(2) = ez.transpose();
    return r;
}

// 12x12 local stiffness of a 3D Euler-Bernoulli frame element.
inline Eigen::Matrix<double, 12, 12> local_stiffness(const Element& e, double L) {
    const double E = e.material.elastic_modulus;
    const double G = e.material.shear_modulus;
    const double A = e.section.area();
    const double Iy = e.section.inertia_y();
    const double Iz = e.section.inertia_z();
    const double J = e.section.torsion_constant();
    Eigen::Matrix<double, 12, 12> k = Eigen::Matrix<double, 12, 12>::Zero();

    const double ea = E * A / L;
    const double gj = G * J / L;
    k(0, 0) = k(6, 6) = ea;
    k(0, 6) = k(6, 0) = -ea;
    k(3, 3) = k(9, 9) = gj;
    k(3, 9) = k(9, 3) = -gj;

    // bending in the local x-y plane (about z): DOFs uy(1), rz(5), uy(7), rz(11)
    {
        const double c = E * Iz / (L * L * L);
        const int d[4] = {1, 5, 7, 11};
        const double m[4][4] = {{12 * c, 6 * c * L, -12 * c, 6 * c * L},
                                {6 * c * L, 4 * c * L * L, -6 * c * L, 2 * c * L * L},
                                {-12 * c, -6 * c * L, 12 * c, -6 * c * L},
                                {6 * c * L, 2 * c * L * L, -6 * c * L, 4 * c * L * L}};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) k(d[i], d[j]) += m[i][j];
    }
    // bending in the local x-z plane (about y): DOFs uz(2), ry(4), uz(8), ry(10)
    {
        const double c = E * Iy / (L * L * L);
        const int d[4] = {2, 4, 8, 10};
        const double m[4][4] = {{12 * c, -6 * c * L, -12 * c, -6 * c * L},
                                {-6 * c * L, 4 * c * L * L, 6 * c * L, 2 * c * L * L},
                                {-12 * c, 6 * c * L, 12 * c, 6 * c * L},
                                {-6 * c * L, 2 * c * L * L, 6 * c * L, 4 * c * L * L}};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) k(d[i], d[j]) += m[i][j];
    }
    return k;
}

inline Eigen::Matrix<double, 12, 12> transformation(const Eigen::Matrix3d& r) {
    Eigen::Matrix<double, 12, 12> t = Eigen::Matrix<double, 12, 12>::Zero();
    for (int b = 0; b < 4; ++b) t.block<3, 3>(3 * b, 3 * b) = r;
    return t;
}

inline Eigen::Matrix<double, 12, 1> element_displacements(const GridModel& model,
                                                          const Eigen::VectorXd& delta,
                                                          const Element& e) {
    Eigen::Matrix<double, 12, 1> d;
    d.segment<6>(0) = delta.segment<6>(6 * e.node_i);
    d.segment<6>(6) = delta.segment<6>(6 * e.node_j);
    return d;
}

}  // namespace detail

inline SparseMat assemble_stiffness(const GridModel& model) {
    model.validate();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(model.elements.size() * 144);
    for (const auto& e : model.elements) {
        const Vec3 &a = model.nodes[e.node_i], &b = model.nodes[e.node_j];
        const double L = (b - a).norm();
        const auto r = detail::element_rotation(a, b);
        const auto t = detail::transformation(r);
        const Eigen::Matrix<double, 12, 12> kg = t.transpose() * detail::local_stiffness(e, L) * t;
        const int base[2] = {6 * e.node_i, 6 * e.node_j};
        for (int i = 0; i < 12; ++i)
            for (int j = 0; j < 12; ++j)
                trips.emplace_back(base[i / 6] + i % 6, base[j / 6] + j % 6, kg(i, j));
    }
    SparseMat K(model.n_dof(), model.n_dof());
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
}

inline Eigen::VectorXd build_load_vector(const GridModel& model, const LoadCase& lc) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(model.n_dof());
    if (lc.kind == LoadCase::Kind::mesh) {
        for (std::size_t n = 0; n < model.nodes.size(); ++n) f(6 * n + 2) -= lc.mesh_load;
    } else {
        for (const auto& e : model.elements) {
            const double L = (model.nodes[e.node_i] - model.nodes[e.node_j]).norm();
            const double half = e.material.density * e.section.area() * L * kGravity / 2.0;
            f(6 * e.node_i + 2) -= half;
            f(6 * e.node_j + 2) -= half;
        }
    }
    return f;
}

inline Eigen::VectorXd solve_displacements(const SparseMat& K, const Eigen::VectorXd& F,
                                           const std::vector<std::set<int>>& supports) {
    const int n = static_cast<int>(K.rows());
    std::vector<bool> fixed(n, false);
    for (std::size_t node = 0; node < supports.size(); ++node)
        for (int dof : supports[node]) {
            const int g = 6 * static_cast<int>(node) + dof;
            if (dof < 0 || dof > 5 || g >= n)
                throw std::invalid_argument("support DOF out of range");
            fixed[g] = true;
        }
    std::vector<int> free_map(n, -1);
    int n_free = 0;
    for (int i = 0; i < n; ++i)
        if (!fixed[i]) free_map[i] = n_free++;
    if (n_free == 0) return Eigen::VectorXd::Zero(n);

    std::vector<Eigen::Triplet<double>> trips;
    for (int col = 0; col < K.outerSize(); ++col)
        for (SparseMat::InnerIterator it(K, col); it; ++it)
            if (free_map[it.row()] >= 0 && free_map[it.col()] >= 0)
                trips.emplace_back(free_map[it.row()], free_map[it.col()], it.value());
    SparseMat Kr(n_free, n_free);
    Kr.setFromTriplets(trips.begin(), trips.end());
    Eigen::VectorXd Fr(n_free);
    for (int i = 0; i < n; ++i)
        if (free_map[i] >= 0) Fr(free_map[i]) = F(i);

    Eigen::SimplicialLLT<SparseMat> llt(Kr);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("stiffness factorization failed: mechanism or under-constrained model");
    const Eigen::VectorXd dr = llt.solve(Fr);
    const double resid = (Kr * dr - Fr).norm();
    if (resid > 1e-8 * std::max(Fr.norm(), 1e-300))
        throw std::runtime_error("solver residual out of tolerance");

    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
        if (free_map[i] >= 0) d(i) = dr(free_map[i]);
    return d;
}

inline double strain_energy(const Eigen::VectorXd& F, const Eigen::VectorXd& delta) {
    if (F.size() != delta.size()) throw std::invalid_argument("F/delta size mismatch");
    return 0.5 * F.dot(delta);
}

inline std::vector<double> element_strain_energies(const GridModel& model,
                                                   const Eigen::VectorXd& delta) {
    std::vector<double> out;
    out.reserve(model.elements.size());
    for (const auto& e : model.elements) {
        const Vec3 &a = model.nodes[e.node_i], &b = model.nodes[e.node_j];
        const double L = (b - a).norm();
        const auto t = detail::transformation(detail::element_rotation(a, b));
        const Eigen::Matrix<double, 12, 1> d_loc =
            t * detail::element_displacements(model, delta, e);
        out.push_back(0.5 * d_loc.dot(detail::local_stiffness(e, L) * d_loc));
    }
    return out;
}

inline double total_mass(const GridModel& model) {
    double m = 0.0;
    for (const auto& e : model.elements)
        m += e.material.density * e.section.area() *
             (model.nodes[e.node_i] - model.nodes[e.node_j]).norm();
    return m;
}

// Max absolute extreme-fiber normal stress |N|/A + |My| (h/2)/Iy + |Mz| (b/2)/Iz
// over both ends of every element.
inline double max_stress(const GridModel& model, const Eigen::VectorXd& delta) {
    double smax = 0.0;
    for (const auto& e : model.elements) {
        const Vec3 &a = model.nodes[e.node_i], &b = model.nodes[e.node_j];
        const double L = (b - a).norm();
        const auto t = detail::transformation(detail::element_rotation(a, b));
        const Eigen::Matrix<double, 12, 1> d_loc =
            t * detail::element_displacements(model, delta, e);
        const Eigen::Matrix<double, 12, 1> f_loc = detail::local_stiffness(e, L) * d_loc;
        const double A = e.section.area();
        const double cy = e.section.height / 2.0, cz = e.section.width / 2.0;
        for (int end = 0; end < 2; ++end) {
            const double N = std::abs(f_loc(6 * end + 0));
            const double My = std::abs(f_loc(6 * end + 4));
            const double Mz = std::abs(f_loc(6 * end + 5));
            smax = std::max(smax, N / A + My * cy / e.section.inertia_y() +
                                      Mz * cz / e.section.inertia_z());
        }
    }
    return smax;
}

struct ObjectiveInputs {
    double u_gravity = 0.0;
    double u_mesh = 0.0;
    double mass = 0.0;
    double sigma_max = 0.0;
    double max_z_displacement = 0.0;
};

inline AnalysisResult analyze_case(const GridModel& model, const SparseMat& K,
                                   const LoadCase& lc) {
    AnalysisResult r;
    const Eigen::VectorXd F = build_load_vector(model, lc);
    r.displacements = solve_displacements(K, F, model.supports);
    r.strain_energy = strain_energy(F, r.displacements);
    r.element_energies = element_strain_energies(model, r.displacements);
    r.mass = total_mass(model);
    r.sigma_max = max_stress(model, r.displacements);
    for (std::size_t n = 0; n < model.nodes.size(); ++n)
        r.max_z_displacement = std::max(r.max_z_displacement, std::abs(r.displacements(6 * n + 2)));
    return r;
}

inline std::pair<std::vector<AnalysisResult>, ObjectiveInputs> analyze(
    const GridModel& model, const std::vector<LoadCase>& cases) {
    const SparseMat K = assemble_stiffness(model);
    std::vector<AnalysisResult> results;
    ObjectiveInputs obj;
    obj.mass = total_mass(model);
    for (const auto& lc : cases) {
        AnalysisResult r;
        try {
            r = analyze_case(model, K, lc);
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string(lc.kind == LoadCase::Kind::gravity
                                                     ? "gravity case: "
                                                     : "mesh case: ") + e.what());
        }
        if (lc.kind == LoadCase::Kind::gravity) obj.u_gravity = r.strain_energy;
        else obj.u_mesh = r.strain_energy;
        obj.sigma_max = std::max(obj.sigma_max, r.sigma_max);
        obj.max_z_displacement = std::max(obj.max_z_displacement, r.max_z_displacement);
        results.push_back(std::move(r));
    }
    return {std::move(results), obj};
}

// Attach materials/supports to an extracted grid skeleton. Boundary nodes are
// pinned by default (translations fixed, rotations free).
inline GridModel make_grid_model(const geom::GridShell& shell, const Material& mat,
                                 const Section& sec) {
    GridModel m;
    m.nodes = shell.nodes;
    m.boundary = shell.boundary;
    for (const auto& [a, b] : shell.edges) m.elements.push_back({a, b, mat, sec});
    m.supports.resize(m.nodes.size());
    for (std::size_t n = 0; n < m.nodes.size(); ++n)
        if (shell.boundary[n]) m.supports[n] = {0, 1, 2};
    m.validate();
    return m;
}

}  // namespace formfind::frame
