#pragma once

// NURBS kernel: basis functions, curve/surface evaluation, derivatives,
// curvature/tangent extraction, sampling, lofting and grid extraction.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace formfind::geom {

using Vec3 = Eigen::Vector3d;

struct KnotVector {
    std::vector<double> values;

    bool non_decreasing() const {
        for (std::size_t i = 1; i < values.size(); ++i)
            if (values[i] < values[i - 1]) return false;
        return true;
    }

    // Clamped for the given degree: first/last knot repeated degree+1 times.
    bool clamped(int degree) const {
        const int m = static_cast<int>(values.size());
        if (m < 2 * (degree + 1)) return false;
        for (int i = 0; i <= degree; ++i) {
            if (values[i] != values.front()) return false;
            if (values[m - 1 - i] != values.back()) return false;
        }
        return true;
    }
};

// Uniform clamped knot vector for n_ctrl control points of the given degree,
// spanning [0,1].
inline KnotVector uniform_clamped_knots(int degree, int n_ctrl) {
    if (n_ctrl < degree + 1) throw std::invalid_argument("too few control points for degree");
    KnotVector kv;
    const int n_interior = n_ctrl - degree - 1;
    for (int i = 0; i <= degree; ++i) kv.values.push_back(0.0);
    for (int i = 1; i <= n_interior; ++i)
        kv.values.push_back(static_cast<double>(i) / (n_interior + 1));
    for (int i = 0; i <= degree; ++i) kv.values.push_back(1.0);
    return kv;
}

struct NurbsCurve {
    int degree = 1;
    std::vector<Vec3> control_points;
    std::vector<double> weights;
    KnotVector knots;

    double domain_begin() const { return knots.values[degree]; }
    double domain_end() const { return knots.values[knots.values.size() - degree - 1]; }

    void validate() const {
        if (degree < 1) throw std::invalid_argument("curve degree must be >= 1");
        if (control_points.size() != weights.size())
            throw std::invalid_argument("control point / weight count mismatch");
        if (knots.values.size() != control_points.size() + degree + 1)
            throw std::invalid_argument("knot count must equal #control points + degree + 1");
        if (!knots.non_decreasing()) throw std::invalid_argument("knots must be non-decreasing");
        for (double w : weights)
            if (!(w > 0.0)) throw std::invalid_argument("weights must be positive");
    }
};

struct NurbsSurface {
    int degree_u = 1;
    int degree_v = 1;
    // control_net[i][j]: i runs along u, j along v.
    std::vector<std::vector<Vec3>> control_net;
    std::vector<std::vector<double>> weights;
    KnotVector knots_u, knots_v;

    std::size_t count_u() const { return control_net.size(); }
    std::size_t count_v() const { return control_net.empty() ? 0 : control_net[0].size(); }

    double domain_u_begin() const { return knots_u.values[degree_u]; }
    double domain_u_end() const { return knots_u.values[knots_u.values.size() - degree_u - 1]; }
    double domain_v_begin() const { return knots_v.values[degree_v]; }
    double domain_v_end() const { return knots_v.values[knots_v.values.size() - degree_v - 1]; }

    void validate() const {
        if (degree_u < 1 || degree_v < 1) throw std::invalid_argument("surface degrees must be >= 1");
        if (control_net.empty()) throw std::invalid_argument("empty control net");
        const std::size_t nv = control_net[0].size();
        if (nv == 0) throw std::invalid_argument("empty control net row");
        if (weights.size() != control_net.size())
            throw std::invalid_argument("weight grid shape mismatch");
        for (std::size_t i = 0; i < control_net.size(); ++i) {
            if (control_net[i].size() != nv || weights[i].size() != nv)
                throw std::invalid_argument("control net must be rectangular");
            for (double w : weights[i])
                if (!(w > 0.0)) throw std::invalid_argument("weights must be positive");
        }
        if (knots_u.values.size() != count_u() + degree_u + 1 ||
            knots_v.values.size() != count_v() + degree_v + 1)
            throw std::invalid_argument("surface knot count relation violated");
        if (!knots_u.non_decreasing() || !knots_v.non_decreasing())
            throw std::invalid_argument("knots must be non-decreasing");
    }
};

struct CurveSample {
    Vec3 position;
    double u = 0.0;
    double curvature = 0.0;
    Vec3 tangent;
};

// Knot span index such that knots[span] <= u < knots[span+1]; at the right
// domain end, returns the last span of nonzero width.
inline int find_span(double u, int degree, const KnotVector& knots) {
    const int n = static_cast<int>(knots.values.size()) - degree - 2;  // last control index
    const double a = knots.values[degree];
    const double b = knots.values[n + 1];
    if (u < a || u > b) throw std::domain_error("parameter outside knot domain");
    if (u >= b) return n;
    int lo = degree, hi = n + 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (u < knots.values[mid]) hi = mid;
        else lo = mid;
    }
    return lo;
}

namespace detail {

// Nonzero basis values N_{span-p..span, p}(u), triangular recursion.
inline void basis_values(int span, double u, int p, const std::vector<double>& U,
                         std::vector<double>& N) {
    N.assign(p + 1, 0.0);
    std::vector<double> left(p + 1), right(p + 1);
    N[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = u - U[span + 1 - j];
        right[j] = U[span + j] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = N[r] / (right[r + 1] + left[j - r]);
            N[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        N[j] = saved;
    }
}

// Basis values and derivatives up to order d at u. ders is (d+1) x (p+1).
inline void basis_derivatives(int span, double u, int p, int d, const std::vector<double>& U,
                              std::vector<std::vector<double>>& ders) {
    std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
    std::vector<double> left(p + 1), right(p + 1);
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = u - U[span + 1 - j];
        right[j] = U[span + j] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    ders.assign(d + 1, std::vector<double>(p + 1, 0.0));
    for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];

    std::vector<std::vector<double>> a(2, std::vector<double>(p + 1, 0.0));
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= d; ++k) {
            double dv = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                dv = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = (rk >= -1) ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                dv += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                dv += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = dv;
            std::swap(s1, s2);
        }
    }
    double fac = p;
    for (int k = 1; k <= d; ++k) {
        for (int j = 0; j <= p; ++j) ders[k][j] *= fac;
        fac *= (p - k);
    }
}

}  // namespace detail

// Nonzero basis functions at u: exactly degree+1 (index, value) pairs.
inline std::vector<std::pair<int, double>> basis_functions(double u, int degree,
                                                           const KnotVector& knots) {
    const int span = find_span(u, degree, knots);
    std::vector<double> N;
    detail::basis_values(span, u, degree, knots.values, N);
    std::vector<std::pair<int, double>> out;
    out.reserve(degree + 1);
    for (int j = 0; j <= degree; ++j) out.emplace_back(span - degree + j, N[j]);
    return out;
}

inline Vec3 curve_point(const NurbsCurve& c, double u) {
    const int p = c.degree;
    const int span = find_span(u, p, c.knots);
    std::vector<double> N;
    detail::basis_values(span, u, p, c.knots.values, N);
    Vec3 num = Vec3::Zero();
    double den = 0.0;
    for (int j = 0; j <= p; ++j) {
        const int i = span - p + j;
        const double w = N[j] * c.weights[i];
        num += w * c.control_points[i];
        den += w;
    }
    return num / den;
}

// Derivatives of C(u) up to `order` (1 or 2), via quotient rule on the
// homogeneous form A(u)/w(u).
inline std::vector<Vec3> curve_derivatives(const NurbsCurve& c, double u, int order) {
    if (order < 1 || order > 2) throw std::invalid_argument("derivative order must be 1 or 2");
    const int p = c.degree;
    const int span = find_span(u, p, c.knots);
    std::vector<std::vector<double>> ders;
    detail::basis_derivatives(span, u, p, order, c.knots.values, ders);

    std::vector<Vec3> A(order + 1, Vec3::Zero());
    std::vector<double> w(order + 1, 0.0);
    for (int k = 0; k <= order; ++k) {
        for (int j = 0; j <= p; ++j) {
            const int i = span - p + j;
            const double f = ders[k][j] * c.weights[i];
            A[k] += f * c.control_points[i];
            w[k] += f;
        }
    }
    const Vec3 C0 = A[0] / w[0];
    std::vector<Vec3> out;
    const Vec3 C1 = (A[1] - w[1] * C0) / w[0];
    out.push_back(C1);
    if (order == 2) out.push_back((A[2] - 2.0 * w[1] * C1 - w[2] * C0) / w[0]);
    return out;
}

// kappa = |C' x C''| / |C'|^3, t = C'/|C'|. A vanishing first derivative is an
// error, not zero curvature.
inline std::pair<double, Vec3> curvature_and_tangent(const NurbsCurve& c, double u) {
    const auto d = curve_derivatives(c, u, 2);
    const double speed = d[0].norm();
    if (speed < 1e-9)
        throw std::runtime_error("singular parametrization at u=" + std::to_string(u));
    const double kappa = d[0].cross(d[1]).norm() / (speed * speed * speed);
    return {kappa, d[0] / speed};
}

inline std::vector<CurveSample> sample_curve(const NurbsCurve& c, int n_segments) {
    if (n_segments < 1) throw std::invalid_argument("n_segments must be >= 1");
    const double a = c.domain_begin(), b = c.domain_end();
    std::vector<CurveSample> out;
    out.reserve(n_segments + 1);
    for (int k = 0; k <= n_segments; ++k) {
        const double u = (k == n_segments) ? b : a + (b - a) * k / n_segments;
        CurveSample s;
        s.u = u;
        s.position = curve_point(c, u);
        std::tie(s.curvature, s.tangent) = curvature_and_tangent(c, u);
        out.push_back(s);
    }
    return out;
}

inline Vec3 surface_point(const NurbsSurface& s, double u, double v) {
    const int p = s.degree_u, q = s.degree_v;
    const int su = find_span(u, p, s.knots_u);
    const int sv = find_span(v, q, s.knots_v);
    std::vector<double> Nu, Nv;
    detail::basis_values(su, u, p, s.knots_u.values, Nu);
    detail::basis_values(sv, v, q, s.knots_v.values, Nv);
    Vec3 num = Vec3::Zero();
    double den = 0.0;
    for (int a = 0; a <= p; ++a) {
        const int i = su - p + a;
        for (int b = 0; b <= q; ++b) {
            const int j = sv - q + b;
            const double f = Nu[a] * Nv[b] * s.weights[i][j];
            num += f * s.control_net[i][j];
            den += f;
        }
    }
    return num / den;
}

// Skin a surface through section curves. The u-direction reuses the section
// degree/knots; the v-direction interpolates each homogeneous control column
// with a clamped degree-q curve at uniformly spaced parameters.
inline NurbsSurface loft_surface(const std::vector<NurbsCurve>& sections, int q) {
    const int K = static_cast<int>(sections.size());
    if (q < 1) throw std::invalid_argument("v-degree must be >= 1");
    if (K < q + 1) throw std::invalid_argument("need at least q+1 section curves");
    const NurbsCurve& first = sections.front();
    for (const auto& s : sections) {
        s.validate();
        if (s.degree != first.degree ||
            s.control_points.size() != first.control_points.size() ||
            s.knots.values.size() != first.knots.values.size())
            throw std::invalid_argument("incompatible section curves");
        for (std::size_t k = 0; k < s.knots.values.size(); ++k)
            if (std::abs(s.knots.values[k] - first.knots.values[k]) > 1e-12)
                throw std::invalid_argument("incompatible section knot vectors");
    }

    // Interpolation parameters and averaged clamped knot vector in v.
    std::vector<double> t(K);
    for (int k = 0; k < K; ++k) t[k] = static_cast<double>(k) / (K - 1);
    KnotVector kv;
    for (int i = 0; i <= q; ++i) kv.values.push_back(0.0);
    for (int j = 1; j <= K - q - 1; ++j) {
        double acc = 0.0;
        for (int i = j; i <= j + q - 1; ++i) acc += t[i];
        kv.values.push_back(acc / q);
    }
    for (int i = 0; i <= q; ++i) kv.values.push_back(1.0);

    // Collocation matrix N(t_k) and its LU factorization, shared by all columns.
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(K, K);
    for (int r = 0; r < K; ++r)
        for (const auto& [idx, val] : basis_functions(t[r], q, kv)) M(r, idx) = val;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);

    const std::size_t nu = first.control_points.size();
    NurbsSurface surf;
    surf.degree_u = first.degree;
    surf.degree_v = q;
    surf.knots_u = first.knots;
    surf.knots_v = kv;
    surf.control_net.assign(nu, std::vector<Vec3>(K));
    surf.weights.assign(nu, std::vector<double>(K));

    Eigen::MatrixXd rhs(K, 4), sol(K, 4);
    for (std::size_t i = 0; i < nu; ++i) {
        for (int k = 0; k < K; ++k) {
            const double w = sections[k].weights[i];
            rhs.row(k).head<3>() = (w * sections[k].control_points[i]).transpose();
            rhs(k, 3) = w;
        }
        sol = lu.solve(rhs);
        for (int k = 0; k < K; ++k) {
            const double w = sol(k, 3);
            if (!(w > 0.0))
                throw std::runtime_error("lofting produced a non-positive weight");
            surf.control_net[i][k] = sol.row(k).head<3>().transpose() / w;
            surf.weights[i][k] = w;
        }
    }
    return surf;
}

// Grid skeleton extracted at uniform parameter stations; materials, supports
// and loads are attached by the structural layer.
struct GridShell {
    int nu = 0, nv = 0;  // segment counts; (nu+1)*(nv+1) nodes
    std::vector<Vec3> nodes;
    std::vector<std::pair<int, int>> edges;
    std::vector<bool> boundary;

    int node_index(int i, int j) const { return i * (nv + 1) + j; }

    // Largest discrete curvature over consecutive node triples along both
    // iso-directions (circumradius of each triple).
    double max_discrete_curvature() const {
        auto menger = [](const Vec3& a, const Vec3& b, const Vec3& c) {
            const double la = (b - a).norm(), lb = (c - b).norm(), lc = (c - a).norm();
            const double area2 = (b - a).cross(c - a).norm();
            if (la * lb * lc < 1e-30) return 0.0;
            return 2.0 * area2 / (la * lb * lc);
        };
        double kmax = 0.0;
        for (int i = 0; i <= nu; ++i)
            for (int j = 1; j < nv; ++j)
                kmax = std::max(kmax, menger(nodes[node_index(i, j - 1)], nodes[node_index(i, j)],
                                             nodes[node_index(i, j + 1)]));
        for (int j = 0; j <= nv; ++j)
            for (int i = 1; i < nu; ++i)
                kmax = std::max(kmax, menger(nodes[node_index(i - 1, j)], nodes[node_index(i, j)],
                                             nodes[node_index(i + 1, j)]));
        return kmax;
    }
};

inline GridShell extract_grid(const NurbsSurface& s, int nu, int nv) {
    if (nu < 1 || nv < 1) throw std::invalid_argument("grid divisions must be >= 1");
    GridShell g;
    g.nu = nu;
    g.nv = nv;
    const double ua = s.domain_u_begin(), ub = s.domain_u_end();
    const double va = s.domain_v_begin(), vb = s.domain_v_end();
    for (int i = 0; i <= nu; ++i) {
        const double u = (i == nu) ? ub : ua + (ub - ua) * i / nu;
        for (int j = 0; j <= nv; ++j) {
            const double v = (j == nv) ? vb : va + (vb - va) * j / nv;
            g.nodes.push_back(surface_point(s, u, v));
            g.boundary.push_back(i == 0 || i == nu || j == 0 || j == nv);
        }
    }
    for (int i = 0; i <= nu; ++i)
        for (int j = 0; j < nv; ++j) g.edges.emplace_back(g.node_index(i, j), g.node_index(i, j + 1));
    for (int j = 0; j <= nv; ++j)
        for (int i = 0; i < nu; ++i) g.edges.emplace_back(g.node_index(i, j), g.node_index(i + 1, j));
    for (const auto& [a, b] : g.edges)
        if ((g.nodes[a] - g.nodes[b]).norm() < 1e-9)
            throw std::runtime_error("degenerate grid: coincident nodes");
    return g;
}

}  // namespace formfind::geom
