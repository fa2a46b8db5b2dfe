#pragma once

// Multi-objective evolutionary search (non-dominated sorting, crowding
// distance, simulated binary crossover + polynomial mutation) over grid-shell
// design variables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "formfind/frame.hpp"
#include "formfind/geom.hpp"
#include "formfind/util.hpp"

namespace formfind::evo {

// Objectives an infeasible candidate is assigned; effectively infinite but
// kept finite so ordering stays total.
constexpr double kInfeasiblePenalty = 1e30;

struct ObjectiveVector {
    double u_gravity = 0.0;
    double u_mesh = 0.0;
    double mass = 0.0;
    double sigma_max = 0.0;

    std::array<double, 4> as_array() const { return {u_gravity, u_mesh, mass, sigma_max}; }
    bool feasible() const { return u_gravity < kInfeasiblePenalty; }
    static ObjectiveVector infeasible() {
        return {kInfeasiblePenalty, kInfeasiblePenalty, kInfeasiblePenalty, kInfeasiblePenalty};
    }
};

struct DesignVariable {
    enum class Kind { control_point_z, weight };
    Kind kind = Kind::control_point_z;
    int curve_index = 0;
    int control_point_index = 0;
    double lower = 0.0;
    double upper = 1.0;
};

struct DesignVariableSpec {
    std::vector<DesignVariable> variables;

    void validate() const {
        for (const auto& v : variables) {
            if (!(std::isfinite(v.lower) && std::isfinite(v.upper) && v.lower < v.upper))
                throw std::invalid_argument("variable bounds must be finite with lower < upper");
            if (v.kind == DesignVariable::Kind::weight && !(v.lower > 0))
                throw std::invalid_argument("weight lower bound must be positive");
        }
    }
};

using DesignVector = std::vector<double>;

struct GAConfig {
    int population = 40;
    int generations = 60;
    double crossover_prob = 0.9;
    double sbx_eta = 15.0;
    double mutation_prob = -1.0;  // <0 means 1/n_vars
    double mutation_eta = 20.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (population < 4 || population % 2 != 0)
            throw std::invalid_argument("population must be even and >= 4");
        if (generations < 1) throw std::invalid_argument("generations must be >= 1");
    }
};

struct GenerationRecord {
    std::vector<double> best;          // best value per objective in this population
    std::vector<double> best_so_far;   // monotone archive minima per objective
    std::vector<std::vector<double>> population_objectives;
};

struct ArchiveEntry {
    DesignVector design;
    std::vector<double> objectives;
};

struct RunHistory {
    std::vector<GenerationRecord> generations;
    std::vector<ArchiveEntry> final_front;
};

// A problem is a bound box plus an objective callback (any number of
// objectives, all minimized).
struct Problem {
    std::vector<std::pair<double, double>> bounds;
    std::function<std::vector<double>(const DesignVector&)> evaluate;
    DesignVector baseline;  // optional; seeded into the initial population if set

    std::size_t n_vars() const { return bounds.size(); }
};

inline bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("objective size mismatch");
    bool strictly = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strictly = true;
    }
    return strictly;
}

inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
    const auto aa = a.as_array(), bb = b.as_array();
    return dominates(std::vector<double>(aa.begin(), aa.end()),
                     std::vector<double>(bb.begin(), bb.end()));
}

// Fast non-dominated sort; returns fronts as index lists, front 0 first.
inline std::vector<std::vector<int>> non_dominated_sort(
    const std::vector<std::vector<double>>& objs) {
    const int n = static_cast<int>(objs.size());
    if (n == 0) throw std::invalid_argument("empty population");
    std::vector<std::vector<int>> dominated_by(n);
    std::vector<int> domination_count(n, 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(objs[i], objs[j])) dominated_by[i].push_back(j);
            else if (dominates(objs[j], objs[i])) ++domination_count[i];
        }
    std::vector<std::vector<int>> fronts;
    std::vector<int> current;
    for (int i = 0; i < n; ++i)
        if (domination_count[i] == 0) current.push_back(i);
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<int> next;
        for (int i : current)
            for (int j : dominated_by[i])
                if (--domination_count[j] == 0) next.push_back(j);
        current = std::move(next);
    }
    return fronts;
}

// Crowding distance per front member; boundary members get +inf per objective.
inline std::vector<double> crowding_distance(const std::vector<std::vector<double>>& front) {
    const int n = static_cast<int>(front.size());
    if (n == 0) throw std::invalid_argument("empty front");
    const std::size_t m = front[0].size();
    std::vector<double> dist(n, 0.0);
    const double inf = std::numeric_limits<double>::infinity();
    if (n <= 2) return std::vector<double>(n, inf);
    for (std::size_t k = 0; k < m; ++k) {
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return front[a][k] < front[b][k]; });
        dist[order.front()] = inf;
        dist[order.back()] = inf;
        const double range = front[order.back()][k] - front[order.front()][k];
        if (range <= 0) continue;
        for (int i = 1; i < n - 1; ++i) {
            if (std::isinf(dist[order[i]])) continue;
            dist[order[i]] += (front[order[i + 1]][k] - front[order[i - 1]][k]) / range;
        }
    }
    return dist;
}

namespace detail {

inline double clip(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

inline void sbx_crossover(const Problem& prob, const GAConfig& cfg, util::Rng& rng,
                          DesignVector& a, DesignVector& b) {
    if (rng.uniform() > cfg.crossover_prob) return;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (rng.uniform() > 0.5) continue;
        if (std::abs(a[i] - b[i]) < 1e-14) continue;
        const double u = rng.uniform();
        const double beta = (u <= 0.5) ? std::pow(2.0 * u, 1.0 / (cfg.sbx_eta + 1.0))
                                       : std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (cfg.sbx_eta + 1.0));
        const double c1 = 0.5 * ((1 + beta) * a[i] + (1 - beta) * b[i]);
        const double c2 = 0.5 * ((1 - beta) * a[i] + (1 + beta) * b[i]);
        a[i] = clip(c1, prob.bounds[i].first, prob.bounds[i].second);
        b[i] = clip(c2, prob.bounds[i].first, prob.bounds[i].second);
    }
}

inline void polynomial_mutation(const Problem& prob, const GAConfig& cfg, util::Rng& rng,
                                DesignVector& x) {
    const double pm = cfg.mutation_prob < 0 ? 1.0 / prob.n_vars() : cfg.mutation_prob;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (rng.uniform() > pm) continue;
        const double lo = prob.bounds[i].first, hi = prob.bounds[i].second;
        const double u = rng.uniform();
        double delta;
        if (u < 0.5) delta = std::pow(2.0 * u, 1.0 / (cfg.mutation_eta + 1.0)) - 1.0;
        else delta = 1.0 - std::pow(2.0 * (1.0 - u), 1.0 / (cfg.mutation_eta + 1.0));
        x[i] = clip(x[i] + delta * (hi - lo), lo, hi);
    }
}

}  // namespace detail

// SBX + polynomial mutation over parent pairs, bounds respected by clipping.
inline std::vector<DesignVector> variation(const std::vector<DesignVector>& parents,
                                           const Problem& prob, const GAConfig& cfg,
                                           util::Rng& rng) {
    std::vector<DesignVector> offspring;
    for (std::size_t i = 0; i + 1 < parents.size(); i += 2) {
        DesignVector a = parents[i], b = parents[i + 1];
        detail::sbx_crossover(prob, cfg, rng, a, b);
        detail::polynomial_mutation(prob, cfg, rng, a);
        detail::polynomial_mutation(prob, cfg, rng, b);
        offspring.push_back(std::move(a));
        offspring.push_back(std::move(b));
    }
    if (parents.size() % 2 == 1) {
        DesignVector a = parents.back();
        detail::polynomial_mutation(prob, cfg, rng, a);
        offspring.push_back(std::move(a));
    }
    return offspring;
}

inline RunHistory run(const Problem& prob, const GAConfig& cfg) {
    cfg.validate();
    if (prob.bounds.empty() || !prob.evaluate) throw std::invalid_argument("invalid problem");
    util::Rng rng(cfg.seed);

    std::vector<DesignVector> pop;
    if (!prob.baseline.empty()) pop.push_back(prob.baseline);
    while (static_cast<int>(pop.size()) < cfg.population) {
        DesignVector x(prob.n_vars());
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = rng.uniform(prob.bounds[i].first, prob.bounds[i].second);
        pop.push_back(std::move(x));
    }
    auto evaluate_all = [&](const std::vector<DesignVector>& xs) {
        std::vector<std::vector<double>> out;
        out.reserve(xs.size());
        for (const auto& x : xs) out.push_back(prob.evaluate(x));
        return out;
    };
    std::vector<std::vector<double>> objs = evaluate_all(pop);
    const std::size_t n_obj = objs[0].size();
    bool any_feasible = false;
    for (const auto& o : objs)
        if (o[0] < kInfeasiblePenalty) any_feasible = true;
    if (!any_feasible) throw std::runtime_error("all individuals infeasible at startup");

    std::vector<double> best_so_far(n_obj, std::numeric_limits<double>::infinity());
    RunHistory history;

    auto rank_and_crowd = [&](const std::vector<std::vector<double>>& o,
                              std::vector<int>& rank, std::vector<double>& crowd) {
        const auto fronts = non_dominated_sort(o);
        rank.assign(o.size(), 0);
        crowd.assign(o.size(), 0.0);
        for (std::size_t f = 0; f < fronts.size(); ++f) {
            std::vector<std::vector<double>> fo;
            for (int idx : fronts[f]) fo.push_back(o[idx]);
            const auto cd = crowding_distance(fo);
            for (std::size_t i = 0; i < fronts[f].size(); ++i) {
                rank[fronts[f][i]] = static_cast<int>(f);
                crowd[fronts[f][i]] = cd[i];
            }
        }
        return fronts;
    };

    std::vector<int> rank;
    std::vector<double> crowd;
    rank_and_crowd(objs, rank, crowd);

    for (int gen = 0; gen < cfg.generations; ++gen) {
        // binary tournament on (rank, crowding)
        auto tournament = [&]() -> const DesignVector& {
            const int a = static_cast<int>(rng.index(pop.size()));
            const int b = static_cast<int>(rng.index(pop.size()));
            if (rank[a] != rank[b]) return pop[rank[a] < rank[b] ? a : b];
            return pop[crowd[a] >= crowd[b] ? a : b];
        };
        std::vector<DesignVector> parents;
        for (int i = 0; i < cfg.population; ++i) parents.push_back(tournament());
        std::vector<DesignVector> offspring = variation(parents, prob, cfg, rng);
        std::vector<std::vector<double>> off_objs = evaluate_all(offspring);

        // elitist environmental selection on parents + offspring
        std::vector<DesignVector> pool = pop;
        pool.insert(pool.end(), offspring.begin(), offspring.end());
        std::vector<std::vector<double>> pool_objs = objs;
        pool_objs.insert(pool_objs.end(), off_objs.begin(), off_objs.end());

        std::vector<int> pool_rank;
        std::vector<double> pool_crowd;
        const auto fronts = rank_and_crowd(pool_objs, pool_rank, pool_crowd);

        std::vector<int> selected;
        for (const auto& front : fronts) {
            if (selected.size() + front.size() <= static_cast<std::size_t>(cfg.population)) {
                selected.insert(selected.end(), front.begin(), front.end());
            } else {
                std::vector<int> order = front;
                std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                    return pool_crowd[a] > pool_crowd[b];
                });
                for (int idx : order) {
                    if (selected.size() == static_cast<std::size_t>(cfg.population)) break;
                    selected.push_back(idx);
                }
            }
            if (selected.size() == static_cast<std::size_t>(cfg.population)) break;
        }
        std::vector<DesignVector> new_pop;
        std::vector<std::vector<double>> new_objs;
        for (int idx : selected) {
            new_pop.push_back(pool[idx]);
            new_objs.push_back(pool_objs[idx]);
        }
        pop = std::move(new_pop);
        objs = std::move(new_objs);
        rank_and_crowd(objs, rank, crowd);

        GenerationRecord rec;
        rec.best.assign(n_obj, std::numeric_limits<double>::infinity());
        for (const auto& o : objs)
            for (std::size_t k = 0; k < n_obj; ++k) rec.best[k] = std::min(rec.best[k], o[k]);
        for (std::size_t k = 0; k < n_obj; ++k)
            best_so_far[k] = std::min(best_so_far[k], rec.best[k]);
        rec.best_so_far = best_so_far;
        rec.population_objectives = objs;
        history.generations.push_back(std::move(rec));
    }

    const auto final_fronts = non_dominated_sort(objs);
    for (int idx : final_fronts.front())
        history.final_front.push_back({pop[idx], objs[idx]});
    return history;
}

struct ObjectiveSeries {
    double initial = 0.0;
    double best = 0.0;
    double reduction_percent = 0.0;
    std::vector<double> best_per_generation;
};

inline std::vector<ObjectiveSeries> convergence_report(const RunHistory& history) {
    if (history.generations.empty()) throw std::invalid_argument("empty history");
    const std::size_t n_obj = history.generations.front().best.size();
    std::vector<ObjectiveSeries> out(n_obj);
    for (std::size_t k = 0; k < n_obj; ++k) {
        auto& s = out[k];
        s.initial = history.generations.front().best[k];
        s.best = history.generations.back().best_so_far[k];
        for (const auto& g : history.generations) s.best_per_generation.push_back(g.best[k]);
        s.reduction_percent = (s.initial != 0.0) ? 100.0 * (s.initial - s.best) / s.initial : 0.0;
    }
    return out;
}

}  // namespace formfind::evo
