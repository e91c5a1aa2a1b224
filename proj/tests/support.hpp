#pragma once

#include "parcon/error.hpp"
#include "parcon/measure.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <cstdint>
#include <random>
#include <vector>

namespace testdata {

inline parcon::EmpiricalMeasure gaussian(std::size_t n, std::size_t dim, std::uint64_t seed, double mean = 3.0,
                                         double sd = 1.0) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(mean, sd);
    std::vector<double> rows(n * dim);
    for (auto& v : rows) v = dist(gen);
    return parcon::EmpiricalMeasure(std::move(rows), dim);
}

inline parcon::EmpiricalMeasure uniform(std::size_t n, std::size_t dim, std::uint64_t seed, double lo = 0.0,
                                        double hi = 1.0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> rows(n * dim);
    for (auto& v : rows) v = dist(gen);
    return parcon::EmpiricalMeasure(std::move(rows), dim);
}

// Distance in units in the last place between two doubles of equal sign.
inline std::uint64_t ulps(double a, double b) {
    if (a == b) return 0;
    auto key = [](double x) {
        const auto bits = std::bit_cast<std::int64_t>(x);
        return bits < 0 ? std::numeric_limits<std::int64_t>::min() - bits : bits;
    };
    const auto ka = key(a);
    const auto kb = key(b);
    return ka > kb ? static_cast<std::uint64_t>(ka - kb) : static_cast<std::uint64_t>(kb - ka);
}

// Plain gradient ascent on the logistic log-likelihood with a fixed step.
inline std::vector<double> logistic_by_gradient_ascent(const parcon::EmpiricalMeasure& m) {
    const std::size_t p = m.dim();
    std::vector<double> theta(p, 0.0);
    double trace = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        trace += 1.0;
        for (std::size_t j = 0; j + 1 < p; ++j) trace += m.at(i, j) * m.at(i, j);
    }
    const double step = 1.0 / (0.25 * trace);
    for (int iter = 0; iter < 2'000'000; ++iter) {
        std::vector<double> grad(p, 0.0);
        for (std::size_t i = 0; i < m.size(); ++i) {
            double eta = theta[0];
            for (std::size_t j = 1; j < p; ++j) eta += theta[j] * m.at(i, j - 1);
            const double r = m.at(i, p - 1) - 1.0 / (1.0 + std::exp(-eta));
            grad[0] += r;
            for (std::size_t j = 1; j < p; ++j) grad[j] += r * m.at(i, j - 1);
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            theta[j] += step * grad[j];
            norm += grad[j] * grad[j];
        }
        if (std::sqrt(norm) < 1e-13) break;
    }
    return theta;
}

inline parcon::EmpiricalMeasure logistic_fixture() {
    std::mt19937_64 gen(50);
    std::normal_distribution<double> feature;
    std::uniform_real_distribution<double> u;
    std::vector<double> rows;
    for (int i = 0; i < 50; ++i) {
        const double x1 = feature(gen), x2 = feature(gen);
        const double eta = 0.3 + 1.2 * x1 - 0.7 * x2;
        const double y = u(gen) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
        rows.insert(rows.end(), {x1, x2, y});
    }
    return parcon::EmpiricalMeasure(std::move(rows), 3);
}

}  // namespace testdata
