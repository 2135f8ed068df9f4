#pragma once

// Dense-grid marching squares with union-find, used as an independent count
// of the components of {phi = 0} inside the disc of radius R.

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

struct GridCount {
    int circles = 0;
    int arcs = 0;
    int components() const { return circles + arcs; }
};

inline GridCount grid_components(const std::function<double(double, double)>& phi, double R, int N = 512)
{
    const double h = 2.0 * R / N;
    const int M = N + 1;
    std::vector<double> v(static_cast<std::size_t>(M) * M);
    std::vector<char> in(static_cast<std::size_t>(M) * M);
    for (int j = 0; j < M; ++j) {
        for (int i = 0; i < M; ++i) {
            const double x = -R + i * h;
            const double y = -R + j * h;
            v[static_cast<std::size_t>(j) * M + i] = phi(x, y);
            in[static_cast<std::size_t>(j) * M + i] = (x * x + y * y <= R * R);
        }
    }
    auto val = [&](int i, int j) { return v[static_cast<std::size_t>(j) * M + i]; };
    auto inside = [&](int i, int j) { return in[static_cast<std::size_t>(j) * M + i] != 0; };
    // Edge ids: horizontal edges (i,j)-(i+1,j) then vertical edges (i,j)-(i,j+1).
    const std::size_t nh = static_cast<std::size_t>(N) * M;
    auto hedge = [&](int i, int j) { return static_cast<std::size_t>(j) * N + i; };
    auto vedge = [&](int i, int j) { return nh + static_cast<std::size_t>(i) * N + j; };
    const std::size_t ne = nh + static_cast<std::size_t>(M) * N;
    std::vector<std::size_t> parent(ne);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::vector<int> degree(ne, 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    auto join = [&](std::size_t a, std::size_t b) {
        ++degree[a];
        ++degree[b];
        parent[find(a)] = find(b);
    };
    auto pos = [](double s) { return s >= 0.0; };
    for (int j = 0; j < N; ++j) {
        for (int i = 0; i < N; ++i) {
            if (!(inside(i, j) && inside(i + 1, j) && inside(i, j + 1) && inside(i + 1, j + 1))) {
                continue;
            }
            const double a = val(i, j);
            const double b = val(i + 1, j);
            const double c = val(i + 1, j + 1);
            const double d = val(i, j + 1);
            // bottom, right, top, left
            const std::size_t e[4] = {hedge(i, j), vedge(i + 1, j), hedge(i, j + 1), vedge(i, j)};
            const bool cross[4] = {pos(a) != pos(b), pos(b) != pos(c), pos(c) != pos(d), pos(d) != pos(a)};
            std::vector<int> k;
            for (int q = 0; q < 4; ++q) {
                if (cross[q]) {
                    k.push_back(q);
                }
            }
            if (k.size() == 2) {
                join(e[k[0]], e[k[1]]);
            } else if (k.size() == 4) {
                const double centre = 0.25 * (a + b + c + d);
                if (pos(centre) == pos(a)) {
                    // a and c connect through the centre; the curve cuts off b and d
                    join(e[0], e[1]);
                    join(e[2], e[3]);
                } else {
                    join(e[0], e[3]);
                    join(e[1], e[2]);
                }
            }
        }
    }
    std::vector<int> ends(ne, 0);
    std::vector<char> used(ne, 0);
    for (std::size_t e = 0; e < ne; ++e) {
        if (degree[e] == 0) {
            continue;
        }
        const std::size_t r = find(e);
        used[r] = 1;
        if (degree[e] == 1) {
            ++ends[r];
        }
    }
    GridCount out;
    for (std::size_t r = 0; r < ne; ++r) {
        if (!used[r]) {
            continue;
        }
        if (ends[r] == 0) {
            ++out.circles;
        } else {
            ++out.arcs;
        }
    }
    return out;
}

}  // namespace oracle
