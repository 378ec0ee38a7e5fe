#pragma once

#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "irislab/domain.hpp"

// Reference data shared by the domain unit tests and the acceptance binary.
namespace testing {

using namespace irislab;

inline void paint(GridImage& g, Color c, int r0, int c0, int r1, int c1) {
  for (int r = r0; r <= r1; ++r)
    for (int col = c0; col <= c1; ++col) g.at(r, col) = static_cast<int>(c);
}

inline void dot(GridImage& g, Color c, int r, int col) { g.at(r, col) = static_cast<int>(c); }

inline SceneSpec single(Color c) { return SceneSpec{{{c, 1}}, std::nullopt}; }
inline SceneSpec counting(Color c, int n) { return SceneSpec{{{c, n}}, std::nullopt}; }
inline SceneSpec pair(Color a, Color b) { return SceneSpec{{{a, 1}, {b, 1}}, std::nullopt}; }
inline SceneSpec spatial(Color a, Direction d, Color b) { return SceneSpec{{{a, 1}, {b, 1}}, Relation{a, b, d}}; }

// Union-find labelling, independent of the library's traversal.
struct OracleComponent {
  int color;
  std::vector<Cell> cells;
};

inline std::vector<OracleComponent> union_find_components(const GridImage& g) {
  std::vector<int> parent(kImageTokens);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int r = 0; r < kGridSide; ++r) {
    for (int c = 0; c < kGridSide; ++c) {
      const int i = r * kGridSide + c;
      if (g.cells[i] == 0) continue;
      if (c + 1 < kGridSide && g.cells[i + 1] == g.cells[i]) parent[find(i + 1)] = find(i);
      if (r + 1 < kGridSide && g.cells[i + kGridSide] == g.cells[i]) parent[find(i + kGridSide)] = find(i);
    }
  }
  std::map<int, std::size_t> slot;  // root -> output index, in order of first cell
  std::vector<OracleComponent> out;
  for (int i = 0; i < kImageTokens; ++i) {
    if (g.cells[i] == 0) continue;
    const int root = find(i);
    auto it = slot.find(root);
    if (it == slot.end()) {
      it = slot.emplace(root, out.size()).first;
      out.push_back({g.cells[i], {}});
    }
    out[it->second].cells.push_back({i / kGridSide, i % kGridSide});
  }
  return out;
}

inline GridImage random_grid(std::mt19937_64& gen) {
  GridImage g;
  // mix of sparse and dense grids
  const int background_weight = static_cast<int>(gen() % 8);
  for (int& c : g.cells) {
    const int draw = static_cast<int>(gen() % (4 + background_weight));
    c = draw < 4 ? draw + 1 : 0;
  }
  return g;
}

inline SceneSpec random_scene(std::mt19937_64& gen) {
  const auto color = [&] { return kAllColors[gen() % 4]; };
  const Color a = color();
  Color b = color();
  while (b == a) b = color();
  switch (gen() % 4) {
    case 0: return single(a);
    case 1: return counting(a, 2 + static_cast<int>(gen() % 2));
    case 2: return pair(a, b);
    default: return spatial(a, gen() % 2 ? Direction::kLeftOf : Direction::kAbove, b);
  }
}


struct OracleCase {
  const char* name;
  GridImage grid;
  SceneSpec scene;
  double expected;
};

// Hand-evaluated oracle rewards (alpha 0.6, separation threshold 2).
inline std::vector<OracleCase> oracle_fixture() {
  std::vector<OracleCase> cases;
  auto add = [&](const char* name, SceneSpec scene, double expected, auto&& draw) {
    GridImage g;
    draw(g);
    cases.push_back({name, g, std::move(scene), expected});
  };
  const auto R = Color::kRed, G = Color::kGreen, B = Color::kBlue, Y = Color::kYellow;
  const auto L = Direction::kLeftOf, A = Direction::kAbove;

  add("single on empty grid", single(R), 0.0, [](GridImage&) {});
  add("single present", single(R), 1.0, [&](GridImage& g) { dot(g, R, 3, 3); });
  add("single wrong color", single(R), 0.0, [&](GridImage& g) { dot(g, B, 3, 3); });
  add("single present twice", single(R), 1.0, [&](GridImage& g) { dot(g, R, 0, 0); dot(g, R, 5, 5); });
  add("count 2 exact", counting(R, 2), 1.0, [&](GridImage& g) { paint(g, R, 0, 0, 1, 1); dot(g, R, 6, 6); });
  add("count 2 but one", counting(R, 2), 0.0, [&](GridImage& g) { paint(g, R, 0, 0, 1, 3); });
  add("count 3 exact", counting(R, 3), 1.0,
      [&](GridImage& g) { dot(g, R, 0, 0); dot(g, R, 0, 2); dot(g, R, 0, 4); });
  add("count 3 but two plus noise", counting(B, 3), 0.0,
      [&](GridImage& g) { dot(g, B, 0, 0); dot(g, B, 2, 2); dot(g, R, 4, 4); dot(g, R, 6, 6); });
  add("two objects present", pair(R, G), 1.0, [&](GridImage& g) { dot(g, R, 1, 1); dot(g, G, 5, 5); });
  add("two objects one missing", pair(R, G), 0.5, [&](GridImage& g) { dot(g, R, 1, 1); dot(g, Y, 5, 5); });
  add("two objects none", pair(R, G), 0.0, [&](GridImage& g) { dot(g, B, 1, 1); });
  // centroid cols 1.5 and 5.5: separation 4, full credit
  add("left-of far apart", spatial(R, L, B), 1.0,
      [&](GridImage& g) { paint(g, R, 3, 1, 4, 2); paint(g, B, 3, 5, 4, 6); });
  add("left-of reversed", spatial(R, L, B), 0.4,
      [&](GridImage& g) { paint(g, R, 3, 5, 4, 6); paint(g, B, 3, 1, 4, 2); });
  add("left-of second object missing", spatial(R, L, B), 0.2, [&](GridImage& g) { paint(g, R, 3, 1, 4, 2); });
  // separation 0.9 < 2: IoU of boxes rows 0-2 cols 0-2 and rows 0-1 cols 1-2 is 4/9
  add("left-of close uses iou", spatial(R, L, B), 0.6 * 4.0 / 9.0 + 0.4, [&](GridImage& g) {
    dot(g, R, 0, 0);
    dot(g, R, 1, 0);
    paint(g, R, 2, 0, 2, 2);
    paint(g, B, 0, 1, 1, 2);
  });
  add("left-of close disjoint boxes", spatial(R, L, B), 0.4,
      [&](GridImage& g) { paint(g, R, 0, 0, 0, 1); dot(g, B, 0, 2); });
  add("left-of at threshold", spatial(R, L, B), 1.0, [&](GridImage& g) { dot(g, R, 0, 0); dot(g, B, 0, 2); });
  add("above far apart", spatial(R, A, B), 1.0,
      [&](GridImage& g) { paint(g, R, 0, 3, 1, 4); paint(g, B, 5, 3, 6, 4); });
  add("above reversed", spatial(R, A, B), 0.4,
      [&](GridImage& g) { paint(g, R, 5, 3, 6, 4); paint(g, B, 0, 3, 1, 4); });
  add("left-of zero separation", spatial(R, L, B), 0.4, [&](GridImage& g) { dot(g, R, 0, 3); dot(g, B, 5, 3); });
  add("largest component decides", spatial(R, L, B), 1.0, [&](GridImage& g) {
    paint(g, R, 0, 0, 1, 1);
    dot(g, R, 7, 7);
    paint(g, B, 4, 4, 5, 5);
  });

  return cases;
}

}  // namespace testing
