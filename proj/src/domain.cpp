#include "irislab/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

namespace irislab {

namespace vocab {

namespace {
constexpr std::array<std::string_view, kSize> kWords = {
    "one", "two",  "three", "red",  "green", "blue",  "yellow", "left-of", "above", "a",
    "the", "and",  "with",  "<BOI>", "bg",   "R",     "G",      "B",       "Y",     "<PAD>"};
}

const std::vector<TokenId>& text_active_set() {
  static const std::vector<TokenId> ids = [] {
    std::vector<TokenId> v;
    for (TokenId id = 0; id < kNumTextTokens; ++id) v.push_back(id);
    v.push_back(kBoi);
    return v;
  }();
  return ids;
}

const std::vector<TokenId>& image_active_set() {
  static const std::vector<TokenId> ids = [] {
    std::vector<TokenId> v;
    for (int i = 0; i < kNumImageTokens; ++i) v.push_back(kFirstImage + i);
    return v;
  }();
  return ids;
}

const std::vector<TokenId>& active_set(Segment segment) {
  return segment == Segment::kText ? text_active_set() : image_active_set();
}

bool is_text_word(TokenId id) { return id >= 0 && id < kNumTextTokens; }
bool is_image(TokenId id) { return id >= kFirstImage && id < kFirstImage + kNumImageTokens; }

std::string_view word(TokenId id) {
  if (id < 0 || id >= kSize) throw std::out_of_range("token id outside vocabulary");
  return kWords[static_cast<std::size_t>(id)];
}

std::optional<TokenId> lookup(std::string_view w) {
  for (TokenId id = 0; id < kSize; ++id) {
    if (kWords[static_cast<std::size_t>(id)] == w) return id;
  }
  return std::nullopt;
}

TokenId color_word(Color c) { return kRed + static_cast<int>(c) - 1; }

TokenId count_word(int count) {
  if (count < 1 || count > 3) throw std::invalid_argument("count must be in 1..3");
  return kOne + count - 1;
}

TokenId image_token(int cell_color) {
  if (cell_color < 0 || cell_color >= kNumCellColors) throw std::out_of_range("cell color");
  return kFirstImage + cell_color;
}

int cell_color(TokenId image_token) {
  if (!is_image(image_token)) throw std::invalid_argument("segment violation");
  return image_token - kFirstImage;
}

}  // namespace vocab

std::string_view color_name(Color c) { return vocab::word(vocab::color_word(c)); }

std::string_view category_name(PromptCategory c) {
  switch (c) {
    case PromptCategory::kSingle: return "single";
    case PromptCategory::kCounting: return "counting";
    case PromptCategory::kTwoObject: return "two_object";
    case PromptCategory::kSpatial: return "spatial";
  }
  return "?";
}

PromptCategory category_of(const SceneSpec& scene) {
  if (scene.relation) return PromptCategory::kSpatial;
  if (scene.objects.size() == 2) return PromptCategory::kTwoObject;
  if (!scene.objects.empty() && scene.objects[0].target_count > 1) return PromptCategory::kCounting;
  return PromptCategory::kSingle;
}

void validate_scene(const SceneSpec& scene) {
  if (scene.objects.empty() || scene.objects.size() > 2) {
    throw std::invalid_argument("scene must name one or two objects");
  }
  int total = 0;
  for (const auto& o : scene.objects) {
    if (o.target_count < 1 || o.target_count > 3) throw std::invalid_argument("count must be in 1..3");
    total += o.target_count;
  }
  if (total > kImageTokens / 2) throw std::invalid_argument("scene exceeds half the grid");
  if (scene.objects.size() == 2) {
    if (scene.objects[0].color == scene.objects[1].color) {
      throw std::invalid_argument("two-object scenes need distinct colors");
    }
    if (scene.objects[0].target_count != 1 || scene.objects[1].target_count != 1) {
      throw std::invalid_argument("two-object scenes name one of each color");
    }
  }
  if (scene.relation) {
    if (scene.objects.size() != 2 || scene.relation->a != scene.objects[0].color ||
        scene.relation->b != scene.objects[1].color) {
      throw std::invalid_argument("relation must refer to the two named objects in order");
    }
  }
}

Prompt sample_prompt(const RngStream& rng, PromptCategory category) {
  RngDraws draws(rng);
  auto pick_color = [&] { return kAllColors[draws.below(kAllColors.size())]; };
  auto pick_other = [&](Color c) {
    Color other = kAllColors[draws.below(kAllColors.size() - 1)];
    // Skip over `c` so the three remaining colors are equally likely.
    if (static_cast<int>(other) >= static_cast<int>(c)) other = kAllColors[static_cast<int>(other)];
    return other;
  };

  SceneSpec scene;
  switch (category) {
    case PromptCategory::kSingle:
      scene.objects = {{pick_color(), 1}};
      break;
    case PromptCategory::kCounting: {
      int count = 2 + static_cast<int>(draws.below(2));
      scene.objects = {{pick_color(), count}};
      break;
    }
    case PromptCategory::kTwoObject: {
      Color a = pick_color();
      scene.objects = {{a, 1}, {pick_other(a), 1}};
      break;
    }
    case PromptCategory::kSpatial: {
      Color a = pick_color();
      Color b = pick_other(a);
      Direction dir = draws.below(2) == 0 ? Direction::kLeftOf : Direction::kAbove;
      scene.objects = {{a, 1}, {b, 1}};
      scene.relation = Relation{a, b, dir};
      break;
    }
  }
  return Prompt{render_tokens(scene), scene};
}

std::vector<TokenId> render_tokens(const SceneSpec& scene) {
  validate_scene(scene);
  std::vector<TokenId> t;
  const auto& first = scene.objects[0];
  t.push_back(vocab::count_word(first.target_count));
  t.push_back(vocab::color_word(first.color));
  if (scene.objects.size() == 2) {
    if (scene.relation) {
      t.push_back(scene.relation->direction == Direction::kLeftOf ? vocab::kLeftOf : vocab::kAbove);
    }
    t.push_back(vocab::kOne);
    t.push_back(vocab::color_word(scene.objects[1].color));
  }
  return t;
}

std::string to_text(std::span<const TokenId> tokens) {
  std::string out;
  for (TokenId id : tokens) {
    if (!out.empty()) out += ' ';
    out += vocab::word(id);
  }
  return out;
}

std::string render_text(const SceneSpec& scene) { return to_text(render_tokens(scene)); }

namespace {

std::optional<Color> as_color(TokenId id) {
  if (id >= vocab::kRed && id < vocab::kRed + 4) return static_cast<Color>(id - vocab::kRed + 1);
  return std::nullopt;
}

std::optional<int> as_count(TokenId id) {
  if (id >= vocab::kOne && id <= vocab::kThree) return id - vocab::kOne + 1;
  return std::nullopt;
}

}  // namespace

SceneSpec parse_tokens(std::span<const TokenId> t) {
  auto fail = [&]() -> SceneSpec {
    throw std::invalid_argument("out-of-grammar prompt");
  };
  SceneSpec scene;
  if (t.size() == 2) {
    auto n = as_count(t[0]);
    auto c = as_color(t[1]);
    if (!n || !c) return fail();
    scene.objects = {{*c, *n}};
  } else if (t.size() == 4 || t.size() == 5) {
    const bool spatial = t.size() == 5;
    auto c1 = as_color(t[1]);
    auto c2 = as_color(t[t.size() - 1]);
    if (t[0] != vocab::kOne || t[t.size() - 2] != vocab::kOne || !c1 || !c2 || *c1 == *c2) return fail();
    scene.objects = {{*c1, 1}, {*c2, 1}};
    if (spatial) {
      if (t[2] == vocab::kLeftOf) {
        scene.relation = Relation{*c1, *c2, Direction::kLeftOf};
      } else if (t[2] == vocab::kAbove) {
        scene.relation = Relation{*c1, *c2, Direction::kAbove};
      } else {
        return fail();
      }
    }
  } else {
    return fail();
  }
  validate_scene(scene);
  return scene;
}

Prompt parse_prompt(std::string_view line) {
  std::vector<TokenId> tokens;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) {
    auto id = vocab::lookup(w);
    if (!id || !vocab::is_text_word(*id)) throw std::invalid_argument(fmt::format("unknown word '{}'", w));
    tokens.push_back(*id);
  }
  SceneSpec scene = parse_tokens(tokens);
  return Prompt{std::move(tokens), std::move(scene)};
}

std::vector<Prompt> parse_prompt_set(std::string_view text) {
  std::vector<Prompt> prompts;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      prompts.push_back(parse_prompt(line));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(fmt::format("line {}: {}: \"{}\"", line_no, e.what(), line));
    }
  }
  return prompts;
}

std::vector<Prompt> load_prompt_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prompt set " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_prompt_set(buf.str());
}

std::string format_prompt_set(std::span<const Prompt> prompts) {
  std::string out;
  for (const auto& p : prompts) out += to_text(p.tokens) + "\n";
  return out;
}

std::vector<Prompt> default_eval_prompts() {
  constexpr std::uint64_t kEvalPromptSeed = 2024;
  const RngStream base = purpose_stream(kEvalPromptSeed, StreamPurpose::kPrompts);
  std::vector<Prompt> prompts;
  for (std::size_t c = 0; c < kAllCategories.size(); ++c) {
    for (std::uint64_t i = 0; i < 10; ++i) {
      prompts.push_back(sample_prompt(base.derive(c).derive(i), kAllCategories[c]));
    }
  }
  return prompts;
}

GridImage decode_image(std::span<const TokenId> image_tokens) {
  if (image_tokens.size() != kImageTokens) throw std::invalid_argument("image length must be 64");
  GridImage grid;
  for (std::size_t i = 0; i < image_tokens.size(); ++i) {
    if (!vocab::is_image(image_tokens[i])) throw std::invalid_argument("segment violation");
    grid.cells[i] = vocab::cell_color(image_tokens[i]);
  }
  return grid;
}

std::vector<Component> detect_components(const GridImage& grid) {
  std::array<bool, kImageTokens> seen{};
  std::vector<Component> out;
  for (int start = 0; start < kImageTokens; ++start) {
    const int color = grid.cells[static_cast<std::size_t>(start)];
    if (color == 0 || seen[static_cast<std::size_t>(start)]) continue;
    std::vector<int> stack{start};
    std::vector<int> members;
    seen[static_cast<std::size_t>(start)] = true;
    while (!stack.empty()) {
      int idx = stack.back();
      stack.pop_back();
      members.push_back(idx);
      const int r = idx / kGridSide, c = idx % kGridSide;
      const std::array<std::pair<int, int>, 4> nbrs = {{{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}}};
      for (auto [nr, nc] : nbrs) {
        if (nr < 0 || nr >= kGridSide || nc < 0 || nc >= kGridSide) continue;
        const int n = nr * kGridSide + nc;
        if (!seen[static_cast<std::size_t>(n)] && grid.cells[static_cast<std::size_t>(n)] == color) {
          seen[static_cast<std::size_t>(n)] = true;
          stack.push_back(n);
        }
      }
    }
    std::sort(members.begin(), members.end());
    Component comp{color, {}, 0.0, 0.0, {kGridSide, kGridSide, -1, -1}};
    for (int idx : members) {
      Cell cell{idx / kGridSide, idx % kGridSide};
      comp.cells.push_back(cell);
      comp.centroid_row += cell.row;
      comp.centroid_col += cell.col;
      comp.box.min_row = std::min(comp.box.min_row, cell.row);
      comp.box.min_col = std::min(comp.box.min_col, cell.col);
      comp.box.max_row = std::max(comp.box.max_row, cell.row);
      comp.box.max_col = std::max(comp.box.max_col, cell.col);
    }
    comp.centroid_row /= static_cast<double>(members.size());
    comp.centroid_col /= static_cast<double>(members.size());
    out.push_back(std::move(comp));
  }
  return out;
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  auto area = [](const BoundingBox& x) {
    return static_cast<double>(x.max_row - x.min_row + 1) * (x.max_col - x.min_col + 1);
  };
  const int rows = std::min(a.max_row, b.max_row) - std::max(a.min_row, b.min_row) + 1;
  const int cols = std::min(a.max_col, b.max_col) - std::max(a.min_col, b.min_col) + 1;
  const double inter = (rows > 0 && cols > 0) ? static_cast<double>(rows) * cols : 0.0;
  return inter / (area(a) + area(b) - inter);
}

namespace {

// Largest component of a color; ties resolve to the earliest in scan order.
const Component* primary_component(const std::vector<Component>& comps, Color color) {
  const Component* best = nullptr;
  for (const auto& c : comps) {
    if (c.color == static_cast<int>(color) && (!best || c.cells.size() > best->cells.size())) best = &c;
  }
  return best;
}

int component_count(const std::vector<Component>& comps, Color color) {
  return static_cast<int>(std::count_if(comps.begin(), comps.end(),
                                        [&](const Component& c) { return c.color == static_cast<int>(color); }));
}

}  // namespace

double oracle_reward(const GridImage& grid, const SceneSpec& scene, const OracleOptions& options) {
  if (options.alpha < 0.0 || options.alpha > 1.0) throw std::invalid_argument("alpha must be in [0, 1]");
  const auto comps = detect_components(grid);

  std::vector<Color> named;
  for (const auto& o : scene.objects) {
    if (std::find(named.begin(), named.end(), o.color) == named.end()) named.push_back(o.color);
  }
  const double k = static_cast<double>(named.size());
  if (named.empty()) return 0.0;

  double detected = 0.0;
  for (Color c : named) detected += component_count(comps, c) > 0 ? 1.0 : 0.0;
  const double existence = detected / k;

  if (scene.relation) {
    const Component* a = primary_component(comps, scene.relation->a);
    const Component* b = primary_component(comps, scene.relation->b);
    double spatial = 0.0;
    if (a && b) {
      const double separation = scene.relation->direction == Direction::kLeftOf
                                    ? b->centroid_col - a->centroid_col
                                    : b->centroid_row - a->centroid_row;
      if (separation <= 0.0) {
        spatial = 0.0;
      } else if (separation >= options.separation_threshold) {
        spatial = 1.0;
      } else {
        spatial = box_iou(a->box, b->box);
      }
    }
    return options.alpha * spatial + (1.0 - options.alpha) * existence;
  }

  const bool counting = std::any_of(scene.objects.begin(), scene.objects.end(),
                                    [](const SceneObject& o) { return o.target_count > 1; });
  if (counting) {
    double hits = 0.0;
    for (const auto& o : scene.objects) hits += component_count(comps, o.color) == o.target_count ? 1.0 : 0.0;
    return hits / k;
  }
  return existence;
}

double color_entropy(const GridImage& grid) {
  std::array<int, kNumCellColors> counts{};
  for (int c : grid.cells) ++counts[static_cast<std::size_t>(c)];
  double h = 0.0;
  for (int n : counts) {
    if (n == 0) continue;
    const double p = static_cast<double>(n) / kImageTokens;
    h -= p * std::log(p);
  }
  return h;
}

GridImage render_ideal(const SceneSpec& scene) {
  validate_scene(scene);
  GridImage grid;
  auto block = [&](int row, int col, Color color) {
    for (int r = row; r < row + 2; ++r)
      for (int c = col; c < col + 2; ++c) grid.at(r, c) = static_cast<int>(color);
  };
  if (scene.relation) {
    if (scene.relation->direction == Direction::kLeftOf) {
      block(3, 1, scene.relation->a);
      block(3, 5, scene.relation->b);
    } else {
      block(1, 3, scene.relation->a);
      block(5, 3, scene.relation->b);
    }
    return grid;
  }
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    for (int j = 0; j < scene.objects[i].target_count; ++j) {
      block(3 * static_cast<int>(i), 3 * j, scene.objects[i].color);
    }
  }
  return grid;
}

std::string grid_to_string(const GridImage& grid) {
  static constexpr char kGlyphs[] = {'.', 'R', 'G', 'B', 'Y'};
  std::string out;
  for (int r = 0; r < kGridSide; ++r) {
    for (int c = 0; c < kGridSide; ++c) out += kGlyphs[grid.at(r, c)];
    out += '\n';
  }
  return out;
}

}  // namespace irislab
