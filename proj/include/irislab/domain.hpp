#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "irislab/core.hpp"

namespace irislab {

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

enum class Segment { kText, kImage };

// Non-background colors. Grid cells use 0 for background and 1..4 for these.
enum class Color { kRed = 1, kGreen = 2, kBlue = 3, kYellow = 4 };
inline constexpr std::array<Color, 4> kAllColors = {Color::kRed, Color::kGreen, Color::kBlue,
                                                    Color::kYellow};
inline constexpr int kNumCellColors = 5;

enum class Direction { kLeftOf, kAbove };

/// Unified token vocabulary. Ids are laid out as
///   0..2   counts  one two three
///   3..6   colors  red green blue yellow
///   7..8   relations left-of above
///   9..12  fillers a the and with
///   13     <BOI>
///   14..18 image cells background red green blue yellow
///   19     <PAD>
namespace vocab {
inline constexpr TokenId kOne = 0;
inline constexpr TokenId kTwo = 1;
inline constexpr TokenId kThree = 2;
inline constexpr TokenId kRed = 3;
inline constexpr TokenId kLeftOf = 7;
inline constexpr TokenId kAbove = 8;
inline constexpr TokenId kFirstFiller = 9;
inline constexpr int kNumTextTokens = 13;
inline constexpr TokenId kBoi = 13;
inline constexpr TokenId kFirstImage = 14;
inline constexpr int kNumImageTokens = 5;
inline constexpr TokenId kPad = 19;
inline constexpr int kSize = 20;

const std::vector<TokenId>& text_active_set();   // 13 text tokens + <BOI>
const std::vector<TokenId>& image_active_set();  // 5 cell tokens
const std::vector<TokenId>& active_set(Segment segment);

bool is_text_word(TokenId id);
bool is_image(TokenId id);
std::string_view word(TokenId id);
std::optional<TokenId> lookup(std::string_view word);

TokenId color_word(Color c);
TokenId count_word(int count);
TokenId image_token(int cell_color);
int cell_color(TokenId image_token);
}  // namespace vocab

std::string_view color_name(Color c);

// ---------------------------------------------------------------------------
// Scenes and prompts
// ---------------------------------------------------------------------------

struct SceneObject {
  Color color;
  int target_count = 1;
  bool operator==(const SceneObject&) const = default;
};

struct Relation {
  Color a;
  Color b;
  Direction direction;
  bool operator==(const Relation&) const = default;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  std::optional<Relation> relation;
  bool operator==(const SceneSpec&) const = default;
};

enum class PromptCategory { kSingle, kCounting, kTwoObject, kSpatial };
inline constexpr std::array<PromptCategory, 4> kAllCategories = {
    PromptCategory::kSingle, PromptCategory::kCounting, PromptCategory::kTwoObject,
    PromptCategory::kSpatial};

std::string_view category_name(PromptCategory c);
PromptCategory category_of(const SceneSpec& scene);

struct Prompt {
  std::vector<TokenId> tokens;
  SceneSpec scene;
  bool operator==(const Prompt&) const = default;
};

// Throws std::invalid_argument when the scene is outside the grammar.
void validate_scene(const SceneSpec& scene);

Prompt sample_prompt(const RngStream& rng, PromptCategory category);

std::vector<TokenId> render_tokens(const SceneSpec& scene);
std::string render_text(const SceneSpec& scene);
// Parses a token sequence; throws std::invalid_argument when out of grammar.
SceneSpec parse_tokens(std::span<const TokenId> tokens);
// Parses surface syntax such as "two red" or "one red left-of one blue".
Prompt parse_prompt(std::string_view line);
std::string to_text(std::span<const TokenId> tokens);

// One prompt per line; blank lines and lines starting with '#' are skipped.
// Out-of-grammar lines raise std::invalid_argument naming the line number.
std::vector<Prompt> parse_prompt_set(std::string_view text);
std::vector<Prompt> load_prompt_set(const std::string& path);
std::string format_prompt_set(std::span<const Prompt> prompts);

// The fixed 40-prompt evaluation set (10 per category).
std::vector<Prompt> default_eval_prompts();

// ---------------------------------------------------------------------------
// Images, detection, oracle reward
// ---------------------------------------------------------------------------

inline constexpr int kGridSide = 8;
inline constexpr int kImageTokens = kGridSide * kGridSide;

struct GridImage {
  std::array<int, kImageTokens> cells{};  // row-major cell colors, 0 = background
  int at(int row, int col) const { return cells[static_cast<std::size_t>(row * kGridSide + col)]; }
  int& at(int row, int col) { return cells[static_cast<std::size_t>(row * kGridSide + col)]; }
  bool operator==(const GridImage&) const = default;
};

GridImage decode_image(std::span<const TokenId> image_tokens);

struct Cell {
  int row;
  int col;
  bool operator==(const Cell&) const = default;
};

struct BoundingBox {
  int min_row, min_col, max_row, max_col;  // inclusive
  bool operator==(const BoundingBox&) const = default;
};

struct Component {
  int color;
  std::vector<Cell> cells;  // row-major order
  double centroid_row;
  double centroid_col;
  BoundingBox box;
};

// 4-connected same-color components of non-background cells, in row-major
// order of each component's first cell.
std::vector<Component> detect_components(const GridImage& grid);

double box_iou(const BoundingBox& a, const BoundingBox& b);

struct OracleOptions {
  double alpha = 0.6;
  // Minimum centroid separation (cells) along the relation axis for full spatial credit.
  double separation_threshold = 2.0;
};

double oracle_reward(const GridImage& grid, const SceneSpec& scene, const OracleOptions& options = {});

double color_entropy(const GridImage& grid);

// Renders disjoint solid 2x2 blocks that score 1.0 under the oracle.
GridImage render_ideal(const SceneSpec& scene);

// '.' for background, R G B Y for colors, one row per line.
std::string grid_to_string(const GridImage& grid);

}  // namespace irislab
