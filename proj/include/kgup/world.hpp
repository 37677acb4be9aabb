// Copyright 2026 The kgup Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kgup/graph.hpp"

namespace kgup {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InadmissibleAction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WorldConfig {
  int n_rooms = 4;
  std::uint64_t room_layout_seed = 0;
  std::vector<std::string> room_names;
  std::vector<std::string> object_nouns;
  std::vector<std::string> adjectives;
  /// When nonempty, food names are drawn from this list instead of the full
  /// adjective x noun product. Used to hold out combinations for test splits.
  std::vector<std::string> food_names;
  int n_objects = 4;
  int recipe_length = 2;
  int n_random_actions_per_step = 5;
  /// Off-path actions chain from each other instead of each branching from
  /// the walkthrough state. Either way the walkthrough state is restored.
  bool compound_random_actions = false;
  double door_probability = 0.3;
  RelationRegistry relations = RelationRegistry::standard();

  static WorldConfig defaults();
  /// Throws ConfigError.
  void validate() const;
  /// adjective x noun product, or food_names when set.
  std::vector<std::string> food_pool() const;
};

/// Reads `key = value` lines (`#` comments, lists comma-separated) on top of
/// the defaults. Throws ConfigError.
WorldConfig parse_world_config(std::istream& is);
WorldConfig load_world_config(const std::string& path);

enum class Direction { north, south, east, west };

std::string_view to_string(Direction d);
Direction opposite(Direction d);
std::optional<Direction> parse_direction(std::string_view text);

enum class FurnitureKind { container, supporter, appliance };

struct Furniture {
  std::string name;
  std::string room;
  FurnitureKind kind = FurnitureKind::supporter;
  bool open = false;  // containers only

  friend bool operator==(const Furniture&, const Furniture&) = default;
};

struct Door {
  std::string name;
  bool open = false;

  friend bool operator==(const Door&, const Door&) = default;
};

struct Exit {
  std::string room;
  std::optional<std::string> door;

  friend bool operator==(const Exit&, const Exit&) = default;
};

struct Room {
  std::string name;
  std::map<Direction, Exit> exits;

  friend bool operator==(const Room&, const Room&) = default;
};

enum class ItemKind { food, knife, cookbook, meal };

struct Placement {
  enum class Kind { floor, furniture, inventory };
  Kind kind = Kind::floor;
  std::string holder;  // room name for floor, furniture name otherwise

  friend bool operator==(const Placement&, const Placement&) = default;
};

struct Item {
  std::string name;
  ItemKind kind = ItemKind::food;
  Placement where;
  std::set<std::string> states;

  friend bool operator==(const Item&, const Item&) = default;
};

struct Recipe {
  std::vector<std::string> ingredients;
  std::map<std::string, std::vector<std::string>> needs;  // ingredient -> required states

  friend bool operator==(const Recipe&, const Recipe&) = default;
};

/// Mutable world model. The full game graph is derived from it on demand.
class GameState {
 public:
  // Builder API, used by the generator and by hand-made fixtures.
  void add_room(const std::string& name);
  /// `to` lies in direction `dir` from `from`.
  void connect(const std::string& from, Direction dir, const std::string& to,
               std::optional<Door> door = std::nullopt);
  void add_furniture(Furniture f);
  void add_item(Item item);
  void set_recipe(Recipe recipe) { recipe_ = std::move(recipe); }
  void place_player(const std::string& room) { player_room_ = room; }

  const std::string& player_room() const { return player_room_; }
  const std::vector<Room>& rooms() const { return rooms_; }
  const std::vector<Furniture>& furniture() const { return furniture_; }
  const std::vector<Item>& items() const { return items_; }
  const std::vector<Door>& doors() const { return doors_; }
  const Recipe& recipe() const { return recipe_; }
  bool cookbook_read() const { return cookbook_read_; }
  bool meal_prepared() const { return meal_prepared_; }
  const std::set<std::pair<std::string, std::string>>& traversed() const { return traversed_; }

  const Room& room(const std::string& name) const;
  const Item* find_item(const std::string& name) const;
  const Furniture* find_furniture(const std::string& name) const;

  BeliefGraph full_graph() const;
  /// Facts visible from the current state: the current room with its
  /// furniture, doors, open containers and supporters, the inventory, map
  /// connections already walked, and the recipe once the cookbook was read.
  BeliefGraph visible_graph() const;
  /// Every admissible action, in a deterministic order.
  std::vector<std::string> admissible_actions() const;
  /// Applies `action`, returning the observation text. Throws InadmissibleAction.
  std::string step(const std::string& action);
  std::string describe_room() const;

  friend bool operator==(const GameState&, const GameState&) = default;

 private:
  Room& room_mut(const std::string& name);
  Item* item_mut(const std::string& name);
  Furniture* furniture_mut(const std::string& name);
  Door* door_mut(const std::string& name);
  bool item_visible(const Item& item) const;
  bool item_in_inventory(const Item& item) const;
  std::vector<const Item*> visible_items() const;
  std::vector<std::pair<Direction, const Door*>> doors_here() const;
  const Door* find_door(const std::string& name) const;
  bool recipe_ready() const;
  std::string item_phrase(const Item& item) const;

  std::vector<Room> rooms_;
  std::vector<Furniture> furniture_;
  std::vector<Item> items_;
  std::vector<Door> doors_;
  Recipe recipe_;
  std::string player_room_;
  bool cookbook_read_ = false;
  bool meal_prepared_ = false;
  // (from, to) room pairs the player has walked.
  std::set<std::pair<std::string, std::string>> traversed_;
};

/// Seen graph before the first observation: empty, matching the empty
/// belief free-run evaluation starts from.
BeliefGraph initial_seen(const GameState& state);

/// Facts from `prev_seen` that still hold, plus everything visible now.
BeliefGraph observed_subgraph(const GameState& state, const BeliefGraph& prev_seen);

struct Transition {
  std::int64_t game = 0;
  std::int64_t step = 0;
  /// 0 for the walkthrough transition, 1.. for off-path actions branched at
  /// the same step.
  std::int64_t branch = 0;
  BeliefGraph g_seen_prev;
  std::string action;
  std::string observation;
  BeliefGraph g_seen_next;
  /// Full game graph after the action. Populated by the generator only; not
  /// serialized.
  std::optional<BeliefGraph> g_full_next;

  bool on_path() const { return branch == 0; }
  UpdateSequence gold_ops() const { return diff(g_seen_prev, g_seen_next); }
};

struct Game {
  std::int64_t id = 0;
  std::vector<std::string> walkthrough;
  std::vector<Transition> transitions;

  /// Walkthrough transitions in step order.
  std::vector<Transition> on_path() const;
};

/// Deterministic in (config, seed). Throws GenerationFailure.
Game generate_game(const WorldConfig& config, std::uint64_t seed, std::int64_t game_id = 0);

/// Builds the initial world and its walkthrough without recording
/// transitions. Exposed for tests.
std::pair<GameState, std::vector<std::string>> build_world(const WorldConfig& config, std::uint64_t seed);

}  // namespace kgup
