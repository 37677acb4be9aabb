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

#include "kgup/world.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <sstream>

namespace kgup {
namespace {

const std::vector<std::string> kCutVerbs = {"slice", "chop", "dice"};
const std::vector<std::string> kCutStates = {"sliced", "chopped", "diced"};

struct ApplianceInfo {
  std::string name;
  std::string verb;   // surface verb in observations
  std::string state;  // resulting food state
};

const std::vector<ApplianceInfo> kAppliances = {
    {"stove", "fry", "fried"}, {"oven", "roast", "roasted"}, {"bbq", "grill", "grilled"}};

const std::vector<std::string> kContainerPool = {"toolbox", "chest", "cupboard", "crate",
                                                 "locker",  "wardrobe", "trunk", "cabinet"};
const std::vector<std::string> kSupporterPool = {"workbench", "shelf", "patio table", "bed",
                                                 "sofa",      "bench", "desk",        "dresser"};
const std::vector<std::string> kDoorPool = {"wooden door", "screen door", "iron door", "glass door",
                                            "sliding door", "front door", "barn door", "red door"};

const ApplianceInfo* appliance_info(std::string_view name) {
  for (const auto& a : kAppliances) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

bool is_cut_state(std::string_view s) {
  return std::find(kCutStates.begin(), kCutStates.end(), s) != kCutStates.end();
}

bool is_cook_state(std::string_view s) {
  return std::any_of(kAppliances.begin(), kAppliances.end(), [&](const auto& a) { return a.state == s; });
}

std::string cut_state_for(std::string_view verb) {
  for (std::size_t i = 0; i < kCutVerbs.size(); ++i) {
    if (kCutVerbs[i] == verb) return kCutStates[i];
  }
  return {};
}

std::string cut_verb_for(std::string_view state) {
  for (std::size_t i = 0; i < kCutStates.size(); ++i) {
    if (kCutStates[i] == state) return kCutVerbs[i];
  }
  return {};
}

std::string article(std::string_view phrase) {
  if (!phrase.empty() && std::string_view("aeiou").find(phrase.front()) != std::string_view::npos) return "an";
  return "a";
}

std::string list_phrase(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += (i + 1 == parts.size()) ? " and " : ", ";
    out += parts[i];
  }
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    auto comma = value.find(',', start);
    auto part = trim(value.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!part.empty()) out.push_back(normalize_label(part));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

Triple triple(const std::string& head, EntityKind head_kind, const std::string& tail, EntityKind tail_kind,
              const std::string& relation) {
  return Triple{Entity(head, head_kind), Entity(tail, tail_kind), Relation(relation)};
}

constexpr auto kObj = EntityKind::object;
constexpr auto kLoc = EntityKind::location;
constexpr auto kState = EntityKind::state;
constexpr auto kPlayer = EntityKind::player;
const std::string kPlayerLabel = "player";

}  // namespace

WorldConfig WorldConfig::defaults() {
  WorldConfig c;
  c.room_names = {"kitchen", "backyard", "shed",  "garden",      "pantry", "corridor", "bedroom", "bathroom",
                  "living room", "cellar", "porch", "driveway", "street", "supermarket", "attic", "study"};
  c.object_nouns = {"apple",  "carrot",   "potato",       "onion",     "chili pepper", "tomato",
                    "bell pepper", "lettuce", "cucumber", "chicken wing", "pork chop", "banana"};
  c.adjectives = {"red", "yellow", "green", "purple", "white", "orange", "red hot", "black"};
  return c;
}

std::vector<std::string> WorldConfig::food_pool() const {
  if (!food_names.empty()) return food_names;
  std::vector<std::string> out;
  for (const auto& noun : object_nouns) {
    for (const auto& adj : adjectives) out.push_back(adj + " " + noun);
  }
  return out;
}

void WorldConfig::validate() const {
  if (n_rooms < 1) throw ConfigError("n_rooms must be >= 1");
  if (room_names.empty() || object_nouns.empty() || adjectives.empty()) {
    throw ConfigError("room_names, object_nouns and adjectives must be nonempty");
  }
  if (std::find(room_names.begin(), room_names.end(), "kitchen") == room_names.end()) {
    throw ConfigError("room_names must contain 'kitchen'");
  }
  if (static_cast<std::size_t>(n_rooms) > room_names.size()) {
    throw ConfigError("n_rooms exceeds the room name pool (" + std::to_string(room_names.size()) + ")");
  }
  if (recipe_length < 0) throw ConfigError("recipe_length must be >= 0");
  if (n_objects < recipe_length) throw ConfigError("n_objects must be >= recipe_length");
  if (static_cast<std::size_t>(n_objects) > food_pool().size()) {
    throw ConfigError("n_objects exceeds the food name pool");
  }
  if (n_random_actions_per_step < 0) throw ConfigError("n_random_actions_per_step must be >= 0");
  if (door_probability < 0.0 || door_probability > 1.0) throw ConfigError("door_probability must be in [0, 1]");
  for (const char* needed : {"at", "in", "on", "is", "north_of", "south_of", "east_of", "west_of", "part_of",
                             "needs"}) {
    if (!relations.contains(needed)) {
      throw ConfigError(std::string("relation registry lacks '") + needed + "' used by the simulator");
    }
  }
}

WorldConfig parse_world_config(std::istream& is) {
  auto config = WorldConfig::defaults();
  std::string line;
  std::size_t line_no = 0;
  auto as_int = [&](std::string_view key, std::string_view value) -> long long {
    try {
      std::size_t pos = 0;
      auto v = std::stoll(std::string(value), &pos);
      if (pos != value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(line_no) + ": '" + std::string(key) + "' expects an integer");
    }
  };
  while (std::getline(is, line)) {
    ++line_no;
    auto hash = line.find('#');
    std::string_view body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(trim(body.substr(0, eq)));
    std::string_view value = trim(body.substr(eq + 1));
    if (key == "n_rooms") {
      config.n_rooms = static_cast<int>(as_int(key, value));
    } else if (key == "room_layout_seed") {
      auto v = as_int(key, value);
      if (v < 0) throw ConfigError("room_layout_seed must be >= 0");
      config.room_layout_seed = static_cast<std::uint64_t>(v);
    } else if (key == "room_names") {
      config.room_names = split_list(value);
    } else if (key == "object_nouns") {
      config.object_nouns = split_list(value);
    } else if (key == "adjectives") {
      config.adjectives = split_list(value);
    } else if (key == "food_names") {
      config.food_names = split_list(value);
    } else if (key == "n_objects") {
      config.n_objects = static_cast<int>(as_int(key, value));
    } else if (key == "recipe_length") {
      config.recipe_length = static_cast<int>(as_int(key, value));
    } else if (key == "n_random_actions_per_step") {
      config.n_random_actions_per_step = static_cast<int>(as_int(key, value));
    } else if (key == "compound_random_actions") {
      if (value != "true" && value != "false") {
        throw ConfigError("line " + std::to_string(line_no) + ": compound_random_actions expects true/false");
      }
      config.compound_random_actions = value == "true";
    } else if (key == "door_probability") {
      try {
        config.door_probability = std::stod(std::string(value));
      } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line_no) + ": door_probability expects a number");
      }
    } else if (key == "relations") {
      try {
        config.relations = RelationRegistry(split_list(value));
      } catch (const InvalidLabel& e) {
        throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
      }
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  config.validate();
  return config;
}

WorldConfig load_world_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_world_config(in);
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::north: return "north";
    case Direction::south: return "south";
    case Direction::east: return "east";
    case Direction::west: return "west";
  }
  return "north";
}

Direction opposite(Direction d) {
  switch (d) {
    case Direction::north: return Direction::south;
    case Direction::south: return Direction::north;
    case Direction::east: return Direction::west;
    case Direction::west: return Direction::east;
  }
  return Direction::north;
}

std::optional<Direction> parse_direction(std::string_view text) {
  for (auto d : {Direction::north, Direction::south, Direction::east, Direction::west}) {
    if (to_string(d) == text) return d;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// GameState

void GameState::add_room(const std::string& name) { rooms_.push_back(Room{name, {}}); }

void GameState::connect(const std::string& from, Direction dir, const std::string& to, std::optional<Door> door) {
  std::optional<std::string> door_name;
  if (door) {
    door_name = door->name;
    doors_.push_back(*door);
  }
  room_mut(from).exits[dir] = Exit{to, door_name};
  room_mut(to).exits[opposite(dir)] = Exit{from, door_name};
}

void GameState::add_furniture(Furniture f) { furniture_.push_back(std::move(f)); }

void GameState::add_item(Item item) { items_.push_back(std::move(item)); }

const Room& GameState::room(const std::string& name) const {
  for (const auto& r : rooms_) {
    if (r.name == name) return r;
  }
  throw std::out_of_range("no room named '" + name + "'");
}

Room& GameState::room_mut(const std::string& name) { return const_cast<Room&>(std::as_const(*this).room(name)); }

const Item* GameState::find_item(const std::string& name) const {
  for (const auto& i : items_) {
    if (i.name == name) return &i;
  }
  return nullptr;
}

Item* GameState::item_mut(const std::string& name) { return const_cast<Item*>(std::as_const(*this).find_item(name)); }

const Furniture* GameState::find_furniture(const std::string& name) const {
  for (const auto& f : furniture_) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

Furniture* GameState::furniture_mut(const std::string& name) {
  return const_cast<Furniture*>(std::as_const(*this).find_furniture(name));
}

const Door* GameState::find_door(const std::string& name) const {
  for (const auto& d : doors_) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

Door* GameState::door_mut(const std::string& name) { return const_cast<Door*>(std::as_const(*this).find_door(name)); }

bool GameState::item_in_inventory(const Item& item) const { return item.where.kind == Placement::Kind::inventory; }

bool GameState::item_visible(const Item& item) const {
  switch (item.where.kind) {
    case Placement::Kind::inventory: return true;
    case Placement::Kind::floor: return item.where.holder == player_room_;
    case Placement::Kind::furniture: {
      const auto* f = find_furniture(item.where.holder);
      if (f == nullptr || f->room != player_room_) return false;
      return f->kind != FurnitureKind::container || f->open;
    }
  }
  return false;
}

std::vector<const Item*> GameState::visible_items() const {
  std::vector<const Item*> out;
  for (const auto& i : items_) {
    if (item_visible(i)) out.push_back(&i);
  }
  return out;
}

std::vector<std::pair<Direction, const Door*>> GameState::doors_here() const {
  std::vector<std::pair<Direction, const Door*>> out;
  for (const auto& [dir, exit] : room(player_room_).exits) {
    if (exit.door) out.emplace_back(dir, find_door(*exit.door));
  }
  return out;
}

namespace {

void add_item_facts(std::set<Triple>& out, const Item& item, const GameState& state) {
  switch (item.where.kind) {
    case Placement::Kind::inventory:
      out.insert(triple(item.name, kObj, kPlayerLabel, kPlayer, "in"));
      break;
    case Placement::Kind::floor:
      out.insert(triple(item.name, kObj, item.where.holder, kLoc, "in"));
      break;
    case Placement::Kind::furniture: {
      const auto* f = state.find_furniture(item.where.holder);
      out.insert(triple(item.name, kObj, item.where.holder, kObj,
                        f != nullptr && f->kind == FurnitureKind::container ? "in" : "on"));
      break;
    }
  }
  for (const auto& s : item.states) out.insert(triple(item.name, kObj, s, kState, "is"));
}

void add_recipe_facts(std::set<Triple>& out, const GameState& state) {
  for (const auto& ing : state.recipe().ingredients) {
    if (state.find_item(ing) == nullptr) continue;
    out.insert(triple(ing, kObj, "cookbook", kObj, "part_of"));
    if (auto it = state.recipe().needs.find(ing); it != state.recipe().needs.end()) {
      for (const auto& s : it->second) out.insert(triple(ing, kObj, s, kState, "needs"));
    }
  }
}

std::string direction_relation(Direction d) { return std::string(to_string(d)) + "_of"; }

}  // namespace

BeliefGraph GameState::full_graph() const {
  std::set<Triple> out;
  out.insert(triple(kPlayerLabel, kPlayer, player_room_, kLoc, "at"));
  for (const auto& f : furniture_) {
    out.insert(triple(f.name, kObj, f.room, kLoc, "in"));
    if (f.kind == FurnitureKind::container) out.insert(triple(f.name, kObj, f.open ? "open" : "closed", kState, "is"));
  }
  for (const auto& r : rooms_) {
    for (const auto& [dir, exit] : r.exits) {
      // exit.room lies in direction dir from r
      out.insert(triple(exit.room, kLoc, r.name, kLoc, direction_relation(dir)));
      if (exit.door) {
        out.insert(triple(*exit.door, kObj, r.name, kLoc, direction_relation(dir)));
        out.insert(triple(*exit.door, kObj, find_door(*exit.door)->open ? "open" : "closed", kState, "is"));
      }
    }
  }
  for (const auto& i : items_) add_item_facts(out, i, *this);
  add_recipe_facts(out, *this);
  return BeliefGraph(std::move(out));
}

BeliefGraph GameState::visible_graph() const {
  std::set<Triple> out;
  out.insert(triple(kPlayerLabel, kPlayer, player_room_, kLoc, "at"));
  for (const auto& f : furniture_) {
    if (f.room != player_room_) continue;
    out.insert(triple(f.name, kObj, f.room, kLoc, "in"));
    if (f.kind == FurnitureKind::container) out.insert(triple(f.name, kObj, f.open ? "open" : "closed", kState, "is"));
  }
  for (const auto& [dir, door] : doors_here()) {
    out.insert(triple(door->name, kObj, player_room_, kLoc, direction_relation(dir)));
    out.insert(triple(door->name, kObj, door->open ? "open" : "closed", kState, "is"));
  }
  for (const auto& [from, to] : traversed_) {
    for (const auto& [dir, exit] : room(from).exits) {
      if (exit.room == to) out.insert(triple(to, kLoc, from, kLoc, direction_relation(dir)));
    }
  }
  for (const auto* i : visible_items()) add_item_facts(out, *i, *this);
  if (cookbook_read_) add_recipe_facts(out, *this);
  return BeliefGraph(std::move(out));
}

bool GameState::recipe_ready() const {
  if (meal_prepared_ || player_room_ != "kitchen") return false;
  for (const auto& ing : recipe_.ingredients) {
    const auto* item = find_item(ing);
    if (item == nullptr || !item_in_inventory(*item)) return false;
    if (auto it = recipe_.needs.find(ing); it != recipe_.needs.end()) {
      for (const auto& s : it->second) {
        if (!item->states.contains(s)) return false;
      }
    }
  }
  return true;
}

std::vector<std::string> GameState::admissible_actions() const {
  std::vector<std::string> out{"look"};
  for (const auto& [dir, exit] : room(player_room_).exits) {
    if (exit.door && !find_door(*exit.door)->open) continue;
    out.push_back("go " + std::string(to_string(dir)));
  }
  for (const auto& [dir, door] : doors_here()) out.push_back((door->open ? "close " : "open ") + door->name);
  for (const auto& f : furniture_) {
    if (f.room == player_room_ && f.kind == FurnitureKind::container) {
      out.push_back((f.open ? "close " : "open ") + f.name);
    }
  }
  auto visible = visible_items();
  for (const auto* i : visible) {
    if (!item_in_inventory(*i) && i->kind != ItemKind::cookbook) out.push_back("take " + i->name);
  }
  for (const auto* i : visible) {
    if (item_in_inventory(*i)) out.push_back("drop " + i->name);
  }
  for (const auto& f : furniture_) {
    if (f.room == player_room_) out.push_back("examine " + f.name);
  }
  for (const auto* i : visible) out.push_back("examine " + i->name);

  bool has_knife = std::any_of(items_.begin(), items_.end(),
                               [&](const Item& i) { return i.kind == ItemKind::knife && item_in_inventory(i); });
  for (const auto* i : visible) {
    if (!item_in_inventory(*i) || i->kind != ItemKind::food) continue;
    bool cut = std::any_of(i->states.begin(), i->states.end(), [](const auto& s) { return is_cut_state(s); });
    if (has_knife && !cut) {
      for (const auto& v : kCutVerbs) out.push_back(v + " " + i->name);
    }
    bool cooked = std::any_of(i->states.begin(), i->states.end(), [](const auto& s) { return is_cook_state(s); });
    if (!cooked) {
      for (const auto& f : furniture_) {
        if (f.room == player_room_ && f.kind == FurnitureKind::appliance) {
          out.push_back("cook " + i->name + " with " + f.name);
        }
      }
    }
  }
  if (recipe_ready()) out.push_back("prepare meal");
  return out;
}

std::string GameState::item_phrase(const Item& item) const {
  std::string phrase;
  for (const auto& s : item.states) phrase += s + " ";
  phrase += item.name;
  return article(phrase) + " " + phrase;
}

std::string GameState::describe_room() const {
  std::ostringstream os;
  os << "You are in the " << player_room_ << ".";
  std::vector<std::string> furn;
  for (const auto& f : furniture_) {
    if (f.room != player_room_) continue;
    std::string phrase = f.kind == FurnitureKind::container ? std::string(f.open ? "open " : "closed ") + f.name : f.name;
    furn.push_back(article(phrase) + " " + phrase);
  }
  if (!furn.empty()) os << " You see " << list_phrase(furn) << ".";
  for (const auto& f : furniture_) {
    if (f.room != player_room_) continue;
    if (f.kind == FurnitureKind::container && !f.open) continue;
    std::vector<std::string> held;
    for (const auto& i : items_) {
      if (i.where.kind == Placement::Kind::furniture && i.where.holder == f.name) held.push_back(item_phrase(i));
    }
    if (held.empty()) continue;
    os << (f.kind == FurnitureKind::container ? " Inside the " : " On the ") << f.name << " you see "
       << list_phrase(held) << ".";
  }
  std::vector<std::string> floor;
  for (const auto& i : items_) {
    if (i.where.kind == Placement::Kind::floor && i.where.holder == player_room_) floor.push_back(item_phrase(i));
  }
  if (!floor.empty()) os << " On the floor you see " << list_phrase(floor) << ".";
  for (const auto& [dir, exit] : room(player_room_).exits) {
    if (exit.door) {
      const auto* d = find_door(*exit.door);
      os << " " << capitalize(article(d->open ? "open" : "closed")) << " " << (d->open ? "open " : "closed ")
         << d->name << " leads " << to_string(dir) << ".";
    } else {
      os << " There is an exit to the " << to_string(dir) << ".";
    }
  }
  return os.str();
}

std::string GameState::step(const std::string& action) {
  auto admissible = admissible_actions();
  if (std::find(admissible.begin(), admissible.end(), action) == admissible.end()) {
    throw InadmissibleAction("inadmissible action '" + action + "' in " + player_room_);
  }
  auto space = action.find(' ');
  std::string verb = action.substr(0, space);
  std::string rest = space == std::string::npos ? "" : action.substr(space + 1);

  if (verb == "look") return describe_room();
  if (verb == "go") {
    auto dir = *parse_direction(rest);
    std::string from = player_room_;
    player_room_ = room(from).exits.at(dir).room;
    traversed_.emplace(from, player_room_);
    return describe_room();
  }
  if (verb == "open" || verb == "close") {
    bool open = verb == "open";
    if (auto* door = door_mut(rest)) {
      door->open = open;
      return "You " + verb + " the " + rest + ".";
    }
    auto* f = furniture_mut(rest);
    f->open = open;
    if (!open) return "You close the " + rest + ".";
    std::vector<std::string> inside;
    for (const auto& i : items_) {
      if (i.where.kind == Placement::Kind::furniture && i.where.holder == rest) inside.push_back(item_phrase(i));
    }
    if (inside.empty()) return "You open the " + rest + ". It is empty.";
    return "You open the " + rest + ". Inside you see " + list_phrase(inside) + ".";
  }
  if (verb == "take") {
    auto* item = item_mut(rest);
    std::string from = item->where.kind == Placement::Kind::floor ? "the floor of the " + item->where.holder
                                                                  : "the " + item->where.holder;
    item->where = Placement{Placement::Kind::inventory, {}};
    return "You take the " + rest + " from " + from + ".";
  }
  if (verb == "drop") {
    auto* item = item_mut(rest);
    item->where = Placement{Placement::Kind::floor, player_room_};
    return "You drop the " + rest + " on the floor of the " + player_room_ + ".";
  }
  if (verb == "examine") {
    if (const auto* f = find_furniture(rest)) {
      switch (f->kind) {
        case FurnitureKind::container:
          return "The " + rest + " is " + (f->open ? "open" : "closed") + ".";
        case FurnitureKind::supporter:
          return "The " + rest + " is a sturdy piece of furniture.";
        case FurnitureKind::appliance:
          return "The " + rest + " can be used to " + appliance_info(rest)->verb + " food.";
      }
    }
    const auto* item = find_item(rest);
    switch (item->kind) {
      case ItemKind::cookbook: {
        cookbook_read_ = true;
        std::vector<std::string> ingredients, directions;
        for (const auto& ing : recipe_.ingredients) {
          if (find_item(ing) == nullptr) continue;
          ingredients.push_back(ing);
          if (auto it = recipe_.needs.find(ing); it != recipe_.needs.end()) {
            for (const auto& s : it->second) {
              if (is_cut_state(s)) {
                directions.push_back(cut_verb_for(s) + " the " + ing);
              } else {
                for (const auto& a : kAppliances) {
                  if (a.state == s) directions.push_back(a.verb + " the " + ing);
                }
              }
            }
          }
        }
        if (ingredients.empty()) return "You read the cookbook. The recipe has been prepared.";
        directions.push_back("prepare meal");
        return "You read the cookbook. Ingredients: " + list_phrase(ingredients) + ". Directions: " +
               list_phrase(directions) + ".";
      }
      case ItemKind::knife: return "It is a sharp knife.";
      case ItemKind::meal: return "It is a delicious meal.";
      case ItemKind::food: return "It is " + item_phrase(*item) + ".";
    }
  }
  if (auto state = cut_state_for(verb); !state.empty()) {
    item_mut(rest)->states.insert(state);
    return "You " + verb + " the " + rest + " with the knife.";
  }
  if (verb == "cook") {
    auto with = rest.rfind(" with ");
    std::string food = rest.substr(0, with);
    std::string appliance = rest.substr(with + 6);
    const auto* info = appliance_info(appliance);
    item_mut(food)->states.insert(info->state);
    return "You " + info->verb + " the " + food + " with the " + appliance + ".";
  }
  if (action == "prepare meal") {
    for (const auto& ing : recipe_.ingredients) {
      std::erase_if(items_, [&](const Item& i) { return i.name == ing; });
    }
    items_.push_back(Item{"meal", ItemKind::meal, Placement{Placement::Kind::inventory, {}}, {}});
    meal_prepared_ = true;
    return "You prepare the meal. Adding the meal to your inventory.";
  }
  throw InadmissibleAction("unhandled action '" + action + "'");
}

BeliefGraph initial_seen(const GameState&) { return {}; }

BeliefGraph observed_subgraph(const GameState& state, const BeliefGraph& prev_seen) {
  auto full = state.full_graph();
  std::set<Triple> out;
  for (const auto& t : prev_seen.triples()) {
    if (full.contains(t)) out.insert(t);
  }
  auto visible = state.visible_graph();
  out.insert(visible.triples().begin(), visible.triples().end());
  return BeliefGraph(std::move(out));
}

std::vector<Transition> Game::on_path() const {
  std::vector<Transition> out;
  for (const auto& t : transitions) {
    if (t.on_path()) out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

using Rng = std::mt19937_64;

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

template <typename T>
std::vector<T> sample(Rng& rng, std::vector<T> pool, std::size_t k) {
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(k, pool.size()));
  return pool;
}

std::string room_of(const GameState& s, const Item& item) {
  if (item.where.kind == Placement::Kind::floor) return item.where.holder;
  if (item.where.kind == Placement::Kind::inventory) return s.player_room();
  return s.find_furniture(item.where.holder)->room;
}

class Planner {
 public:
  explicit Planner(GameState state) : sim_(std::move(state)) {}

  void act(const std::string& action) {
    sim_.step(action);
    actions_.push_back(action);
  }

  void go_to(const std::string& target) {
    // BFS over exits, ignoring door state.
    std::map<std::string, std::pair<std::string, Direction>> parent;
    std::deque<std::string> queue{sim_.player_room()};
    parent[sim_.player_room()] = {"", Direction::north};
    while (!queue.empty()) {
      auto cur = queue.front();
      queue.pop_front();
      if (cur == target) break;
      for (const auto& [dir, exit] : sim_.room(cur).exits) {
        if (parent.contains(exit.room)) continue;
        parent[exit.room] = {cur, dir};
        queue.push_back(exit.room);
      }
    }
    if (!parent.contains(target)) throw GenerationFailure("room '" + target + "' unreachable");
    std::vector<Direction> path;
    for (auto cur = target; cur != sim_.player_room(); cur = parent[cur].first) path.push_back(parent[cur].second);
    std::reverse(path.begin(), path.end());
    for (auto dir : path) {
      const auto& exit = sim_.room(sim_.player_room()).exits.at(dir);
      if (exit.door) {
        bool open = std::any_of(sim_.doors().begin(), sim_.doors().end(),
                                [&](const Door& d) { return d.name == *exit.door && d.open; });
        if (!open) act("open " + *exit.door);
      }
      act("go " + std::string(to_string(dir)));
    }
  }

  void fetch(const std::string& name) {
    const auto* item = sim_.find_item(name);
    if (item->where.kind == Placement::Kind::inventory) return;
    go_to(room_of(sim_, *item));
    item = sim_.find_item(name);
    if (item->where.kind == Placement::Kind::furniture) {
      const auto* f = sim_.find_furniture(item->where.holder);
      if (f->kind == FurnitureKind::container && !f->open) act("open " + f->name);
    }
    act("take " + name);
  }

  const GameState& sim() const { return sim_; }
  std::vector<std::string> take() { return std::move(actions_); }

 private:
  GameState sim_;
  std::vector<std::string> actions_;
};

GameState build_layout(const WorldConfig& config, Rng& rng) {
  GameState state;
  std::vector<std::string> others;
  for (const auto& r : config.room_names) {
    if (r != "kitchen") others.push_back(r);
  }
  auto rooms = sample(rng, others, static_cast<std::size_t>(config.n_rooms - 1));
  rooms.insert(rooms.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, rooms.size() + 1)), "kitchen");
  auto doors = sample(rng, kDoorPool, kDoorPool.size());
  std::size_t next_door = 0;

  // Grow a spanning tree on the grid so geometry stays consistent.
  std::map<std::pair<int, int>, std::string> cells;
  std::map<std::string, std::pair<int, int>> pos;
  auto offset = [](Direction d) -> std::pair<int, int> {
    switch (d) {
      case Direction::north: return {0, 1};
      case Direction::south: return {0, -1};
      case Direction::east: return {1, 0};
      case Direction::west: return {-1, 0};
    }
    return {0, 0};
  };
  for (const auto& name : rooms) state.add_room(name);
  cells[{0, 0}] = rooms[0];
  pos[rooms[0]] = {0, 0};
  for (std::size_t k = 1; k < rooms.size(); ++k) {
    std::vector<std::pair<std::string, Direction>> frontier;
    for (std::size_t j = 0; j < k; ++j) {
      for (auto d : {Direction::north, Direction::south, Direction::east, Direction::west}) {
        auto [dx, dy] = offset(d);
        auto [x, y] = pos[rooms[j]];
        if (!cells.contains({x + dx, y + dy})) frontier.emplace_back(rooms[j], d);
      }
    }
    auto [from, dir] = frontier[uniform_index(rng, frontier.size())];
    auto [dx, dy] = offset(dir);
    auto [x, y] = pos[from];
    cells[{x + dx, y + dy}] = rooms[k];
    pos[rooms[k]] = {x + dx, y + dy};
    std::optional<Door> door;
    if (next_door < doors.size() && chance(rng, config.door_probability)) {
      door = Door{doors[next_door++], chance(rng, 0.5)};
    }
    state.connect(from, dir, rooms[k], door);
  }
  return state;
}

std::pair<GameState, std::vector<std::string>> try_build(const WorldConfig& config, Rng& rng) {
  auto state = build_layout(config, rng);
  std::vector<std::string> room_list;
  for (const auto& r : state.rooms()) room_list.push_back(r.name);

  state.add_furniture({"fridge", "kitchen", FurnitureKind::container, false});
  state.add_furniture({"counter", "kitchen", FurnitureKind::supporter, false});
  state.add_furniture({"table", "kitchen", FurnitureKind::supporter, false});
  state.add_furniture({"stove", "kitchen", FurnitureKind::appliance, false});
  state.add_furniture({"oven", "kitchen", FurnitureKind::appliance, false});
  std::vector<std::string> appliances{"stove", "oven"};
  auto containers = sample(rng, kContainerPool, kContainerPool.size());
  auto supporters = sample(rng, kSupporterPool, kSupporterPool.size());
  std::size_t next_container = 0, next_supporter = 0;
  for (const auto& r : room_list) {
    if (r == "kitchen") continue;
    if (r == "backyard") {
      state.add_furniture({"bbq", r, FurnitureKind::appliance, false});
      appliances.push_back("bbq");
    }
    if (chance(rng, 0.6)) state.add_furniture({containers[next_container++], r, FurnitureKind::container, chance(rng, 0.3)});
    if (chance(rng, 0.7)) state.add_furniture({supporters[next_supporter++], r, FurnitureKind::supporter, false});
  }

  std::vector<std::string> holders;
  for (const auto& f : state.furniture()) {
    if (f.kind != FurnitureKind::appliance) holders.push_back(f.name);
  }
  auto random_placement = [&]() -> Placement {
    // fridge twice as likely for food; floor placements 1 in 6
    if (chance(rng, 1.0 / 6.0)) return Placement{Placement::Kind::floor, room_list[uniform_index(rng, room_list.size())]};
    return Placement{Placement::Kind::furniture, holders[uniform_index(rng, holders.size())]};
  };

  state.add_item(Item{"cookbook", ItemKind::cookbook, Placement{Placement::Kind::furniture, "table"}, {}});
  state.add_item(Item{"knife", ItemKind::knife,
                      chance(rng, 0.5) ? Placement{Placement::Kind::furniture, "counter"} : random_placement(), {}});

  auto foods = sample(rng, config.food_pool(), static_cast<std::size_t>(config.n_objects));
  for (const auto& food : foods) {
    auto where = chance(rng, 0.35) ? Placement{Placement::Kind::furniture, "fridge"} : random_placement();
    state.add_item(Item{food, ItemKind::food, where, {}});
  }

  Recipe recipe;
  recipe.ingredients = sample(rng, foods, static_cast<std::size_t>(config.recipe_length));
  for (const auto& ing : recipe.ingredients) {
    std::vector<std::string> needs;
    if (chance(rng, 0.5)) needs.push_back(kCutStates[uniform_index(rng, kCutStates.size())]);
    if (chance(rng, 0.5)) needs.push_back(appliance_info(appliances[uniform_index(rng, appliances.size())])->state);
    if (!needs.empty()) recipe.needs[ing] = needs;
  }
  state.set_recipe(recipe);
  state.place_player(room_list[uniform_index(rng, room_list.size())]);

  Planner plan(state);
  plan.act("look");
  plan.go_to("kitchen");
  plan.act("examine cookbook");
  bool need_knife = std::any_of(recipe.needs.begin(), recipe.needs.end(), [](const auto& kv) {
    return std::any_of(kv.second.begin(), kv.second.end(), [](const auto& s) { return is_cut_state(s); });
  });
  if (need_knife) plan.fetch("knife");
  for (const auto& ing : recipe.ingredients) plan.fetch(ing);
  for (const auto& ing : recipe.ingredients) {
    auto it = recipe.needs.find(ing);
    if (it == recipe.needs.end()) continue;
    for (const auto& s : it->second) {
      if (is_cut_state(s)) {
        plan.act(cut_verb_for(s) + " " + ing);
      } else {
        for (const auto& a : kAppliances) {
          if (a.state != s) continue;
          plan.go_to(state.find_furniture(a.name)->room);
          plan.act("cook " + ing + " with " + a.name);
        }
      }
    }
  }
  plan.go_to("kitchen");
  plan.act("prepare meal");
  if (!plan.sim().meal_prepared()) throw GenerationFailure("walkthrough did not prepare the meal");
  return {std::move(state), plan.take()};
}

}  // namespace

std::pair<GameState, std::vector<std::string>> build_world(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(config.room_layout_seed),
                    static_cast<std::uint32_t>(config.room_layout_seed >> 32)};
  Rng rng(seq);
  constexpr int kMaxAttempts = 16;
  std::string last_error;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    try {
      return try_build(config, rng);
    } catch (const GenerationFailure& e) {
      last_error = e.what();
    } catch (const InadmissibleAction& e) {
      last_error = e.what();
    }
  }
  throw GenerationFailure("no playable layout after " + std::to_string(kMaxAttempts) + " attempts: " + last_error);
}

Game generate_game(const WorldConfig& config, std::uint64_t seed, std::int64_t game_id) {
  auto [state, walkthrough] = build_world(config, seed);
  // Off-path sampling uses its own stream so the layout does not depend on it.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
  Rng rng(seq);

  Game game;
  game.id = game_id;
  game.walkthrough = walkthrough;
  auto seen = initial_seen(state);
  const auto n_random = static_cast<std::size_t>(config.n_random_actions_per_step);
  for (std::size_t step = 0; step < walkthrough.size(); ++step) {
    auto prev = seen;
    auto obs = state.step(walkthrough[step]);
    seen = observed_subgraph(state, prev);
    game.transitions.push_back(Transition{game_id, static_cast<std::int64_t>(step), 0, prev, walkthrough[step], obs,
                                          seen, state.full_graph()});

    auto branch_state = state;
    auto branch_seen = seen;
    std::vector<std::string> picks;
    if (!config.compound_random_actions) {
      auto actions = state.admissible_actions();
      if (actions.size() >= n_random) {
        picks = sample(rng, actions, n_random);
      } else {
        for (std::size_t b = 0; b < n_random; ++b) picks.push_back(actions[uniform_index(rng, actions.size())]);
      }
    }
    for (std::size_t b = 0; b < n_random; ++b) {
      if (!config.compound_random_actions) {
        branch_state = state;
        branch_seen = seen;
      }
      std::string action;
      if (config.compound_random_actions) {
        auto actions = branch_state.admissible_actions();
        action = actions[uniform_index(rng, actions.size())];
      } else {
        action = picks[b];
      }
      auto before = branch_seen;
      auto branch_obs = branch_state.step(action);
      branch_seen = observed_subgraph(branch_state, before);
      game.transitions.push_back(Transition{game_id, static_cast<std::int64_t>(step), static_cast<std::int64_t>(b + 1),
                                            before, action, branch_obs, branch_seen, branch_state.full_graph()});
    }
  }
  return game;
}

}  // namespace kgup
