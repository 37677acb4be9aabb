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

#include "kgup/graph.hpp"
#include "kgup/world.hpp"

namespace kgup::fixtures {

// The shed example: the player walks west from the backyard into a shed.
inline UpdateSequence shed_ops() {
  return {add_op("player", "shed", "at"),      add_op("shed", "backyard", "west_of"),
          add_op("wooden door", "shed", "east_of"), add_op("toolbox", "shed", "in"),
          add_op("toolbox", "closed", "is"),   add_op("workbench", "shed", "in"),
          delete_op("player", "backyard", "at")};
}

inline Transition shed_transition() {
  Transition t;
  t.g_seen_prev = BeliefGraph{make_triple("player", "backyard", "at"), make_triple("patio chair", "backyard", "at")};
  t.action = "go west";
  t.observation = "You are in the shed. You see a closed toolbox and a workbench. A wooden door leads east.";
  t.g_seen_next = apply_update(t.g_seen_prev, shed_ops());
  return t;
}

}  // namespace kgup::fixtures
