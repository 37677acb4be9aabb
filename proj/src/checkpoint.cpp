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

#include "kgup/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace kgup {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'K', 'G', 'U', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

using json = nlohmann::ordered_json;

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& what) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw CheckpointError("truncated checkpoint reading " + what);
  return value;
}

void put_tensor(std::ostream& os, const std::string& name, const ad::Shape& shape, std::span<const float> data) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put<std::uint64_t>(os, d);
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
}

struct Record {
  std::string name;
  ad::Shape shape;
  std::vector<float> data;
};

Record get_tensor(std::istream& is, bool with_data) {
  Record r;
  const auto len = get<std::uint32_t>(is, "tensor name");
  if (len > (1u << 16)) throw CheckpointError("implausible tensor name length " + std::to_string(len));
  r.name.resize(len);
  if (!is.read(r.name.data(), len)) throw CheckpointError("truncated checkpoint reading tensor name");
  const auto rank = get<std::uint32_t>(is, r.name + " rank");
  if (rank > 2) throw CheckpointError("tensor " + r.name + " has rank " + std::to_string(rank));
  std::size_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    r.shape.push_back(get<std::uint64_t>(is, r.name + " dims"));
    n *= r.shape.back();
  }
  const auto bytes = static_cast<std::streamsize>(n * sizeof(float));
  if (with_data) {
    r.data.resize(n);
    if (!is.read(reinterpret_cast<char*>(r.data.data()), bytes)) {
      throw CheckpointError("truncated checkpoint reading " + r.name + " data");
    }
  } else if (!is.seekg(bytes, std::ios::cur)) {
    throw CheckpointError("truncated checkpoint reading " + r.name + " data");
  }
  return r;
}

json config_json(const ModelConfig& c) {
  return {{"hidden", c.hidden},
          {"enc_layers", c.enc_layers},
          {"dec_layers", c.dec_layers},
          {"heads", c.heads},
          {"graph_layers", c.graph_layers},
          {"graph_skip", c.graph_skip},
          {"variant", std::string(to_string(c.variant))},
          {"max_decode_len", c.max_decode_len},
          {"seed", c.seed},
          {"vocab", c.vocab.tokens()}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.hidden = j.at("hidden").get<std::size_t>();
  c.enc_layers = j.at("enc_layers").get<std::size_t>();
  c.dec_layers = j.at("dec_layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.graph_layers = j.at("graph_layers").get<std::size_t>();
  c.graph_skip = j.at("graph_skip").get<bool>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.max_decode_len = j.at("max_decode_len").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.vocab = Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>());
  return c;
}

json read_header(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError("not a kgup checkpoint");
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto len = get<std::uint64_t>(is, "header length");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated checkpoint header");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  return is;
}

}  // namespace

OptimizerState capture_optimizer(ad::Adam& adam) {
  return {adam.config(), adam.step_count(), adam.first_moments(), adam.second_moments()};
}

void restore_optimizer(ad::Adam& adam, const OptimizerState& state) {
  auto& m = adam.first_moments();
  auto& v = adam.second_moments();
  if (state.first.size() != m.size() || state.second.size() != v.size()) {
    throw CheckpointError("optimizer state covers " + std::to_string(state.first.size()) + " tensors, expected " +
                          std::to_string(m.size()));
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (state.first[i].size() != m[i].size() || state.second[i].size() != v[i].size()) {
      throw CheckpointError("optimizer moment " + std::to_string(i) + " has the wrong size");
    }
  }
  m = state.first;
  v = state.second;
  adam.set_step_count(state.step_count);
  adam.set_lr(state.config.lr);
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const OptimizerState* optimizer,
                     std::size_t step) {
  const auto& params = model.params().all();
  json header;
  header["model"] = config_json(model.config());
  header["step"] = step;
  if (optimizer != nullptr) {
    if (optimizer->first.size() != params.size() || optimizer->second.size() != params.size()) {
      throw CheckpointError("optimizer state does not match the model parameters");
    }
    header["optimizer"] = {{"lr", optimizer->config.lr},
                           {"beta1", optimizer->config.beta1},
                           {"beta2", optimizer->config.beta2},
                           {"eps", optimizer->config.eps},
                           {"clip_norm", optimizer->config.clip_norm},
                           {"step_count", optimizer->step_count}};
  } else {
    header["optimizer"] = nullptr;
  }
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot write checkpoint " + path.string());
  os.write(kMagic, 8);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : params) put_tensor(os, name, t.shape(), t.data());
  if (optimizer != nullptr) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_tensor(os, "adam.m/" + params[i].first, params[i].second.shape(), optimizer->first[i]);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_tensor(os, "adam.v/" + params[i].first, params[i].second.shape(), optimizer->second[i]);
    }
  }
  if (!os.flush()) throw CheckpointError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto is = open_in(path);
  const auto header = read_header(is);
  LoadedCheckpoint out;
  try {
    out.model = std::make_unique<Model>(config_from_json(header.at("model")));
    out.step = header.at("step").get<std::size_t>();
    if (!header.at("optimizer").is_null()) {
      const auto& o = header.at("optimizer");
      OptimizerState s;
      s.config.lr = o.at("lr").get<float>();
      s.config.beta1 = o.at("beta1").get<float>();
      s.config.beta2 = o.at("beta2").get<float>();
      s.config.eps = o.at("eps").get<float>();
      s.config.clip_norm = o.at("clip_norm").get<float>();
      s.step_count = o.at("step_count").get<std::size_t>();
      out.optimizer = std::move(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("bad model config in checkpoint: ") + e.what());
  }

  const auto& params = out.model->params().all();
  auto read_into = [&](const std::string& name, const ad::Shape& shape, std::vector<float>& dst) {
    auto r = get_tensor(is, true);
    if (r.name != name) throw CheckpointError("expected tensor " + name + ", found " + r.name);
    if (r.shape != shape) {
      throw CheckpointError("tensor " + name + " has shape " + ad::shape_string(r.shape) + ", expected " +
                            ad::shape_string(shape));
    }
    dst = std::move(r.data);
  };
  for (const auto& [name, t] : params) {
    std::vector<float> data;
    read_into(name, t.shape(), data);
    auto mut = ad::Tensor(t).data();
    std::copy(data.begin(), data.end(), mut.begin());
  }
  if (out.optimizer) {
    out.optimizer->first.resize(params.size());
    out.optimizer->second.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      read_into("adam.m/" + params[i].first, params[i].second.shape(), out.optimizer->first[i]);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      read_into("adam.v/" + params[i].first, params[i].second.shape(), out.optimizer->second[i]);
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after the last tensor");
  return out;
}

std::vector<std::pair<std::string, ad::Shape>> checkpoint_tensors(const std::filesystem::path& path) {
  auto is = open_in(path);
  read_header(is);
  std::vector<std::pair<std::string, ad::Shape>> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    auto r = get_tensor(is, false);
    out.emplace_back(std::move(r.name), std::move(r.shape));
  }
  return out;
}

}  // namespace kgup
