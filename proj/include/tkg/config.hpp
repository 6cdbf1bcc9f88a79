// Copyright 2026 The tkginc Authors. All rights reserved.
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

// Sectioned key/value configuration shared by every CLI command.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tkg/continual.hpp"
#include "tkg/core.hpp"
#include "tkg/synth.hpp"

namespace tkg {

struct ConfigKey {
  std::string key;  // "section.name"
  std::string default_value;
  std::string help;
};

//! Every accepted key with its default, in display order.
const std::vector<ConfigKey>& config_schema();

class ResolvedConfig {
 public:
  ResolvedConfig();

  //! Reads an INI file ([section] then key = value). Unknown keys throw ConfigError.
  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  nlohmann::json to_json() const;
  std::string to_ini() const;

 private:
  std::map<std::string, std::string> values_;
};

SnapshotConfig snapshot_config(const ResolvedConfig& c);
RunConfig run_config(const ResolvedConfig& c);
SynthConfig synth_config(const ResolvedConfig& c);

struct GridCell {
  double lambda = 0.5;
  double mu = 0.1;
  std::size_t max_similar = 20;
  double alpha = 0.5;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

//! lambda {0.3, 0.5, 0.7} x mu {0.1, 0.3, 0.5} x n {10, 15, 20, 25} x alpha {0, 0.1, 0.2, 0.5, 0.8, 1}.
std::vector<GridCell> full_grid();

//! Cells from the grid section: the named preset, or the cartesian product of
//! the listed values (an empty list keeps the run's current value).
std::vector<GridCell> grid_cells(const ResolvedConfig& c);

void apply(const GridCell& cell, RunConfig& cfg);
void apply(const GridCell& cell, ResolvedConfig& c);

}  // namespace tkg
