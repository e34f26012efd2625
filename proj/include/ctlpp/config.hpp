#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace ctlpp {

enum class Variant { A, R, S };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

enum class Split { Train, Iid, Ood };

std::string_view to_string(Split s);
Split parse_split(std::string_view text);

/// Every knob of a generated benchmark. Defaults reproduce the reference
/// setting: 8 symbols, 32 functions, up to 6 composed functions, 300k training
/// and 1000 test examples per split.
struct TaskConfig {
  Variant variant = Variant::A;
  int num_symbols = 8;
  int num_functions = 32;
  int max_functions = 6;
  long train_size = 300000;
  long test_size = 1000;
  // Variant S only.
  int go_size = 0;
  int shared_symbols = 0;
  std::uint64_t seed = 0;

  long split_size(Split split) const { return split == Split::Train ? train_size : test_size; }

  bool operator==(const TaskConfig&) const = default;
};

/// Throws ConfigError describing the first violated constraint.
void validate(const TaskConfig& config);

nlohmann::ordered_json to_json(const TaskConfig& config);

/// Reads the fields present in `j` on top of `base`; absent keys keep base values.
TaskConfig config_from_json(const nlohmann::json& j, TaskConfig base = {});

}  // namespace ctlpp
