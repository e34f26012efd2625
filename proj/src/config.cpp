#include "ctlpp/config.hpp"

#include "ctlpp/errors.hpp"

namespace ctlpp {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::A: return "A";
    case Variant::R: return "R";
    case Variant::S: return "S";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "A") return Variant::A;
  if (text == "R") return Variant::R;
  if (text == "S") return Variant::S;
  throw ConfigError("unknown variant '" + std::string(text) + "' (expected A, R or S)");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Iid: return "iid";
    case Split::Ood: return "ood";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "iid") return Split::Iid;
  if (text == "ood") return Split::Ood;
  throw ConfigError("unknown split '" + std::string(text) + "'");
}

void validate(const TaskConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.num_symbols < 1) fail("num_symbols must be at least 1");
  if (c.num_functions < 2) fail("num_functions must be at least 2");
  if (c.max_functions < 1) fail("max_functions must be at least 1");
  if (c.train_size < 0 || c.test_size < 0) fail("split sizes must be non-negative");
  if (c.variant == Variant::S) {
    if (c.max_functions < 2) fail("variant S needs max_functions >= 2");
    if (c.go_size < 0) fail("go_size must be non-negative");
    if (c.num_functions - c.go_size < 4)
      fail("variant S needs at least one function in each of Ga1, Ga2, Gb1, Gb2 "
           "(num_functions - go_size >= 4)");
    if (c.shared_symbols < 0 || c.shared_symbols > c.num_symbols)
      fail("shared_symbols must lie in [0, num_symbols]");
    if ((c.num_symbols + c.shared_symbols) % 2 != 0)
      fail("num_symbols + shared_symbols must be even so that |S_a| = |S_b|");
  } else {
    if (c.num_functions % 2 != 0) fail("variants A and R split functions 50/50: num_functions must be even");
  }
}

nlohmann::ordered_json to_json(const TaskConfig& c) {
  nlohmann::ordered_json j;
  j["variant"] = std::string(to_string(c.variant));
  j["num_symbols"] = c.num_symbols;
  j["num_functions"] = c.num_functions;
  j["max_functions"] = c.max_functions;
  j["train_size"] = c.train_size;
  j["test_size"] = c.test_size;
  j["go_size"] = c.go_size;
  j["shared_symbols"] = c.shared_symbols;
  j["seed"] = c.seed;
  return j;
}

TaskConfig config_from_json(const nlohmann::json& j, TaskConfig base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "variant") base.variant = parse_variant(value.get<std::string>());
      else if (key == "num_symbols") base.num_symbols = value.get<int>();
      else if (key == "num_functions") base.num_functions = value.get<int>();
      else if (key == "max_functions") base.max_functions = value.get<int>();
      else if (key == "train_size") base.train_size = value.get<long>();
      else if (key == "test_size") base.test_size = value.get<long>();
      else if (key == "go_size") base.go_size = value.is_null() ? 0 : value.get<int>();
      else if (key == "shared_symbols") base.shared_symbols = value.is_null() ? 0 : value.get<int>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return base;
}

}  // namespace ctlpp
