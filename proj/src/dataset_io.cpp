#include "ctlpp/dataset_io.hpp"

#include "ctlpp/errors.hpp"

namespace ctlpp {

std::string format_example_line(const Example& ex) {
  std::string line = "{\"tokens\": [";
  for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
    if (i) line += ',';
    line += '"';
    line += ex.tokens[i];
    line += '"';
  }
  line += "], \"target\": ";
  line += std::to_string(ex.target);
  line += ", \"len\": ";
  line += std::to_string(ex.length());
  line += '}';
  return line;
}

DatasetManifest write_dataset(std::span<const Example> examples, DatasetManifest manifest,
                              const std::filesystem::path& path) {
  std::vector<std::string> lines;
  lines.reserve(examples.size());
  Fnv1a hash;
  for (auto& [len, count] : manifest.counts) count = 0;
  for (const auto& ex : examples) {
    lines.push_back(format_example_line(ex));
    hash.update(lines.back());
    hash.update("\n");
    ++manifest.counts[ex.length()];
  }
  manifest.size = static_cast<long>(examples.size());
  manifest.content_hash = hex64(hash.digest());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << manifest.to_json().dump() << '\n';
  for (const auto& line : lines) out << line << '\n';
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
  return manifest;
}

DatasetManifest write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  return write_dataset(dataset.examples, dataset.manifest, path);
}

DatasetReader::DatasetReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open " + path.string());
  std::string first;
  if (!std::getline(in_, first)) throw ParseError("empty dataset file (missing manifest)", 1);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(first);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what(), 1);
  }
  try {
    manifest_ = DatasetManifest::from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(e.what(), 1);
  }
}

Example DatasetReader::parse_line(const std::string& text, const DatasetManifest& manifest, long line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw ParseError("not valid JSON", line);
  }
  Example ex;
  try {
    ex.tokens = j.at("tokens").get<std::vector<std::string>>();
    ex.target = j.at("target").get<SymbolId>();
    const int len = j.at("len").get<int>();
    ex.expression = parse_tokens(ex.tokens, manifest.config.num_functions, manifest.config.num_symbols);
    if (len != ex.length())
      throw ParseError("len " + std::to_string(len) + " disagrees with " + std::to_string(ex.length()) +
                       " function tokens", line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad example: ") + e.what(), line);
  } catch (const ParseError& e) {
    if (e.line() > 0) throw;
    throw ParseError(e.what(), line);
  }
  ex.split = manifest.split;
  return ex;
}

bool DatasetReader::next(Example& out) {
  if (done_) return false;
  std::string text;
  if (!std::getline(in_, text)) {
    done_ = true;
    return false;
  }
  ++line_;
  hash_.update(text);
  hash_.update("\n");
  out = parse_line(text, manifest_, line_);
  return true;
}

bool DatasetReader::hash_matches() const { return done_ && computed_hash() == manifest_.content_hash; }

std::string DatasetReader::computed_hash() const { return hex64(hash_.digest()); }

Dataset read_dataset(const std::filesystem::path& path) {
  DatasetReader reader(path);
  Dataset ds;
  ds.manifest = reader.manifest();
  Example ex;
  while (reader.next(ex)) ds.examples.push_back(std::move(ex));
  if (!reader.hash_matches())
    throw ParseError("content hash mismatch: manifest says " + ds.manifest.content_hash + ", lines hash to " +
                     reader.computed_hash());
  return ds;
}

}  // namespace ctlpp
