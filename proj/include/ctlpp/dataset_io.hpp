#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>

#include "ctlpp/datasetgen.hpp"

namespace ctlpp {

/// One example line, byte for byte:
/// {"tokens": ["f3","f17","2"], "target": 5, "len": 2}
std::string format_example_line(const Example& ex);

/// Writes the manifest line followed by one line per example (LF terminated).
/// Per-length counts, size and content hash are recomputed from `examples`;
/// the manifest actually written is returned.
DatasetManifest write_dataset(std::span<const Example> examples, DatasetManifest manifest,
                              const std::filesystem::path& path);
DatasetManifest write_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Streams a dataset file one example at a time.
class DatasetReader {
 public:
  /// Opens the file and parses the manifest line. Throws IoError or ParseError.
  explicit DatasetReader(const std::filesystem::path& path);

  const DatasetManifest& manifest() const { return manifest_; }

  /// Reads the next example; false at end of file. Throws ParseError with the
  /// 1-based line number on a malformed line.
  bool next(Example& out);

  /// Physical line number of the example returned by the last next() call.
  long line() const { return line_; }

  /// After end of file: whether the example lines hash to the manifest's content_hash.
  bool hash_matches() const;
  std::string computed_hash() const;

  /// Parses one example line against the manifest vocabulary.
  static Example parse_line(const std::string& text, const DatasetManifest& manifest, long line);

 private:
  std::ifstream in_;
  DatasetManifest manifest_;
  Fnv1a hash_;
  long line_ = 1;
  bool done_ = false;
};

/// Reads a whole file; throws ParseError if the content hash does not match.
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace ctlpp
