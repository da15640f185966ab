#pragma once

#include <filesystem>
#include <string>

#include "ccassg/graph.hpp"

namespace ccassg {

/// Raw citation-network layouts the converter understands.
///  - linqs:  <name>.content ("id f1 .. fF label") and <name>.cites ("cited citing")
///  - pubmed: *NODE.paper.tab and *.cites.tab (sparse "w-term=value" TF-IDF rows)
enum class SourceFormat { linqs, pubmed };

SourceFormat parse_source_format(const std::string& s);

/// Name of the split every import adds: 20 train nodes per class, 500 val,
/// 1000 test, drawn with a fixed seed.
inline constexpr const char* kPerClassSplit = "per-class-20";

/// Reads a raw dump from `input_dir`. Citations naming unknown papers are
/// dropped and counted in `ingest.dangling_edges_dropped`. Throws DataError
/// for malformed or empty input and ConfigError for a directory that does not
/// match the format.
GraphDataset import_dataset(SourceFormat format, const std::filesystem::path& input_dir, const std::string& name);

/// "nodes=N edges(directed)=E classes=C features=F"
std::string dataset_statistics(const GraphDataset& g);

}  // namespace ccassg
