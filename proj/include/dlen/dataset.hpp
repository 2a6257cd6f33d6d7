#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dlen/image.hpp"

namespace dlen {

struct DatasetEntry {
  std::string name;
  std::filesystem::path low;
  std::filesystem::path high;
};

struct PairedDataset {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;  // lexicographic by name
  std::vector<std::string> warnings;  // unmatched files

  ImagePair load(std::size_t index) const;
};

// Matches regular files with identical names under root/low and root/high.
PairedDataset scan_dataset(const std::filesystem::path& root);

}  // namespace dlen
