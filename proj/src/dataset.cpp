#include "dlen/dataset.hpp"

#include <algorithm>
#include <set>

#include "dlen/error.hpp"

namespace dlen {

namespace {

std::set<std::string> list_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw NotFoundError("missing dataset directory " + dir.string());
  }
  std::set<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file()) names.insert(e.path().filename().string());
  }
  return names;
}

}  // namespace

ImagePair PairedDataset::load(std::size_t index) const {
  const auto& e = entries.at(index);
  ImagePair pair{load_image(e.low), load_image(e.high)};
  if (pair.low.width != pair.high.width || pair.low.height != pair.high.height) {
    throw FormatError("pair '" + e.name + "' has mismatched dimensions");
  }
  return pair;
}

PairedDataset scan_dataset(const std::filesystem::path& root) {
  PairedDataset ds;
  ds.root = root;
  const auto low = list_files(root / "low"), high = list_files(root / "high");
  for (const auto& name : low) {
    if (high.count(name)) {
      ds.entries.push_back({name, root / "low" / name, root / "high" / name});
    } else {
      ds.warnings.push_back("low/" + name + " has no counterpart in high/");
    }
  }
  for (const auto& name : high) {
    if (!low.count(name)) ds.warnings.push_back("high/" + name + " has no counterpart in low/");
  }
  if (ds.entries.empty()) throw EmptyDatasetError("no matched pairs under " + root.string());
  return ds;
}

}  // namespace dlen
