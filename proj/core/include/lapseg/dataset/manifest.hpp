#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace lapseg::dataset {

enum class Split { train, val, test, unassigned };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct SampleRecord {
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
  std::string procedure_id;
  std::string frame_id;
  Split split = Split::unassigned;

  bool operator==(const SampleRecord&) const = default;
};

struct Manifest {
  std::vector<SampleRecord> records;
  std::filesystem::path root;
  std::uint64_t seed = 0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

enum class Layout { manifest_csv, paired_dirs };

Layout parse_layout(std::string_view text);

/// Builds a manifest from `root`.
///
/// `paired_dirs` expects `<root>/images/<rel>.{png,jpg,jpeg}` with masks at
/// `<root>/masks/<rel>.png`; the first path component of `<rel>` becomes the
/// procedure id. `manifest_csv` reads `<root>/manifest.csv` (or `root` itself
/// when it is a file). Records come back sorted by image path.
Manifest scan_dataset(const std::filesystem::path& root, Layout layout);

using SplitRatios = std::array<double, 3>;

/// Seeded shuffle, then val gets floor(r_val*N), test floor(r_test*N), and
/// train keeps the remainder.
std::tuple<Manifest, Manifest, Manifest> split_manifest(const Manifest& manifest,
                                                        const SplitRatios& ratios,
                                                        std::uint64_t seed);

// Manifest CSV: `image_path,mask_path,procedure_id,frame_id,split`.
inline constexpr std::string_view kManifestHeader =
    "image_path,mask_path,procedure_id,frame_id,split";

void write_manifest_csv(const Manifest& manifest, std::ostream& out);
void write_manifest_csv(const Manifest& manifest, const std::filesystem::path& file);

/// Relative paths inside the CSV are resolved against `base_dir`.
Manifest read_manifest_csv(std::istream& in, const std::filesystem::path& base_dir);
Manifest read_manifest_csv(const std::filesystem::path& file);

}  // namespace lapseg::dataset
