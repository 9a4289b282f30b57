#include "lapseg/dataset/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "lapseg/error.hpp"
#include "lapseg/random.hpp"

namespace fs = std::filesystem;

namespace lapseg::dataset {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "unassigned";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  if (text == "unassigned" || text.empty()) return Split::unassigned;
  throw Error(ErrorCode::invalid_manifest, "unknown split '" + std::string(text) + "'");
}

Layout parse_layout(std::string_view text) {
  if (text == "manifest_csv") return Layout::manifest_csv;
  if (text == "paired_dirs") return Layout::paired_dirs;
  throw Error(ErrorCode::invalid_config, "unknown layout '" + std::string(text) + "'");
}

namespace {

bool is_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

bool readable(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return in.good();
}

void sort_by_image_path(std::vector<SampleRecord>& records) {
  std::sort(records.begin(), records.end(), [](const SampleRecord& a, const SampleRecord& b) {
    return a.image_path.generic_string() < b.image_path.generic_string();
  });
}

void check_unique(const std::vector<SampleRecord>& records) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.image_path.generic_string()).second)
      throw Error(ErrorCode::invalid_manifest,
                  "duplicate image_path " + r.image_path.generic_string());
  }
}

void verify_files(const std::vector<SampleRecord>& records) {
  for (const auto& r : records) {
    if (!fs::is_regular_file(r.image_path) || !readable(r.image_path))
      throw Error(ErrorCode::unreadable_image, r.image_path.string());
    if (!fs::is_regular_file(r.mask_path))
      throw Error(ErrorCode::missing_mask, "no mask for image " + r.image_path.string());
  }
}

Manifest scan_paired_dirs(const fs::path& root) {
  const fs::path images = root / "images";
  const fs::path masks = root / "masks";
  Manifest manifest;
  manifest.root = root;
  if (!fs::is_directory(images)) throw Error(ErrorCode::empty_dataset, "no images/ under " + root.string());

  for (const auto& entry : fs::recursive_directory_iterator(images)) {
    if (!entry.is_regular_file() || !is_image_extension(entry.path())) continue;
    const fs::path rel = entry.path().lexically_relative(images);
    fs::path mask = (masks / rel).replace_extension(".png");
    if (!fs::is_regular_file(mask)) {
      fs::path same_ext = masks / rel;
      if (fs::is_regular_file(same_ext))
        mask = same_ext;
      else
        throw Error(ErrorCode::missing_mask, "no mask for image " + entry.path().string());
    }
    if (!readable(entry.path())) throw Error(ErrorCode::unreadable_image, entry.path().string());

    SampleRecord rec;
    rec.image_path = entry.path();
    rec.mask_path = mask;
    auto first = rel.begin();
    if (std::distance(rel.begin(), rel.end()) > 1) rec.procedure_id = first->string();
    rec.frame_id = fs::path(rel).replace_extension().generic_string();
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

// Minimal RFC 4180 field splitting; quoted fields may contain commas and "".
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Manifest scan_dataset(const fs::path& root, Layout layout) {
  if (!fs::exists(root)) throw Error(ErrorCode::io_error, "dataset root does not exist: " + root.string());
  const fs::path abs_root = fs::absolute(root).lexically_normal();

  Manifest manifest;
  if (layout == Layout::paired_dirs) {
    manifest = scan_paired_dirs(abs_root);
  } else {
    const fs::path file = fs::is_regular_file(abs_root) ? abs_root : abs_root / "manifest.csv";
    if (!fs::is_regular_file(file)) throw Error(ErrorCode::empty_dataset, "no manifest.csv in " + abs_root.string());
    manifest = read_manifest_csv(file);
    manifest.root = abs_root;
    verify_files(manifest.records);
  }
  if (manifest.empty()) throw Error(ErrorCode::empty_dataset, "no image/mask pairs under " + abs_root.string());
  sort_by_image_path(manifest.records);
  check_unique(manifest.records);
  return manifest;
}

std::tuple<Manifest, Manifest, Manifest> split_manifest(const Manifest& manifest,
                                                        const SplitRatios& ratios,
                                                        std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!std::isfinite(r) || r < 0.0) throw Error(ErrorCode::bad_ratios, "ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::bad_ratios, "ratios must sum to 1");
  if (manifest.empty()) throw Error(ErrorCode::empty_dataset, "cannot split an empty manifest");

  const std::size_t n = manifest.size();
  // The epsilon keeps products that are integral in exact arithmetic
  // (e.g. 0.29 * 100) from flooring one below.
  auto take = [n](double r) {
    return std::min<std::size_t>(n, static_cast<std::size_t>(std::floor(r * double(n) + 1e-9)));
  };
  const std::size_t n_val = take(ratios[1]);
  const std::size_t n_test = std::min(take(ratios[2]), n - n_val);
  const std::size_t n_train = n - n_val - n_test;

  const auto order = permutation(n, seed);
  Manifest train, val, test;
  for (Manifest* m : {&train, &val, &test}) {
    m->root = manifest.root;
    m->seed = seed;
  }
  train.records.reserve(n_train);
  val.records.reserve(n_val);
  test.records.reserve(n_test);
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord rec = manifest.records[order[i]];
    if (i < n_train) {
      rec.split = Split::train;
      train.records.push_back(std::move(rec));
    } else if (i < n_train + n_val) {
      rec.split = Split::val;
      val.records.push_back(std::move(rec));
    } else {
      rec.split = Split::test;
      test.records.push_back(std::move(rec));
    }
  }
  return {std::move(train), std::move(val), std::move(test)};
}

void write_manifest_csv(const Manifest& manifest, std::ostream& out) {
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.records) {
    out << csv_field(r.image_path.generic_string()) << ',' << csv_field(r.mask_path.generic_string())
        << ',' << csv_field(r.procedure_id) << ',' << csv_field(r.frame_id) << ','
        << to_string(r.split) << '\n';
  }
}

void write_manifest_csv(const Manifest& manifest, const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + file.string());
  write_manifest_csv(manifest, out);
}

Manifest read_manifest_csv(std::istream& in, const fs::path& base_dir) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::invalid_manifest, "empty manifest file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kManifestHeader)
    throw Error(ErrorCode::invalid_manifest, "unexpected header '" + line + "'");

  Manifest manifest;
  manifest.root = base_dir;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 5)
      throw Error(ErrorCode::invalid_manifest, "line " + std::to_string(line_no) + ": expected 5 fields");
    SampleRecord rec;
    rec.image_path = fs::path(fields[0]);
    rec.mask_path = fs::path(fields[1]);
    if (rec.image_path.is_relative()) rec.image_path = (base_dir / rec.image_path).lexically_normal();
    if (rec.mask_path.is_relative()) rec.mask_path = (base_dir / rec.mask_path).lexically_normal();
    rec.procedure_id = fields[2];
    rec.frame_id = fields[3];
    rec.split = parse_split(fields[4]);
    manifest.records.push_back(std::move(rec));
  }
  check_unique(manifest.records);
  return manifest;
}

Manifest read_manifest_csv(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read manifest " + file.string());
  return read_manifest_csv(in, fs::absolute(file).parent_path());
}

}  // namespace lapseg::dataset
