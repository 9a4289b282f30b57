#include "lapseg/dataset/augment.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "lapseg/error.hpp"
#include "lapseg/random.hpp"

namespace lapseg::dataset {

std::string_view to_string(AugOp op) {
  switch (op) {
    case AugOp::center_crop: return "center_crop";
    case AugOp::random_crop: return "random_crop";
    case AugOp::hflip: return "hflip";
    case AugOp::vflip: return "vflip";
    case AugOp::scale: return "scale";
    case AugOp::cutout: return "cutout";
    case AugOp::grayscale: return "grayscale";
  }
  return "?";
}

AugOp parse_aug_op(std::string_view text) {
  for (AugOp op : kAllAugOps)
    if (to_string(op) == text) return op;
  throw Error(ErrorCode::invalid_config, "unknown augmentation '" + std::string(text) + "'");
}

bool is_geometric(AugOp op) { return op != AugOp::grayscale; }

AugmentationConfig AugmentationConfig::all_ops(std::uint64_t seed) {
  AugmentationConfig c;
  c.enabled.insert(kAllAugOps.begin(), kAllAugOps.end());
  c.seed = seed;
  return c;
}

double AugmentationConfig::probability_of(AugOp op) const {
  if (!enabled.contains(op)) return 0.0;
  auto it = probability.find(op);
  return it == probability.end() ? default_probability : it->second;
}

void AugmentationConfig::validate() const {
  auto check_p = [](double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::invalid_config, "probabilities must lie in [0,1]");
  };
  check_p(default_probability);
  for (const auto& [op, p] : probability) check_p(p);
  auto check_range = [](std::pair<double, double> r, const char* name) {
    if (!(r.first > 0.0 && r.first <= r.second && r.second <= 1.5))
      throw Error(ErrorCode::invalid_config, std::string(name) + " must satisfy 0 < lo <= hi <= 1.5");
  };
  check_range(crop_fraction_range, "crop_fraction_range");
  check_range(scale_range, "scale_range");
  if (!(cutout_size_fraction > 0.0 && cutout_size_fraction <= 1.0))
    throw Error(ErrorCode::invalid_config, "cutout_size_fraction must lie in (0,1]");
  if (target_size.width <= 0 || target_size.height <= 0)
    throw Error(ErrorCode::invalid_config, "target size must be positive");
}

void to_json(nlohmann::json& j, const AugmentationConfig& c) {
  nlohmann::json ops = nlohmann::json::array();
  for (AugOp op : c.enabled) ops.push_back(to_string(op));
  nlohmann::json per_op = nlohmann::json::object();
  for (const auto& [op, p] : c.probability) per_op[std::string(to_string(op))] = p;
  j = {{"ops", ops},
       {"probability", c.default_probability},
       {"op_probability", per_op},
       {"crop_fraction", {c.crop_fraction_range.first, c.crop_fraction_range.second}},
       {"scale_range", {c.scale_range.first, c.scale_range.second}},
       {"cutout_fraction", c.cutout_size_fraction},
       {"seed", c.seed},
       {"image_interpolation", c.image_interpolation == Interpolation::nearest ? "nearest" : "bilinear"}};
}

void from_json(const nlohmann::json& j, AugmentationConfig& c) {
  try {
    if (j.contains("ops")) {
      c.enabled.clear();
      for (const auto& name : j["ops"]) c.enabled.insert(parse_aug_op(name.get<std::string>()));
    }
    c.default_probability = j.value("probability", c.default_probability);
    if (j.contains("op_probability"))
      for (const auto& [name, p] : j["op_probability"].items()) c.probability[parse_aug_op(name)] = p.get<double>();
    if (j.contains("crop_fraction")) c.crop_fraction_range = j["crop_fraction"].get<std::pair<double, double>>();
    if (j.contains("scale_range")) c.scale_range = j["scale_range"].get<std::pair<double, double>>();
    c.cutout_size_fraction = j.value("cutout_fraction", c.cutout_size_fraction);
    c.seed = j.value("seed", c.seed);
    if (j.contains("image_interpolation")) {
      const auto name = j["image_interpolation"].get<std::string>();
      if (name != "nearest" && name != "bilinear")
        throw Error(ErrorCode::invalid_config, "unknown interpolation '" + name + "'");
      c.image_interpolation = name == "nearest" ? Interpolation::nearest : Interpolation::bilinear;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_config, std::string("augmentation config: ") + e.what());
  }
}

bool AugmentationPlan::applies(AugOp op) const {
  switch (op) {
    case AugOp::center_crop: return center_crop.has_value();
    case AugOp::random_crop: return random_crop.has_value();
    case AugOp::hflip: return hflip;
    case AugOp::vflip: return vflip;
    case AugOp::scale: return scale.has_value();
    case AugOp::cutout: return cutout.has_value();
    case AugOp::grayscale: return grayscale;
  }
  return false;
}

bool AugmentationPlan::is_identity() const {
  return std::none_of(kAllAugOps.begin(), kAllAugOps.end(), [this](AugOp op) { return applies(op); });
}

namespace {

int scaled(double f, int n) { return std::max(1, int(std::lround(f * n))); }

Window crop_window(double fraction, int h, int w) {
  Window win{0, 0, scaled(fraction, h), scaled(fraction, w)};
  if (win.height > h || win.width > w)
    throw Error(ErrorCode::crop_larger_than_image,
                std::to_string(win.width) + "x" + std::to_string(win.height) + " window on " +
                    std::to_string(w) + "x" + std::to_string(h) + " image");
  return win;
}

}  // namespace

AugmentationPlan sample_plan(const AugmentationConfig& config, int height, int width,
                             std::uint64_t sample_index, std::uint64_t epoch) {
  Rng rng(derive_seed({config.seed, sample_index, epoch}));
  AugmentationPlan plan;
  int h = height, w = width;
  const auto [crop_lo, crop_hi] = config.crop_fraction_range;

  if (rng.bernoulli(config.probability_of(AugOp::center_crop))) {
    Window win = crop_window(rng.uniform(crop_lo, crop_hi), h, w);
    win.y = (h - win.height) / 2;
    win.x = (w - win.width) / 2;
    plan.center_crop = win;
    h = win.height;
    w = win.width;
  }
  if (rng.bernoulli(config.probability_of(AugOp::random_crop))) {
    Window win = crop_window(rng.uniform(crop_lo, crop_hi), h, w);
    win.y = int(rng.below(std::uint64_t(h - win.height + 1)));
    win.x = int(rng.below(std::uint64_t(w - win.width + 1)));
    plan.random_crop = win;
    h = win.height;
    w = win.width;
  }
  plan.hflip = rng.bernoulli(config.probability_of(AugOp::hflip));
  plan.vflip = rng.bernoulli(config.probability_of(AugOp::vflip));
  if (rng.bernoulli(config.probability_of(AugOp::scale)))
    plan.scale = rng.uniform(config.scale_range.first, config.scale_range.second);
  if (rng.bernoulli(config.probability_of(AugOp::cutout))) {
    const int ch = scaled(config.cutout_size_fraction, h);
    const int cw = scaled(config.cutout_size_fraction, w);
    const int cy = int(rng.below(std::uint64_t(h)));
    const int cx = int(rng.below(std::uint64_t(w)));
    const int y0 = std::max(0, cy - ch / 2), x0 = std::max(0, cx - cw / 2);
    const int y1 = std::min(h, cy - ch / 2 + ch), x1 = std::min(w, cx - cw / 2 + cw);
    plan.cutout = Window{y0, x0, y1 - y0, x1 - x0};
  }
  plan.grayscale = rng.bernoulli(config.probability_of(AugOp::grayscale));
  return plan;
}

ImageTensor crop(const ImageTensor& image, const Window& win) {
  if (win.y < 0 || win.x < 0 || win.y + win.height > image.height || win.x + win.width > image.width)
    throw Error(ErrorCode::crop_larger_than_image, "crop window outside image");
  ImageTensor out(win.height, win.width);
  for (int y = 0; y < win.height; ++y) {
    const float* src = &image.data[(std::size_t(win.y + y) * image.width + win.x) * 3];
    std::copy_n(src, std::size_t(win.width) * 3, &out.data[std::size_t(y) * win.width * 3]);
  }
  return out;
}

MaskTensor crop(const MaskTensor& mask, const Window& win) {
  if (win.y < 0 || win.x < 0 || win.y + win.height > mask.height || win.x + win.width > mask.width)
    throw Error(ErrorCode::crop_larger_than_image, "crop window outside mask");
  MaskTensor out(win.height, win.width);
  for (int y = 0; y < win.height; ++y) {
    const std::uint8_t* src = &mask.data[std::size_t(win.y + y) * mask.width + win.x];
    std::copy_n(src, win.width, &out.data[std::size_t(y) * win.width]);
  }
  return out;
}

ImageTensor flip(const ImageTensor& image, bool horizontal) {
  ImageTensor out(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const int sy = horizontal ? y : image.height - 1 - y;
      const int sx = horizontal ? image.width - 1 - x : x;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(sy, sx, c);
    }
  return out;
}

MaskTensor flip(const MaskTensor& mask, bool horizontal) {
  MaskTensor out(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      out.at(y, x) = horizontal ? mask.at(y, mask.width - 1 - x) : mask.at(mask.height - 1 - y, x);
  return out;
}

ImageTensor to_grayscale(const ImageTensor& image) {
  ImageTensor out(image.height, image.width);
  for (std::size_t i = 0; i < out.data.size(); i += 3) {
    const float luma = 0.299f * image.data[i] + 0.587f * image.data[i + 1] + 0.114f * image.data[i + 2];
    out.data[i] = out.data[i + 1] = out.data[i + 2] = std::clamp(luma, 0.0f, 1.0f);
  }
  return out;
}

namespace {

// Centre-crops or zero-pads `src` to h x w.
template <typename T>
T fit_to(const T& src, int h, int w) {
  if (src.height >= h && src.width >= w)
    return crop(src, Window{(src.height - h) / 2, (src.width - w) / 2, h, w});
  T out(h, w);
  // Integer division truncates toward zero, so this offset is the centring
  // shift for both the crop and the pad direction.
  const int dy = (src.height - h) / 2, dx = (src.width - w) / 2;
  for (int y = 0; y < h; ++y) {
    const int sy = y + dy;
    if (sy < 0 || sy >= src.height) continue;
    for (int x = 0; x < w; ++x) {
      const int sx = x + dx;
      if (sx < 0 || sx >= src.width) continue;
      if constexpr (std::is_same_v<T, ImageTensor>) {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(sy, sx, c);
      } else {
        out.at(y, x) = src.at(sy, sx);
      }
    }
  }
  return out;
}

}  // namespace

std::pair<ImageTensor, MaskTensor> apply_plan(const ImageTensor& image, const MaskTensor& mask,
                                              const AugmentationPlan& plan,
                                              std::optional<Size2> target,
                                              Interpolation image_interp) {
  if (image.height != mask.height || image.width != mask.width)
    throw Error(ErrorCode::dimension_mismatch, "image and mask sizes differ");
  ImageTensor img = image;
  MaskTensor msk = mask;

  if (plan.center_crop) {
    img = crop(img, *plan.center_crop);
    msk = crop(msk, *plan.center_crop);
  }
  if (plan.random_crop) {
    img = crop(img, *plan.random_crop);
    msk = crop(msk, *plan.random_crop);
  }
  if (plan.hflip) {
    img = flip(img, true);
    msk = flip(msk, true);
  }
  if (plan.vflip) {
    img = flip(img, false);
    msk = flip(msk, false);
  }
  if (plan.scale) {
    const int h = img.height, w = img.width;
    const Size2 scaled_size{scaled(*plan.scale, w), scaled(*plan.scale, h)};
    img = fit_to(resize(img, scaled_size, image_interp), h, w);
    msk = fit_to(resize(msk, scaled_size), h, w);
  }
  if (plan.cutout) {
    const Window& c = *plan.cutout;
    for (int y = c.y; y < std::min(img.height, c.y + c.height); ++y)
      for (int x = c.x; x < std::min(img.width, c.x + c.width); ++x) {
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = 0.0f;
        msk.at(y, x) = 0;
      }
  }
  if (plan.grayscale) img = to_grayscale(img);

  if (target) {
    img = resize(img, *target, image_interp);
    msk = resize(msk, *target);
  }
  return {std::move(img), std::move(msk)};
}

std::pair<ImageTensor, MaskTensor> augment(const ImageTensor& image, const MaskTensor& mask,
                                           const AugmentationConfig& config,
                                           std::uint64_t sample_index, std::uint64_t epoch) {
  if (image.height != mask.height || image.width != mask.width)
    throw Error(ErrorCode::dimension_mismatch, "image and mask sizes differ");
  const AugmentationPlan plan = sample_plan(config, image.height, image.width, sample_index, epoch);
  return apply_plan(image, mask, plan, config.target_size, config.image_interpolation);
}

}  // namespace lapseg::dataset
