// SPDX-License-Identifier: Apache-2.0
#include "mdps/data.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "mdps/io.hpp"

namespace mdps {

namespace fs = std::filesystem;

void DatasetSpec::validate() const {
  if (root.empty()) throw std::invalid_argument("DatasetSpec: root is empty");
  if (category.empty()) throw std::invalid_argument("DatasetSpec: category is empty");
  if (resize < 1) throw std::invalid_argument("DatasetSpec: resize must be >= 1");
  if (center_crop && (*center_crop < 1 || *center_crop > resize)) {
    throw std::invalid_argument("DatasetSpec: need 1 <= center_crop <= resize");
  }
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

ImageTensor preprocess_image(const ImageTensor& img, int resize, std::optional<int> center_crop) {
  cv::Mat m(img.height, img.width, CV_32FC3);
  for (int y = 0; y < img.height; ++y) {
    cv::Vec3f* row = m.ptr<cv::Vec3f>(y);
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) row[x][c] = img.at(c, y, x);
    }
  }
  cv::Mat resized;
  cv::resize(m, resized, cv::Size(resize, resize), 0, 0, cv::INTER_LINEAR);
  if (center_crop) {
    const int crop = *center_crop;
    const int off = (resize - crop) / 2;
    resized = resized(cv::Rect(off, off, crop, crop)).clone();
  }
  ImageTensor out(3, resized.rows, resized.cols, ValueRange::Unit);
  for (int y = 0; y < resized.rows; ++y) {
    const cv::Vec3f* row = resized.ptr<cv::Vec3f>(y);
    for (int x = 0; x < resized.cols; ++x) {
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = std::clamp(row[x][c], 0.0f, 1.0f);
    }
  }
  return out;
}

MaskImage preprocess_mask(const MaskImage& mask, int resize, std::optional<int> center_crop) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y) {
    std::uint8_t* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width; ++x) row[x] = mask.at(y, x) ? 255 : 0;
  }
  cv::Mat resized;
  cv::resize(m, resized, cv::Size(resize, resize), 0, 0, cv::INTER_NEAREST);
  if (center_crop) {
    const int crop = *center_crop;
    const int off = (resize - crop) / 2;
    resized = resized(cv::Rect(off, off, crop, crop)).clone();
  }
  MaskImage out(resized.rows, resized.cols, 0);
  for (int y = 0; y < resized.rows; ++y) {
    const std::uint8_t* row = resized.ptr<std::uint8_t>(y);
    for (int x = 0; x < resized.cols; ++x) out.at(y, x) = row[x] > 127 ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// MVTec-layout loader
// ---------------------------------------------------------------------------

namespace {

std::vector<fs::path> sorted_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& de : fs::directory_iterator(dir)) {
    if (de.is_regular_file()) files.push_back(de.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.string() < b.string(); });
  return files;
}

std::vector<fs::path> sorted_dirs(const fs::path& dir) {
  std::vector<fs::path> dirs;
  for (const auto& de : fs::directory_iterator(dir)) {
    if (de.is_directory()) dirs.push_back(de.path());
  }
  std::sort(dirs.begin(), dirs.end(),
            [](const fs::path& a, const fs::path& b) { return a.string() < b.string(); });
  return dirs;
}

fs::path find_gt_mask(const fs::path& gt_dir, const std::string& stem) {
  if (fs::exists(gt_dir)) {
    for (const auto& de : fs::directory_iterator(gt_dir)) {
      if (de.is_regular_file() && de.path().stem().string() == stem + "_mask") return de.path();
    }
  }
  throw std::runtime_error("missing ground-truth mask " + (gt_dir / (stem + "_mask.*")).string());
}

}  // namespace

std::vector<LabeledSample> load_dataset(const DatasetSpec& spec) {
  spec.validate();
  const fs::path cat = fs::path(spec.root) / spec.category;
  if (!fs::exists(cat)) throw std::runtime_error("dataset category not found: " + cat.string());

  std::vector<LabeledSample> samples;
  auto load_one = [&](const fs::path& file, Label label, const MaskImage* raw_mask) {
    LabeledSample s;
    ImageTensor raw = read_image(file.string());
    s.image = preprocess_image(raw, spec.resize, spec.center_crop);
    s.label = label;
    if (raw_mask) {
      s.gt_mask = preprocess_mask(*raw_mask, spec.resize, spec.center_crop);
    } else {
      s.gt_mask = MaskImage::zeros(s.image.height, s.image.width);
    }
    s.image_id = fs::relative(file, cat).string();
    samples.push_back(std::move(s));
  };

  if (spec.split == Split::Train) {
    const fs::path good = cat / "train" / "good";
    if (!fs::exists(good)) throw std::runtime_error("missing layout directory: " + good.string());
    for (const auto& f : sorted_files(good)) load_one(f, Label::Normal, nullptr);
  } else {
    const fs::path test = cat / "test";
    if (!fs::exists(test)) throw std::runtime_error("missing layout directory: " + test.string());
    for (const auto& defect_dir : sorted_dirs(test)) {
      const std::string defect = defect_dir.filename().string();
      for (const auto& f : sorted_files(defect_dir)) {
        if (defect == "good") {
          load_one(f, Label::Normal, nullptr);
        } else {
          const fs::path gt = cat / "ground_truth" / defect;
          MaskImage raw_mask = read_mask(find_gt_mask(gt, f.stem().string()).string());
          load_one(f, Label::Anomalous, &raw_mask);
        }
      }
    }
  }
  return samples;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark
// ---------------------------------------------------------------------------

namespace {

ImageTensor make_normal_texture(Rng& rng, int size) {
  ImageTensor img(3, size, size, ValueRange::Unit);

  const double base[3] = {0.45 + 0.05 * rng.normal(), 0.40 + 0.05 * rng.normal(),
                          0.35 + 0.05 * rng.normal()};
  const double fx = 3.0 + 0.15 * rng.normal();
  const double fy = 1.5 + 0.15 * rng.normal();
  const double phase = 2.0 * M_PI * rng.uniform();
  const double amp = 0.12 * (1.0 + 0.1 * rng.normal());

  // low-resolution noise field, bilinearly upsampled: the smooth component
  const int g = 8;
  ScoreMap coarse(g, g);
  for (auto& v : coarse.data) v = static_cast<float>(rng.normal());
  ScoreMap smooth = resize_bilinear(coarse, size, size);

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double pattern =
          std::sin(2.0 * M_PI * (fx * x / size + fy * y / size) + phase);
      const double n = 0.05 * smooth.at(y, x);
      for (int c = 0; c < 3; ++c) {
        const double v = base[c] + amp * pattern + n;
        img.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

const char* kDefectNames[3] = {"patch", "scribble", "tint"};

void apply_defect(Rng& rng, int defect_type, ImageTensor& img, MaskImage& mask) {
  const int size = img.height;
  auto mark = [&](int y, int x, const double delta[3]) {
    if (y < 0 || y >= size || x < 0 || x >= size) return;
    mask.at(y, x) = 1;
    for (int c = 0; c < 3; ++c) {
      img.at(c, y, x) = static_cast<float>(
          std::clamp(static_cast<double>(img.at(c, y, x)) + delta[c], 0.0, 1.0));
    }
  };
  auto signed_delta = [&](double lo, double hi) {
    const double mag = lo + (hi - lo) * rng.uniform();
    return rng.uniform() < 0.5 ? -mag : mag;
  };

  switch (defect_type) {
    case 0: {  // rectangular patch with a strong color offset
      const int w = size / 8 + static_cast<int>(rng.uniform_int(0, size / 8));
      const int h = size / 8 + static_cast<int>(rng.uniform_int(0, size / 8));
      const int x0 = static_cast<int>(rng.uniform_int(0, size - w));
      const int y0 = static_cast<int>(rng.uniform_int(0, size - h));
      const double delta[3] = {signed_delta(0.25, 0.45), signed_delta(0.25, 0.45),
                               signed_delta(0.25, 0.45)};
      for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) mark(y, x, delta);
      }
      break;
    }
    case 1: {  // random-walk scribble, thickness 2
      double y = 4 + (size - 8) * rng.uniform();
      double x = 4 + (size - 8) * rng.uniform();
      double dir = 2.0 * M_PI * rng.uniform();
      const double delta[3] = {signed_delta(0.3, 0.5), signed_delta(0.3, 0.5),
                               signed_delta(0.3, 0.5)};
      const int steps = 3 * size;
      for (int i = 0; i < steps; ++i) {
        dir += 0.35 * rng.normal();
        y = std::clamp(y + std::sin(dir), 1.0, size - 2.0);
        x = std::clamp(x + std::cos(dir), 1.0, size - 2.0);
        const int iy = static_cast<int>(y), ix = static_cast<int>(x);
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) mark(iy + dy, ix + dx, delta);
        }
      }
      break;
    }
    default: {  // elliptical tint: channels pushed in opposite directions
      const double ry = size / 10.0 + (size / 10.0) * rng.uniform();
      const double rx = size / 10.0 + (size / 10.0) * rng.uniform();
      const double cy = ry + (size - 2 * ry) * rng.uniform();
      const double cx = rx + (size - 2 * rx) * rng.uniform();
      const double delta[3] = {0.3 + 0.1 * rng.uniform(), -0.2 - 0.1 * rng.uniform(),
                               signed_delta(0.15, 0.3)};
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double dy = (y - cy) / ry, dx = (x - cx) / rx;
          if (dy * dy + dx * dx <= 1.0) mark(y, x, delta);
        }
      }
      break;
    }
  }
}

}  // namespace

SyntheticDataset generate_synthetic(std::uint64_t seed, int n_train, int n_test_normal,
                                    int n_test_anomalous, int size) {
  if (n_train < 1 || n_test_normal < 0 || n_test_anomalous < 0) {
    throw std::invalid_argument("generate_synthetic: counts must be >= 1 train, >= 0 test");
  }
  if (size < 32) throw std::invalid_argument("generate_synthetic: size must be >= 32");

  Rng master(seed);
  SyntheticDataset data;
  char buf[64];

  for (int i = 0; i < n_train; ++i) {
    Rng r = master.split(1000 + static_cast<std::uint64_t>(i));
    LabeledSample s;
    s.image = make_normal_texture(r, size);
    s.label = Label::Normal;
    s.gt_mask = MaskImage::zeros(size, size);
    std::snprintf(buf, sizeof(buf), "train/good/%03d.png", i);
    s.image_id = buf;
    data.train.push_back(std::move(s));
  }
  for (int i = 0; i < n_test_normal; ++i) {
    Rng r = master.split(2000 + static_cast<std::uint64_t>(i));
    LabeledSample s;
    s.image = make_normal_texture(r, size);
    s.label = Label::Normal;
    s.gt_mask = MaskImage::zeros(size, size);
    std::snprintf(buf, sizeof(buf), "test/good/%03d.png", i);
    s.image_id = buf;
    data.test.push_back(std::move(s));
  }
  for (int i = 0; i < n_test_anomalous; ++i) {
    Rng r = master.split(3000 + static_cast<std::uint64_t>(i));
    LabeledSample s;
    s.image = make_normal_texture(r, size);
    s.gt_mask = MaskImage::zeros(size, size);
    const int defect_type = i % 3;
    apply_defect(r, defect_type, s.image, s.gt_mask);
    const std::size_t ones = s.gt_mask.count_ones();
    if (ones < 1 || ones > s.gt_mask.data.size() / 4) {
      throw std::logic_error("generate_synthetic: defect mask outside [1, 25%] contract");
    }
    s.label = Label::Anomalous;
    std::snprintf(buf, sizeof(buf), "test/%s/%03d.png", kDefectNames[defect_type], i);
    s.image_id = buf;
    data.test.push_back(std::move(s));
  }
  // loader ordering contract: lexicographic on relative path
  std::sort(data.test.begin(), data.test.end(),
            [](const LabeledSample& a, const LabeledSample& b) { return a.image_id < b.image_id; });
  return data;
}

void write_synthetic_layout(const SyntheticDataset& data, const std::string& root) {
  const fs::path cat = fs::path(root) / "synthetic";
  auto write_sample = [&](const LabeledSample& s) {
    const fs::path img_path = cat / s.image_id;
    fs::create_directories(img_path.parent_path());
    write_image_png(img_path.string(), s.image);
    if (s.label == Label::Anomalous) {
      // test/<defect>/NNN.png -> ground_truth/<defect>/NNN_mask.png
      const fs::path rel(s.image_id);
      const std::string defect = rel.parent_path().filename().string();
      const fs::path mask_path =
          cat / "ground_truth" / defect / (rel.stem().string() + "_mask.png");
      fs::create_directories(mask_path.parent_path());
      write_mask_png1(mask_path.string(), s.gt_mask);
    }
  };
  for (const auto& s : data.train) write_sample(s);
  for (const auto& s : data.test) write_sample(s);
}

}  // namespace mdps
