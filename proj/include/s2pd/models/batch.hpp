#pragma once

#include <vector>

#include "s2pd/nd/tensor.hpp"
#include "s2pd/scene/dataset.hpp"
#include "s2pd/scene/image.hpp"

namespace s2pd::models {

/// Packs images into an NCHW f64 tensor, channels ordered R,G,B,D.
inline nd::Tensor batch_from_images(const std::vector<const scene::ImageRGBD*>& imgs) {
  if (imgs.empty()) throw nd::ShapeError("cannot build an empty batch");
  const int w = imgs[0]->width, h = imgs[0]->height;
  nd::Tensor t = nd::Tensor::zeros({static_cast<int>(imgs.size()), 4, h, w});
  double* dst = t.data.data();
  for (const auto* img : imgs) {
    if (img->width != w || img->height != h)
      throw nd::ShapeError("batch images have inconsistent dimensions");
    for (int c = 0; c < 4; ++c) {
      const auto& plane = img->plane(c);
      for (size_t i = 0; i < plane.size(); ++i) *dst++ = static_cast<double>(plane[i]);
    }
  }
  return t;
}

inline nd::Tensor batch_from_dataset(const scene::LabeledDataset& ds,
                                     const std::vector<size_t>& indices) {
  std::vector<const scene::ImageRGBD*> ptrs;
  ptrs.reserve(indices.size());
  for (size_t i : indices) ptrs.push_back(&ds.images[i]);
  return batch_from_images(ptrs);
}

inline nd::Tensor single_image_batch(const scene::ImageRGBD& img) {
  return batch_from_images({&img});
}

/// Unpacks decoder output back into images (values already in [0,1] via the
/// sigmoid output layer).
inline std::vector<scene::ImageRGBD> images_from_batch(const nd::Tensor& t,
                                                       float depth_scale_mm = 1000.0f) {
  if (t.shape.size() != 4 || t.shape[1] != 4)
    throw nd::ShapeError("expected [N,4,H,W] batch, got " + nd::shape_str(t.shape));
  const int N = t.shape[0], H = t.shape[2], W = t.shape[3];
  std::vector<scene::ImageRGBD> out;
  out.reserve(static_cast<size_t>(N));
  const double* src = t.data.data();
  for (int n = 0; n < N; ++n) {
    scene::ImageRGBD img = scene::ImageRGBD::create(W, H, depth_scale_mm);
    for (int c = 0; c < 4; ++c) {
      auto& plane = img.plane(c);
      for (size_t i = 0; i < plane.size(); ++i) plane[i] = static_cast<float>(*src++);
    }
    out.push_back(std::move(img));
  }
  return out;
}

/// Labels normalized to [0,1] over the placement region, the regressor's
/// output convention.
inline nd::Tensor labels_from_dataset(const scene::LabeledDataset& ds,
                                      const std::vector<size_t>& indices, double region_w_mm,
                                      double region_h_mm) {
  nd::Tensor t = nd::Tensor::zeros({static_cast<int>(indices.size()), 2});
  for (size_t row = 0; row < indices.size(); ++row) {
    t.data[row * 2 + 0] = ds.labels_mm[indices[row]][0] / region_w_mm;
    t.data[row * 2 + 1] = ds.labels_mm[indices[row]][1] / region_h_mm;
  }
  return t;
}

}  // namespace s2pd::models
