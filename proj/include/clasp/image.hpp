/* Copyright 2026 The clasp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef CLASP_IMAGE_HPP_
#define CLASP_IMAGE_HPP_

#include <cstdint>
#include <string>

#include "clasp/tensor.hpp"

// Small image toolkit. RGB frames are Tensor<uint8_t> in [H, W, 3] layout;
// grayscale images are Tensor<float> in [H, W]; binary masks are
// Tensor<uint8_t> in [H, W] with values 0/1.
namespace clasp::img {

// Luma conversion, output in [0, 1].
Tensor<float> to_gray(const Tensor<uint8_t>& rgb);

// Gradient magnitude with 3x3 Sobel stencils, replicated borders.
Tensor<float> sobel_magnitude(const Tensor<float>& gray);

// Otsu threshold over a 256-bin histogram of the image's value range.
float otsu_threshold(const Tensor<float>& img);

Tensor<uint8_t> binarize(const Tensor<float>& img, float threshold);

// 3x3 morphology; pixels outside the image count as 0.
Tensor<uint8_t> erode3(const Tensor<uint8_t>& mask);
Tensor<uint8_t> dilate3(const Tensor<uint8_t>& mask);
inline Tensor<uint8_t> open3(const Tensor<uint8_t>& mask) { return dilate3(erode3(mask)); }

// Bilinear resize of an RGB frame.
Tensor<uint8_t> resize_bilinear(const Tensor<uint8_t>& rgb, int out_h, int out_w);

// 8-bit RGB PNG (one zlib-compressed IDAT, no filtering).
void write_png(const std::string& path, const Tensor<uint8_t>& rgb);

// Binary PPM (P6, maxval 255).
Tensor<uint8_t> read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor<uint8_t>& rgb);

}  // namespace clasp::img

#endif  // CLASP_IMAGE_HPP_
