// Copyright 2026 The invrender Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "invrender/io.hpp"

#include "invrender/prior.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace invrender {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename to '" + path + "': " + ec.message());
}

// -----------------------------------------------------------------------------
// PFM

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

std::string next_token(const std::string& s, std::size_t& pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return s.substr(start, pos - start);
}

}  // namespace

PfmData read_pfm(const std::string& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  PfmData pfm;
  if (magic == "PF") {
    pfm.channels = 3;
  } else if (magic == "Pf") {
    pfm.channels = 1;
  } else {
    throw Error("'" + path + "' is not a PFM file");
  }
  try {
    pfm.width = std::stoi(next_token(bytes, pos));
    pfm.height = std::stoi(next_token(bytes, pos));
  } catch (const std::exception&) {
    throw Error("'" + path + "': malformed PFM header");
  }
  const std::string scale_tok = next_token(bytes, pos);
  double scale = 0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw Error("'" + path + "': malformed PFM scale");
  }
  if (pfm.width <= 0 || pfm.height <= 0 || scale == 0) {
    throw Error("'" + path + "': malformed PFM header");
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t n = static_cast<std::size_t>(pfm.width) * pfm.height * pfm.channels;
  if (bytes.size() < pos + 4 * n) throw Error("'" + path + "': truncated PFM");
  const bool file_little = scale < 0;
  const bool host_little = std::endian::native == std::endian::little;
  pfm.values.resize(n);
  const std::size_t row = static_cast<std::size_t>(pfm.width) * pfm.channels;
  for (int y = 0; y < pfm.height; ++y) {
    // PFM stores the bottom row first.
    const std::size_t src = pos + 4 * row * (pfm.height - 1 - y);
    for (std::size_t k = 0; k < row; ++k) {
      std::uint32_t u;
      std::memcpy(&u, bytes.data() + src + 4 * k, 4);
      if (file_little != host_little) u = byteswap32(u);
      std::memcpy(&pfm.values[y * row + k], &u, 4);
    }
  }
  return pfm;
}

void write_pfm(const std::string& path, const PfmData& pfm) {
  if (pfm.channels != 1 && pfm.channels != 3) throw Error("PFM: 1 or 3 channels");
  std::string out = (pfm.channels == 3 ? "PF\n" : "Pf\n") + std::to_string(pfm.width) +
                    " " + std::to_string(pfm.height) + "\n-1.0\n";
  const std::size_t row = static_cast<std::size_t>(pfm.width) * pfm.channels;
  const std::size_t header = out.size();
  out.resize(header + 4 * row * pfm.height);
  for (int y = 0; y < pfm.height; ++y) {
    const std::size_t dst = header + 4 * row * (pfm.height - 1 - y);
    for (std::size_t k = 0; k < row; ++k) {
      std::uint32_t u;
      std::memcpy(&u, &pfm.values[y * row + k], 4);
      if constexpr (std::endian::native != std::endian::little) u = byteswap32(u);
      std::memcpy(out.data() + dst + 4 * k, &u, 4);
    }
  }
  write_file_atomic(path, out);
}

Grid<Vec3> read_pfm_rgb(const std::string& path) {
  const PfmData p = read_pfm(path);
  if (p.channels != 3) throw Error("'" + path + "': expected a 3-channel PFM");
  Grid<Vec3> g(p.width, p.height);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = Vec3(p.values[3 * i], p.values[3 * i + 1], p.values[3 * i + 2]);
  }
  return g;
}

Grid<double> read_pfm_gray(const std::string& path) {
  const PfmData p = read_pfm(path);
  if (p.channels != 1) throw Error("'" + path + "': expected a 1-channel PFM");
  Grid<double> g(p.width, p.height);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = p.values[i];
  return g;
}

void write_pfm(const std::string& path, const Grid<Vec3>& img) {
  PfmData p{img.width(), img.height(), 3, std::vector<float>(3 * img.size())};
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) p.values[3 * i + c] = static_cast<float>(img[i][c]);
  }
  write_pfm(path, p);
}

void write_pfm(const std::string& path, const Grid<double>& img) {
  PfmData p{img.width(), img.height(), 1, std::vector<float>(img.size())};
  for (std::size_t i = 0; i < img.size(); ++i) p.values[i] = static_cast<float>(img[i]);
  write_pfm(path, p);
}

void write_normals_pfm(const std::string& path, const NormalMap& normals) {
  Grid<Vec3> g(normals.width(), normals.height(), Vec3::Zero());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (normals.valid[i]) g[i] = normals.normals[i];
  }
  write_pfm(path, g);
}

NormalMap read_normals_pfm(const std::string& path) {
  const Grid<Vec3> g = read_pfm_rgb(path);
  NormalMap out(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec3& n = g[i];
    const double len = n.norm();
    // Stored as float: renormalize to the double-precision unit sphere.
    if (n.allFinite() && std::abs(len - 1.0) < 1e-4 && n.z() > 0) {
      out.normals[i] = n / len;
      out.valid[i] = 1;
    }
  }
  return out;
}

// -----------------------------------------------------------------------------
// PNG

std::uint8_t quantize8(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

namespace {

std::vector<std::uint8_t> read_png_raw(const std::string& path, int format, int& w,
                                       int& h) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error("cannot read PNG '" + path + "': " + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error("cannot decode PNG '" + path + "': " + image.message);
  }
  w = static_cast<int>(image.width);
  h = static_cast<int>(image.height);
  return buf;
}

void write_png_raw(const std::string& path, int format, int w, int h,
                   const std::vector<std::uint8_t>& buf) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, buf.data(), 0, nullptr)) {
    throw Error("cannot encode PNG: " + std::string(image.message));
  }
  std::string bytes(size, '\0');
  if (!png_image_write_to_memory(&image, bytes.data(), &size, 0, buf.data(), 0,
                                 nullptr)) {
    throw Error("cannot encode PNG: " + std::string(image.message));
  }
  bytes.resize(size);
  write_file_atomic(path, bytes);
}

}  // namespace

ImageRGB read_png(const std::string& path) {
  int w = 0;
  int h = 0;
  const auto buf = read_png_raw(path, PNG_FORMAT_RGB, w, h);
  Grid<Vec3> g(w, h);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = Vec3(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]) / 255.0;
  }
  return make_gamma_image(std::move(g));
}

void write_png(const std::string& path, const ImageRGB& img) {
  const ImageRGB enc = img.encoding == Encoding::linear ? encode_gamma(img) : img;
  std::vector<std::uint8_t> buf(3 * enc.pixels.size());
  for (std::size_t i = 0; i < enc.pixels.size(); ++i) {
    for (int c = 0; c < 3; ++c) buf[3 * i + c] = quantize8(enc.pixels[i][c]);
  }
  write_png_raw(path, PNG_FORMAT_RGB, enc.width(), enc.height(), buf);
}

Mask read_mask_png(const std::string& path) {
  int w = 0;
  int h = 0;
  const auto buf = read_png_raw(path, PNG_FORMAT_GRAY, w, h);
  Mask m(w, h, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = buf[i] >= 128;
  return m;
}

void write_mask_png(const std::string& path, const Mask& mask) {
  std::vector<std::uint8_t> buf(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) buf[i] = mask[i] ? 255 : 0;
  write_png_raw(path, PNG_FORMAT_GRAY, mask.width(), mask.height(), buf);
}

// -----------------------------------------------------------------------------
// JSON

namespace {

std::vector<double> numbers(const nlohmann::json& j, const char* key, std::size_t n) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != n) {
    throw Error(std::string("json: '") + key + "' must be an array of " +
                std::to_string(n) + " numbers");
  }
  std::vector<double> v;
  for (const auto& e : j[key]) {
    if (!e.is_number()) throw Error(std::string("json: '") + key + "' has a non-number");
    v.push_back(e.get<double>());
  }
  return v;
}

double number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw Error(std::string("json: missing number '") + key + "'");
  }
  return j[key].get<double>();
}

}  // namespace

nlohmann::json to_json(const Camera& cam) {
  nlohmann::json j;
  j["f"] = cam.f;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  std::vector<double> R;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) R.push_back(cam.R(r, c));
  }
  j["R"] = R;
  j["t"] = {cam.t.x(), cam.t.y(), cam.t.z()};
  return j;
}

Camera camera_from_json(const nlohmann::json& j) {
  Camera cam;
  cam.f = number(j, "f");
  cam.cx = number(j, "cx");
  cam.cy = number(j, "cy");
  const auto R = numbers(j, "R", 9);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) cam.R(r, c) = R[3 * r + c];
  }
  const auto t = numbers(j, "t", 3);
  cam.t = Vec3(t[0], t[1], t[2]);
  cam.validate();
  return cam;
}

nlohmann::json to_json(const SHLighting& l) {
  nlohmann::json j;
  j["layout"] = "channel-major-order2";
  j["l"] = std::vector<double>(l.l.data(), l.l.data() + 27);
  return j;
}

SHLighting lighting_from_json(const nlohmann::json& j) {
  if (!j.contains("layout") || j["layout"] != "channel-major-order2") {
    throw Error("lighting json: expected layout 'channel-major-order2'");
  }
  const auto v = numbers(j, "l", 27);
  SHLighting l;
  for (int i = 0; i < 27; ++i) l.l[i] = v[i];
  if (!l.l.allFinite()) throw Error("lighting json: non-finite coefficient");
  return l;
}

nlohmann::json to_json(const PriorModel& prior) {
  nlohmann::json j;
  const int D = prior.dim();
  j["D"] = D;
  j["mean"] = std::vector<double>(prior.mean().data(), prior.mean().data() + 27);
  j["sigma"] = std::vector<double>(prior.sigma().data(), prior.sigma().data() + D);
  std::vector<double> Q;
  for (int r = 0; r < 27; ++r) {
    for (int c = 0; c < D; ++c) Q.push_back(prior.basis()(r, c));
  }
  j["Q"] = Q;
  return j;
}

PriorModel prior_from_json(const nlohmann::json& j) {
  if (!j.contains("D") || !j["D"].is_number_integer()) throw Error("prior json: missing D");
  const int D = j["D"].get<int>();
  if (D < 1 || D > 27) throw Error("prior json: D out of range");
  const auto mean = numbers(j, "mean", 27);
  const auto sigma = numbers(j, "sigma", D);
  const auto Q = numbers(j, "Q", 27 * static_cast<std::size_t>(D));
  SHVector m;
  for (int i = 0; i < 27; ++i) m[i] = mean[i];
  Eigen::MatrixXd q(27, D);
  for (int r = 0; r < 27; ++r) {
    for (int c = 0; c < D; ++c) q(r, c) = Q[r * D + c];
  }
  Eigen::VectorXd s(D);
  for (int i = 0; i < D; ++i) s[i] = sigma[i];
  return PriorModel(m, std::move(q), std::move(s));
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("'" + path + "': " + e.what());
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace invrender
