#include "rgbd/imagery.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace rgbd {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw DataError(msg);
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw DataError(msg);
}

// PNM header token reader; skips whitespace and '#' comments.
int read_pnm_int(std::istream& in, const std::string& path) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  require(c != EOF && std::isdigit(c), path + ": malformed header");
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    require(v <= std::numeric_limits<int>::max(), path + ": header value overflow");
    c = in.get();
  }
  return static_cast<int>(v);
}

struct PnmHeader {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
};

PnmHeader read_pnm_header(std::istream& in, const std::string& path) {
  PnmHeader h;
  char m[2];
  in.read(m, 2);
  require(in.good(), path + ": malformed header");
  h.magic.assign(m, 2);
  h.width = read_pnm_int(in, path);
  h.height = read_pnm_int(in, path);
  h.maxval = read_pnm_int(in, path);
  require(h.width > 0 && h.height > 0, path + ": non-positive dimensions");
  // Exactly one whitespace byte separates maxval from the payload.
  return h;
}

void write_u32_le(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32_le(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(in.good(), path + ": truncated header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

std::string mask_sidecar_path(const std::string& path) { return path + ".mask.pgm"; }

}  // namespace

DepthMap DepthMap::create(int w, int h) {
  require(w > 0 && h > 0, "DepthMap: dimensions must be positive");
  DepthMap d;
  d.width = w;
  d.height = h;
  d.values.assign(static_cast<size_t>(w) * h, 0.0);
  d.valid.assign(static_cast<size_t>(w) * h, 0);
  return d;
}

void DepthMap::validate() const {
  require(width > 0 && height > 0, "DepthMap: dimensions must be positive");
  require(values.size() == pixel_count() && valid.size() == pixel_count(),
          "DepthMap: array length mismatch");
  for (size_t i = 0; i < values.size(); ++i) {
    if (valid[i]) {
      require(std::isfinite(values[i]) && values[i] > 0,
              "DepthMap: valid pixel with non-positive or non-finite depth");
    }
  }
}

ColorImage ColorImage::create(int w, int h) {
  require(w > 0 && h > 0, "ColorImage: dimensions must be positive");
  ColorImage c;
  c.width = w;
  c.height = h;
  c.rgb.assign(static_cast<size_t>(w) * h * 3, 0);
  return c;
}

void ColorImage::validate() const {
  require(width > 0 && height > 0, "ColorImage: dimensions must be positive");
  require(rgb.size() == static_cast<size_t>(width) * height * 3,
          "ColorImage: array length mismatch");
}

size_t PropertyMap::valid_count() const {
  size_t n = 0;
  for (uint8_t v : valid) n += (v != 0);
  return n;
}

PropertyMap PropertyMap::create(int w, int h, MapKind kind) {
  require(w > 0 && h > 0, "PropertyMap: dimensions must be positive");
  PropertyMap m;
  m.width = w;
  m.height = h;
  m.kind = kind;
  m.values.assign(static_cast<size_t>(w) * h, 0.0);
  m.valid.assign(static_cast<size_t>(w) * h, 0);
  return m;
}

void PropertyMap::validate() const {
  require(width > 0 && height > 0, "PropertyMap: dimensions must be positive");
  require(values.size() == pixel_count() && valid.size() == pixel_count(),
          "PropertyMap: array length mismatch");
  for (size_t i = 0; i < values.size(); ++i) {
    if (!valid[i]) continue;
    double v = values[i];
    require(std::isfinite(v), "PropertyMap: non-finite value on valid pixel");
    switch (kind) {
      case MapKind::Angle:
        require(v >= 0.0 && v <= 180.0, "PropertyMap: angle out of [0, 180]");
        break;
      case MapKind::Height:
        require(v >= 0.0, "PropertyMap: negative height");
        break;
      case MapKind::Contour:
        require(v >= 0.0 && v <= 1.0, "PropertyMap: contour out of [0, 1]");
        break;
      default:
        break;
    }
  }
}

ByteMap ByteMap::create(int w, int h, int channels) {
  require(w > 0 && h > 0, "ByteMap: dimensions must be positive");
  require(channels == 1 || channels == 3, "ByteMap: channels must be 1 or 3");
  ByteMap b;
  b.width = w;
  b.height = h;
  b.channels = channels;
  b.values.assign(static_cast<size_t>(w) * h * channels, 0);
  return b;
}

DepthMap load_depth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), path + ": cannot open");
  PnmHeader h = read_pnm_header(in, path);
  require(h.magic == "P5", path + ": expected binary P5 graymap");
  require(h.maxval == 65535, path + ": unsupported maxval (need 65535)");
  DepthMap d = DepthMap::create(h.width, h.height);
  std::vector<unsigned char> buf(d.pixel_count() * 2);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  require(in.gcount() == static_cast<std::streamsize>(buf.size()), path + ": truncated payload");
  for (size_t i = 0; i < d.pixel_count(); ++i) {
    // 16-bit PGM stores the most significant byte first.
    unsigned mm = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
    if (mm == 0) continue;  // sensor returned no reading
    d.values[i] = mm / 1000.0;
    d.valid[i] = 1;
  }
  return d;
}

void save_depth(const DepthMap& d, const std::string& path) {
  d.validate();
  std::ofstream out(path, std::ios::binary);
  require(out.good(), path + ": cannot open for writing");
  out << "P5\n" << d.width << " " << d.height << "\n65535\n";
  std::vector<unsigned char> buf(d.pixel_count() * 2);
  for (size_t i = 0; i < d.pixel_count(); ++i) {
    unsigned mm = 0;
    if (d.valid[i]) {
      long v = std::lround(d.values[i] * 1000.0);
      if (v < 1) v = 1;  // keep valid pixels distinguishable from the 0 sentinel
      if (v > 65535) v = 65535;
      mm = static_cast<unsigned>(v);
    }
    buf[2 * i] = static_cast<unsigned char>(mm >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(mm & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  require(out.good(), path + ": write failed");
}

ColorImage load_color(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), path + ": cannot open");
  PnmHeader h = read_pnm_header(in, path);
  require(h.magic == "P6", path + ": expected binary P6 pixmap");
  require(h.maxval == 255, path + ": unsupported maxval (need 255)");
  ColorImage c = ColorImage::create(h.width, h.height);
  in.read(reinterpret_cast<char*>(c.rgb.data()), static_cast<std::streamsize>(c.rgb.size()));
  require(in.gcount() == static_cast<std::streamsize>(c.rgb.size()), path + ": truncated payload");
  return c;
}

void save_color(const ColorImage& c, const std::string& path) {
  c.validate();
  std::ofstream out(path, std::ios::binary);
  require(out.good(), path + ": cannot open for writing");
  out << "P6\n" << c.width << " " << c.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(c.rgb.data()), static_cast<std::streamsize>(c.rgb.size()));
  require(out.good(), path + ": write failed");
}

ByteMap load_bytemap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), path + ": cannot open");
  PnmHeader h = read_pnm_header(in, path);
  require(h.magic == "P5" || h.magic == "P6", path + ": expected P5 or P6");
  require(h.maxval == 255, path + ": unsupported maxval (need 255)");
  ByteMap b = ByteMap::create(h.width, h.height, h.magic == "P5" ? 1 : 3);
  in.read(reinterpret_cast<char*>(b.values.data()), static_cast<std::streamsize>(b.values.size()));
  require(in.gcount() == static_cast<std::streamsize>(b.values.size()), path + ": truncated payload");
  return b;
}

void save_bytemap(const ByteMap& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), path + ": cannot open for writing");
  out << (b.channels == 1 ? "P5" : "P6") << "\n" << b.width << " " << b.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(b.values.data()), static_cast<std::streamsize>(b.values.size()));
  require(out.good(), path + ": write failed");
}

PropertyMap load_property_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), path + ": cannot open");
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, "PMAP", 4) == 0, path + ": bad magic");
  uint32_t w = read_u32_le(in, path);
  uint32_t h = read_u32_le(in, path);
  uint32_t kind = read_u32_le(in, path);
  require(w > 0 && h > 0, path + ": non-positive dimensions");
  require(kind <= static_cast<uint32_t>(MapKind::Other), path + ": unknown map kind");
  PropertyMap m = PropertyMap::create(static_cast<int>(w), static_cast<int>(h),
                                      static_cast<MapKind>(kind));
  std::vector<float> buf(m.pixel_count());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  require(in.gcount() == static_cast<std::streamsize>(buf.size() * sizeof(float)),
          path + ": truncated payload");
  for (size_t i = 0; i < buf.size(); ++i) m.values[i] = buf[i];

  ByteMap mask = load_bytemap(mask_sidecar_path(path));
  require(mask.width == m.width && mask.height == m.height && mask.channels == 1,
          path + ": validity mask sidecar mismatch");
  for (size_t i = 0; i < m.pixel_count(); ++i) m.valid[i] = mask.values[i] ? 1 : 0;
  m.validate();
  return m;
}

void save_property_map(const PropertyMap& m, const std::string& path) {
  m.validate();
  std::ofstream out(path, std::ios::binary);
  require(out.good(), path + ": cannot open for writing");
  out.write("PMAP", 4);
  write_u32_le(out, static_cast<uint32_t>(m.width));
  write_u32_le(out, static_cast<uint32_t>(m.height));
  write_u32_le(out, static_cast<uint32_t>(m.kind));
  std::vector<float> buf(m.pixel_count());
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(m.values[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  require(out.good(), path + ": write failed");

  ByteMap mask = ByteMap::create(m.width, m.height, 1);
  for (size_t i = 0; i < m.pixel_count(); ++i) mask.values[i] = m.valid[i] ? 255 : 0;
  save_bytemap(mask, mask_sidecar_path(path));
}

ByteMap scale_to_bytes(const PropertyMap& map, std::optional<ScaleRange> range, Exec exec) {
  map.validate();
  double lo, hi;
  if (range) {
    lo = range->lo;
    hi = range->hi;
    require(hi >= lo, "scale_to_bytes: explicit range with hi < lo");
  } else {
    lo = std::numeric_limits<double>::infinity();
    hi = -std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) reduction(min : lo) reduction(max : hi) if (exec == Exec::Parallel)
    for (int y = 0; y < map.height; ++y) {
      for (int x = 0; x < map.width; ++x) {
        size_t i = map.idx(x, y);
        if (!map.valid[i]) continue;
        lo = std::min(lo, map.values[i]);
        hi = std::max(hi, map.values[i]);
      }
    }
    // An empty mask leaves lo above hi (reduction identities included).
    require(lo <= hi, "scale_to_bytes: no valid pixels");
  }

  ByteMap out = ByteMap::create(map.width, map.height, 1);
  const bool degenerate = !(hi > lo);
  const double scale = degenerate ? 0.0 : 255.0 / (hi - lo);
  for_each_row(map.height, exec, [&](int y) {
    for (int x = 0; x < map.width; ++x) {
      size_t i = map.idx(x, y);
      if (!map.valid[i]) {
        out.values[i] = 0;
        continue;
      }
      if (degenerate) {
        out.values[i] = 128;  // constant map carries no ordering information
        continue;
      }
      double v = std::clamp(map.values[i], lo, hi);
      out.values[i] = static_cast<uint8_t>(std::lround((v - lo) * scale));
    }
  });
  return out;
}

ByteMap replicate_channels(const ByteMap& b) {
  require(b.channels == 1, "replicate_channels: input already has 3 channels");
  ByteMap out = ByteMap::create(b.width, b.height, 3);
  for (size_t i = 0; i < b.values.size(); ++i) {
    out.values[3 * i] = b.values[i];
    out.values[3 * i + 1] = b.values[i];
    out.values[3 * i + 2] = b.values[i];
  }
  return out;
}

}  // namespace rgbd
