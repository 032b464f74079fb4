#include "thinstruct/io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "thinstruct/error.hpp"

namespace thinstruct::io {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

// Header tokenizer for PNM files: skips whitespace and # comments.
struct PnmScanner {
  const std::string& s;
  std::size_t pos = 0;

  void skip() {
    while (pos < s.size()) {
      if (std::isspace(static_cast<unsigned char>(s[pos]))) {
        ++pos;
      } else if (s[pos] == '#') {
        while (pos < s.size() && s[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  }
  long number(const std::string& what) {
    skip();
    if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos])))
      throw InputError("PGM: expected " + what);
    long v = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      v = v * 10 + (s[pos++] - '0');
      if (v > 1'000'000'000L) throw InputError("PGM: " + what + " too large");
    }
    return v;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_size(const std::vector<double>& values, int width, int height) {
  if (width < 1 || height < 1 || values.size() != static_cast<std::size_t>(width) * height)
    throw InputError("raster size does not match dimensions");
}

float load_f32_le(const unsigned char* p) {
  std::uint32_t u = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
                    std::uint32_t(p[3]) << 24;
  return std::bit_cast<float>(u);
}

void store_f32_le(std::string& out, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((u >> (8 * k)) & 0xFF));
}

const char* const kVfieldMagic = "TSVFIELD";

}  // namespace

Pgm read_pgm(const std::string& path) {
  const std::string s = read_file(path);
  if (s.size() < 2 || s[0] != 'P' || (s[1] != '2' && s[1] != '5')) throw InputError(path + ": not a P2/P5 PGM file");
  const bool binary = s[1] == '5';
  PnmScanner sc{s, 2};
  Pgm pgm;
  const long w = sc.number("width"), h = sc.number("height"), maxval = sc.number("maxval");
  if (w < 1 || h < 1 || w * h > 400'000'000L) throw InputError(path + ": invalid PGM dimensions");
  if (maxval < 1 || maxval > 65535) throw InputError(path + ": invalid PGM maxval");
  pgm.width = static_cast<int>(w);
  pgm.height = static_cast<int>(h);
  pgm.maxval = static_cast<int>(maxval);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  pgm.data.resize(n);
  if (binary) {
    if (sc.pos >= s.size() || !std::isspace(static_cast<unsigned char>(s[sc.pos])))
      throw InputError(path + ": malformed PGM header");
    std::size_t pos = sc.pos + 1;
    const std::size_t bytes = maxval < 256 ? 1 : 2;
    if (s.size() - pos < n * bytes) throw InputError(path + ": truncated PGM data");
    const auto* p = reinterpret_cast<const unsigned char*>(s.data() + pos);
    for (std::size_t k = 0; k < n; ++k)
      pgm.data[k] = bytes == 1 ? p[k] : static_cast<std::uint16_t>(p[2 * k] << 8 | p[2 * k + 1]);
  } else {
    for (std::size_t k = 0; k < n; ++k) pgm.data[k] = static_cast<std::uint16_t>(std::min(sc.number("sample"), 65535L));
  }
  for (auto v : pgm.data)
    if (v > maxval) throw InputError(path + ": PGM sample exceeds maxval");
  return pgm;
}

void write_pgm(const std::string& path, const Pgm& pgm) {
  if (pgm.data.size() != static_cast<std::size_t>(pgm.width) * pgm.height) throw InputError("PGM size mismatch");
  auto out = open_out(path);
  out << "P5\n" << pgm.width << ' ' << pgm.height << '\n' << pgm.maxval << '\n';
  std::string buf;
  buf.reserve(pgm.data.size() * 2);
  for (auto v : pgm.data) {
    if (pgm.maxval >= 256) buf.push_back(static_cast<char>(v >> 8));
    buf.push_back(static_cast<char>(v & 0xFF));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw InputError("failed writing " + path);
}

void write_pgm_ascii(const std::string& path, const Pgm& pgm) {
  if (pgm.data.size() != static_cast<std::size_t>(pgm.width) * pgm.height) throw InputError("PGM size mismatch");
  auto out = open_out(path);
  out << "P2\n" << pgm.width << ' ' << pgm.height << '\n' << pgm.maxval << '\n';
  for (int y = 0; y < pgm.height; ++y) {
    for (int x = 0; x < pgm.width; ++x) out << (x ? " " : "") << pgm.data[static_cast<std::size_t>(y) * pgm.width + x];
    out << '\n';
  }
}

GrayImage to_image(const Pgm& pgm) {
  GrayImage img;
  img.width = pgm.width;
  img.height = pgm.height;
  img.pixels.assign(pgm.data.begin(), pgm.data.end());
  return img;
}

GrayImage read_image(const std::string& path) { return to_image(read_pgm(path)); }

void write_image(const std::string& path, const GrayImage& image) {
  check_size(image.pixels, image.width, image.height);
  Pgm pgm{image.width, image.height, 255, {}};
  pgm.data.reserve(image.pixels.size());
  for (double v : image.pixels) pgm.data.push_back(static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 255.0)));
  write_pgm(path, pgm);
}

void write_probability_mask(const std::string& path, const std::vector<double>& values, int width, int height) {
  check_size(values, width, height);
  Pgm pgm{width, height, 65535, {}};
  pgm.data.reserve(values.size());
  for (double q : values) pgm.data.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(q, 0.0, 1.0) * 65535.0)));
  write_pgm(path, pgm);
}

std::vector<double> read_probability_mask(const std::string& path, int* width, int* height) {
  const Pgm pgm = read_pgm(path);
  if (width) *width = pgm.width;
  if (height) *height = pgm.height;
  std::vector<double> v(pgm.data.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(pgm.data[k]) / pgm.maxval;
  return v;
}

void write_binary_mask(const std::string& path, const std::vector<std::uint8_t>& mask, int width, int height) {
  if (width < 1 || height < 1 || mask.size() != static_cast<std::size_t>(width) * height)
    throw InputError("mask size does not match dimensions");
  Pgm pgm{width, height, 255, {}};
  for (auto b : mask) pgm.data.push_back(b ? 255 : 0);
  write_pgm(path, pgm);
}

void write_tangents_csv_2d(const std::string& path, const SiteSet& sites, const Tangents& L,
                           const std::vector<double>& Q) {
  if (L.size() != sites.size() || Q.size() != sites.size()) throw InputError("tangent/site count mismatch");
  std::string s = "id,x,y,px,py,dx,dy,q\n";
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const Vec3& o = sites.positions[i];
    const Vec3 p = project_onto_line(L[i], o);
    const Vec3& d = L[i].direction;
    s += std::to_string(i) + ',' + fmt(o.x()) + ',' + fmt(o.y()) + ',' + fmt(p.x()) + ',' + fmt(p.y()) + ',' +
         fmt(d.x()) + ',' + fmt(d.y()) + ',' + fmt(Q[i]) + '\n';
  }
  write_text(path, s);
}

void write_tangents_csv_3d(const std::string& path, const SiteSet& sites, const Tangents& L,
                           const std::vector<double>& Q) {
  if (L.size() != sites.size() || Q.size() != sites.size()) throw InputError("tangent/site count mismatch");
  std::string s = "id,x,y,z,dx,dy,dz,q\n";
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const Vec3 p = project_onto_line(L[i], sites.positions[i]);
    const Vec3& d = L[i].direction;
    s += std::to_string(i) + ',' + fmt(p.x()) + ',' + fmt(p.y()) + ',' + fmt(p.z()) + ',' + fmt(d.x()) + ',' +
         fmt(d.y()) + ',' + fmt(d.z()) + ',' + fmt(Q[i]) + '\n';
  }
  write_text(path, s);
}

Table read_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  Table t;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    std::vector<double> row;
    bool numeric = true;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      while (end && *end && std::isspace(static_cast<unsigned char>(*end))) ++end;
      if (c.empty() || end == c.c_str() || (end && *end)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (!first) throw InputError(path + ": non-numeric value on line " + std::to_string(lineno));
      t.header = cells;
    } else {
      if (!t.rows.empty() && row.size() != t.rows.front().size())
        throw InputError(path + ": inconsistent column count on line " + std::to_string(lineno));
      t.rows.push_back(std::move(row));
    }
    first = false;
  }
  return t;
}

std::vector<Vec3> read_points_csv(const std::string& path, int* dim) {
  const Table t = read_csv(path);
  if (t.rows.empty()) throw InputError(path + ": no points");
  const std::size_t cols = t.rows.front().size();
  if (cols != 2 && cols != 3) throw InputError(path + ": expected 2 or 3 columns");
  std::vector<Vec3> pts;
  for (const auto& r : t.rows) pts.emplace_back(r[0], r[1], cols == 3 ? r[2] : 0.0);
  if (dim) *dim = static_cast<int>(cols);
  return pts;
}

void write_points_csv(const std::string& path, const std::vector<Vec3>& points, int dim) {
  std::string s = dim == 3 ? "x,y,z\n" : "x,y\n";
  for (const auto& p : points) {
    s += fmt(p.x()) + ',' + fmt(p.y());
    if (dim == 3) s += ',' + fmt(p.z());
    s += '\n';
  }
  write_text(path, s);
}

void write_curve_truth_csv(const std::string& path, const std::vector<Vec3>& points, const std::vector<Vec3>& tangents,
                           int dim) {
  if (points.size() != tangents.size()) throw InputError("truth point/tangent count mismatch");
  std::string s = dim == 3 ? "x,y,z,tx,ty,tz\n" : "x,y,tx,ty\n";
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Vec3 &p = points[k], &t = tangents[k];
    s += fmt(p.x()) + ',' + fmt(p.y()) + (dim == 3 ? ',' + fmt(p.z()) : std::string()) + ',' + fmt(t.x()) + ',' +
         fmt(t.y()) + (dim == 3 ? ',' + fmt(t.z()) : std::string()) + '\n';
  }
  write_text(path, s);
}

VesselField read_vfield(const std::string& path) {
  const std::string s = read_file(path);
  const std::size_t mlen = std::strlen(kVfieldMagic);
  if (s.size() < mlen + 4 || s.compare(0, mlen, kVfieldMagic) != 0) throw InputError(path + ": not a vfield file");
  const auto* b = reinterpret_cast<const unsigned char*>(s.data());
  const std::uint32_t hlen = std::uint32_t(b[mlen]) | std::uint32_t(b[mlen + 1]) << 8 |
                             std::uint32_t(b[mlen + 2]) << 16 | std::uint32_t(b[mlen + 3]) << 24;
  const std::size_t start = mlen + 4;
  if (s.size() - start < hlen) throw InputError(path + ": truncated vfield header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(s.substr(start, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": bad vfield header: " + e.what());
  }
  VesselField f;
  std::vector<std::string> fields;
  try {
    const auto dims = h.at("dims");
    if (!dims.is_array() || dims.size() != 3) throw InputError(path + ": dims must have 3 entries");
    f.nx = dims[0].get<int>();
    f.ny = dims[1].get<int>();
    f.nz = dims[2].get<int>();
    if (h.value("dtype", std::string("f32")) != "f32") throw InputError(path + ": only f32 data is supported");
    fields = h.at("fields").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": bad vfield header: " + e.what());
  }
  if (f.nx < 1 || f.ny < 1 || f.nz < 1) throw InputError(path + ": dims must be positive");
  const std::size_t n = f.voxel_count();
  const std::size_t data = start + hlen;
  if (s.size() - data != fields.size() * n * 4)
    throw InputError(path + ": data size does not match header dims");
  for (std::size_t k = 0; k < fields.size(); ++k) {
    std::vector<float>* plane = nullptr;
    if (fields[k] == "v") plane = &f.v;
    else if (fields[k] == "gx") plane = &f.gx;
    else if (fields[k] == "gy") plane = &f.gy;
    else if (fields[k] == "gz") plane = &f.gz;
    else if (fields[k] == "sigma") plane = &f.sigma;
    else continue;
    plane->resize(n);
    const auto* p = b + data + k * n * 4;
    for (std::size_t i = 0; i < n; ++i) (*plane)[i] = load_f32_le(p + 4 * i);
  }
  f.validate();
  return f;
}

void write_vfield(const std::string& path, const VesselField& field) {
  field.validate();
  nlohmann::json h = {{"dims", {field.nx, field.ny, field.nz}},
                      {"dtype", "f32"},
                      {"fields", {"v", "gx", "gy", "gz", "sigma"}}};
  const std::string header = h.dump();
  std::string out = kVfieldMagic;
  const auto hl = static_cast<std::uint32_t>(header.size());
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((hl >> (8 * k)) & 0xFF));
  out += header;
  out.reserve(out.size() + field.voxel_count() * 20);
  for (const auto* plane : {&field.v, &field.gx, &field.gy, &field.gz, &field.sigma})
    for (float x : *plane) store_f32_le(out, x);
  write_text(path, out);
}

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw InputError("failed writing " + path);
}

void ensure_directory(const std::string& path) {
  if (path.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw InputError("cannot create directory " + path + ": " + ec.message());
}

}  // namespace thinstruct::io
