#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "thinstruct/energy.hpp"
#include "thinstruct/pipelines.hpp"

namespace thinstruct::io {

/// Raw PGM contents (P2 or P5, 8 or 16 bit).
struct Pgm {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> data;
};

Pgm read_pgm(const std::string& path);
/// Binary P5; 16-bit samples are written big-endian as the format requires.
void write_pgm(const std::string& path, const Pgm& pgm);
void write_pgm_ascii(const std::string& path, const Pgm& pgm);

GrayImage to_image(const Pgm& pgm);
GrayImage read_image(const std::string& path);
/// Rounds and clamps to 8 bits.
void write_image(const std::string& path, const GrayImage& image);

/// Probabilities quantized as round(q * 65535).
void write_probability_mask(const std::string& path, const std::vector<double>& values, int width, int height);
/// Values scaled to [0, 1] by maxval.
std::vector<double> read_probability_mask(const std::string& path, int* width = nullptr, int* height = nullptr);
/// 0 / 255 mask.
void write_binary_mask(const std::string& path, const std::vector<std::uint8_t>& mask, int width, int height);

/// id,x,y,px,py,dx,dy,q with (x, y) the observed site and (px, py) its projection.
void write_tangents_csv_2d(const std::string& path, const SiteSet& sites, const Tangents& L,
                           const std::vector<double>& Q);
/// id,x,y,z,dx,dy,dz,q with (x, y, z) the projected center-line point.
void write_tangents_csv_3d(const std::string& path, const SiteSet& sites, const Tangents& L,
                           const std::vector<double>& Q);

/// Numeric CSV rows; a non-numeric first line is treated as a header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
Table read_csv(const std::string& path);

/// x,y[,z] rows; returns the column count through `dim`.
std::vector<Vec3> read_points_csv(const std::string& path, int* dim = nullptr);
void write_points_csv(const std::string& path, const std::vector<Vec3>& points, int dim);
/// x,y[,z],tx,ty[,tz] ground-truth tangents.
void write_curve_truth_csv(const std::string& path, const std::vector<Vec3>& points, const std::vector<Vec3>& tangents,
                           int dim);

/// "TSVFIELD" magic, uint32 LE header length, JSON header, then f32 LE planes
/// in header order, x fastest.
VesselField read_vfield(const std::string& path);
void write_vfield(const std::string& path, const VesselField& field);

void write_text(const std::string& path, const std::string& text);
/// Creates the directory (and parents) if needed.
void ensure_directory(const std::string& path);

}  // namespace thinstruct::io
