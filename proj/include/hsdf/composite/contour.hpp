#pragma once

#include "hsdf/geom/image.hpp"
#include "hsdf/geom/types.hpp"

#include <vector>

namespace hsdf::composite {

/// Binary view of an image channel: value > 0.5.
std::vector<unsigned char> binarize(const Image& mask);

/// Outer boundary of the largest 4-connected component, as an ordered closed
/// loop of pixel coordinates (Moore-neighbour tracing, clockwise on screen).
std::vector<Vec2> trace_outer_contour(const Image& mask);

/// `count` points at equal arclength along a closed contour, starting at the
/// contour point nearest the ray from `origin` along +x.
std::vector<Vec2> resample_contour(const std::vector<Vec2>& contour, int count, const Vec2& origin);

double contour_length(const std::vector<Vec2>& contour);

Image erode(const Image& mask, int radius);

} // namespace hsdf::composite
