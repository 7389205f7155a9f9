#pragma once

#include <cstddef>
#include <vector>

namespace hsdf {

/// Row-major, top-left origin, interleaved channels, 32-bit float samples.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c, float fill = 0.0f);

    std::size_t index(int x, int y, int c = 0) const
    {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    float& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    float at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
    bool same_shape(const Image& o) const
    {
        return width == o.width && height == o.height && channels == o.channels;
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    void validate() const;
};

/// Bilinear lookup in pixel-index coordinates: (x, y) = (2, 3) is exactly pixel
/// (2, 3). Coordinates outside [0,w-1]x[0,h-1] are clamped to the edge.
std::vector<double> bilinear_sample(const Image& img, double u, double v);
double bilinear_sample(const Image& img, double u, double v, int channel);

/// Extracts channels [first, first+count) into a new image.
Image slice_channels(const Image& img, int first, int count);

} // namespace hsdf
