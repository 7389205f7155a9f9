#pragma once

#include "hsdf/geom/field.hpp"
#include "hsdf/geom/image.hpp"

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

namespace hsdf::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("hsdf_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline ScalarField3 random_field(std::array<int, 3> dims, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    ScalarField3 f(dims, Box3{Vec3(-1, -2, -3), Vec3(2, 1, 4)});
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : f.values) {
        v = u(rng);
    }
    return f;
}

inline Image random_image(int w, int h, int c, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0)
{
    Image img(w, h, c);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : img.data) {
        v = static_cast<float>(u(rng));
    }
    return img;
}

} // namespace hsdf::test
