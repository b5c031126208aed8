#pragma once

#include <cstddef>
#include <functional>

namespace mkvlevy {

/// Composite Simpson rule with an even number of panels (odd inputs are rounded up).
double simpson(const std::function<double(double)>& f, double a, double b, std::size_t panels = 1000);

}  // namespace mkvlevy
