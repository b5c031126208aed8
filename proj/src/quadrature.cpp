#include "mkvlevy/quadrature.hpp"

namespace mkvlevy {

double simpson(const std::function<double(double)>& f, double a, double b, std::size_t panels) {
  if (a == b) return 0.0;
  if (panels < 2) panels = 2;
  if (panels % 2) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return s * h / 3.0;
}

}  // namespace mkvlevy
