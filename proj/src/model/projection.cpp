#include "ionflux/model/projection.hpp"

namespace ionflux::model {

namespace {

double masked_zz(std::span<const double> z, const std::vector<bool>& present) {
  if (z.size() != present.size()) throw std::invalid_argument("projection: valence and mask sizes differ");
  double zz = 0.0;
  bool any = false;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (!present[j]) continue;
    any = true;
    zz += z[j] * z[j];
  }
  if (!any) throw NoPresentIonsError("projection: every ion is absent");
  if (zz == 0.0) throw NoPresentIonsError("projection: valences of present ions are all zero");
  return zz;
}

}  // namespace

std::vector<double> project_electroneutral(std::span<const double> v, std::span<const double> z,
                                           const std::vector<bool>& present) {
  if (v.size() != z.size()) throw std::invalid_argument("projection: vector and valence sizes differ");
  const double zz = masked_zz(z, present);
  double zv = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (present[j]) zv += z[j] * v[j];
  std::vector<double> out(v.begin(), v.end());
  const double a = zv / zz;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (present[j]) out[j] -= a * z[j];
  return out;
}

NumArray projector_matrix(std::span<const double> z, const std::vector<bool>& present) {
  const double zz = masked_zz(z, present);
  const std::size_t d = z.size();
  NumArray p(d, d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    if (!present[i]) continue;
    for (std::size_t j = 0; j < d; ++j) {
      if (!present[j]) continue;
      p(i, j) = (i == j ? 1.0 : 0.0) - z[i] * z[j] / zz;
    }
  }
  return p;
}

}  // namespace ionflux::model
