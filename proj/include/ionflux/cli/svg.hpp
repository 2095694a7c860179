#pragma once

#include <string>
#include <vector>

namespace ionflux::cli::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  int colour = -1;  // palette index, -1: series position
  bool dashed = false;
};

struct Bar {
  std::string label;
  double value = 0.0;
  double error = 0.0;  // half-height of the error whisker, 0 for none
  std::string group;   // bars sharing a group share a colour
};

/// Lines with markers, shared axes, legend on the right. No clipping of
/// negative values; the y range always includes 0.
std::string line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series);

/// Scatter of (truth, prediction) on equal axes with y = x and y = (1 +/- band) x.
std::string parity_plot(const std::string& title, const std::vector<double>& truth, const std::vector<double>& pred,
                        double band);

std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars);

/// Row-major n x n matrix with values in [0, 1].
std::string heatmap(const std::string& title, const std::vector<std::string>& labels,
                    const std::vector<double>& values);

}  // namespace ionflux::cli::svg
