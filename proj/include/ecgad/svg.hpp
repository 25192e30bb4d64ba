#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace ecgad::svg {

// Hand-rolled SVG output; keeps plotting dependency-free.

struct Series {
    std::string name;
    std::string color;  // css color
    Eigen::VectorXd values;
};

// Line plot of one or more equal-length series with optional shaded spans
// (e.g. anomaly-mask regions) behind the curves.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::vector<Series>& series,
                     const std::vector<std::pair<int, int>>& shaded_spans = {});

struct BarGroup {
    std::string label;                 // stratum name
    std::vector<double> values;        // one per metric
};

// Grouped bar chart; `metric_names` labels the bars within each group.
void write_grouped_bars(const std::string& path, const std::string& title,
                        const std::vector<std::string>& metric_names,
                        const std::vector<BarGroup>& groups);

}  // namespace ecgad::svg
