#ifndef SURVFUSE_SVG_HPP
#define SURVFUSE_SVG_HPP

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "survfuse/errors.hpp"

namespace survfuse {

// Minimal static SVG line chart: axes, optional shaded band, step or
// straight-line series. Coordinates are mapped into a fixed viewport.
class SvgChart {
public:
    SvgChart(double x_min, double x_max, double y_min, double y_max,
             std::string x_label = "time", std::string y_label = "")
        : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max),
          x_label_(std::move(x_label)), y_label_(std::move(y_label)) {
        if (!(x_max > x_min) || !(y_max > y_min))
            throw ContractError("SvgChart: degenerate axis range");
    }

    void add_band(const std::vector<double>& x, const std::vector<double>& lo,
                  const std::vector<double>& hi, const std::string& fill) {
        if (x.size() != lo.size() || x.size() != hi.size() || x.size() < 2)
            throw ContractError("SvgChart: band arrays must match and have >= 2 points");
        std::ostringstream os;
        os << "<polygon fill=\"" << fill << "\" fill-opacity=\"0.3\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < x.size(); ++i)
            os << px(x[i]) << "," << py(hi[i]) << " ";
        for (std::size_t i = x.size(); i-- > 0;)
            os << px(x[i]) << "," << py(lo[i]) << " ";
        os << "\"/>\n";
        body_ += os.str();
    }

    void add_line(const std::vector<double>& x, const std::vector<double>& y,
                  const std::string& stroke, bool step = false) {
        if (x.size() != y.size() || x.empty())
            throw ContractError("SvgChart: series arrays must match and be nonempty");
        std::ostringstream os;
        os << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (step && i > 0) os << px(x[i]) << "," << py(y[i - 1]) << " ";
            os << px(x[i]) << "," << py(y[i]) << " ";
        }
        os << "\"/>\n";
        body_ += os.str();
    }

    void add_legend_entry(const std::string& label, const std::string& color) {
        legend_.emplace_back(label, color);
    }

    std::string render() const {
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
           << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
           << kHeight << "\">\n";
        os << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
           << "\" fill=\"white\"/>\n";
        // axes
        os << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
           << kWidth - kRight << "\" y2=\"" << kHeight - kBottom
           << "\" stroke=\"black\"/>\n";
        os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
           << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
        // ticks
        for (int i = 0; i <= 4; ++i) {
            const double fx = x_min_ + (x_max_ - x_min_) * i / 4.0;
            const double fy = y_min_ + (y_max_ - y_min_) * i / 4.0;
            os << "<text x=\"" << px(fx) << "\" y=\"" << kHeight - kBottom + 16
               << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt(fx) << "</text>\n";
            os << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(fy) + 3
               << "\" font-size=\"10\" text-anchor=\"end\">" << fmt(fy) << "</text>\n";
        }
        os << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 6
           << "\" font-size=\"11\" text-anchor=\"middle\">" << x_label_ << "</text>\n";
        if (!y_label_.empty())
            os << "<text x=\"12\" y=\"" << (kTop + kHeight - kBottom) / 2
               << "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 12 "
               << (kTop + kHeight - kBottom) / 2 << ")\">" << y_label_ << "</text>\n";
        os << body_;
        double ly = kTop + 12;
        for (const auto& [label, color] : legend_) {
            os << "<line x1=\"" << kWidth - kRight - 110 << "\" y1=\"" << ly - 4
               << "\" x2=\"" << kWidth - kRight - 90 << "\" y2=\"" << ly - 4
               << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
            os << "<text x=\"" << kWidth - kRight - 84 << "\" y=\"" << ly
               << "\" font-size=\"10\">" << label << "</text>\n";
            ly += 14;
        }
        os << "</svg>\n";
        return os.str();
    }

private:
    static constexpr int kWidth = 640, kHeight = 420;
    static constexpr int kLeft = 56, kRight = 16, kTop = 16, kBottom = 40;

    double px(double x) const {
        const double f = (x - x_min_) / (x_max_ - x_min_);
        return kLeft + f * (kWidth - kLeft - kRight);
    }
    double py(double y) const {
        const double f = (y - y_min_) / (y_max_ - y_min_);
        return kHeight - kBottom - f * (kHeight - kTop - kBottom);
    }
    static std::string fmt(double v) {
        std::ostringstream os;
        os.precision(3);
        os << v;
        return os.str();
    }

    double x_min_, x_max_, y_min_, y_max_;
    std::string x_label_, y_label_;
    std::string body_;
    std::vector<std::pair<std::string, std::string>> legend_;
};

} // namespace survfuse

#endif
