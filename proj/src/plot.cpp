#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "cfreg/error.hpp"
#include "cfreg/experiment.hpp"
#include "cfreg/io.hpp"

namespace cfreg {

namespace {

const MetricSummary& pick(const SummaryRow& r, std::string_view metric) {
  if (metric == "avg_shift") return r.avg_shift;
  if (metric == "rot_acc") return r.rot_acc;
  if (metric == "t_err") return r.t_err;
  if (metric == "wall_ms") return r.wall_ms;
  throw InvalidArgument("unknown metric '" + std::string(metric) + "'");
}

const char* color_of(Algorithm a) {
  switch (a) {
    case Algorithm::cf: return "#d62728";
    case Algorithm::cfk: return "#1f77b4";
    case Algorithm::icp: return "#2ca02c";
  }
  return "#000000";
}

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

}  // namespace

std::string render_svg(const ExperimentReport& report, std::string_view metric) {
  constexpr double W = 640, H = 420, L = 70, R = 110, T = 40, B = 50;
  const bool by_sigma = report.config.kind == ExperimentKind::noise;

  std::map<Algorithm, std::vector<const SummaryRow*>> series;
  for (const auto& r : report.summary) series[r.algorithm].push_back(&r);

  double x_lo = 0.0, x_hi = 1.0, y_hi = 0.0;
  if (by_sigma) {
    x_lo = 1e300;
    x_hi = -1e300;
  }
  std::size_t slot = 0;
  std::map<Algorithm, std::size_t> slots;
  for (const auto& [algo, rows] : series) {
    slots[algo] = slot++;
    for (const auto* r : rows) {
      const auto& m = pick(*r, metric);
      y_hi = std::max(y_hi, m.mean + m.std);
      if (by_sigma) {
        x_lo = std::min(x_lo, r->sigma);
        x_hi = std::max(x_hi, r->sigma);
      }
    }
  }
  if (!by_sigma) {
    x_lo = -0.5;
    x_hi = static_cast<double>(std::max<std::size_t>(slot, 1)) - 0.5;
  }
  if (!(x_hi > x_lo)) x_hi = x_lo + 1.0;
  if (!(y_hi > 0.0)) y_hi = 1.0;
  y_hi *= 1.1;

  const auto sx = [&](double x) { return L + (x - x_lo) / (x_hi - x_lo) * (W - L - R); };
  const auto sy = [&](double y) { return H - B - y / y_hi * (H - T - B); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\">" << to_string(report.config.kind)
    << " / " << report.config.dataset << " / " << to_string(report.config.rotation) << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = y_hi * i / 5.0;
    s << "<text x=\"" << L - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\">" << num(y)
      << "</text>\n";
  }
  s << "<text x=\"15\" y=\"" << (H - B + T) / 2 << "\" transform=\"rotate(-90 15 "
    << (H - B + T) / 2 << ")\" text-anchor=\"middle\">" << metric << " (mean &#177; std)</text>\n";
  if (by_sigma) {
    for (int i = 0; i <= 4; ++i) {
      const double x = x_lo + (x_hi - x_lo) * i / 4.0;
      s << "<text x=\"" << sx(x) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
        << num(x) << "</text>\n";
    }
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10
      << "\" text-anchor=\"middle\">noise sigma</text>\n";
  }

  std::size_t legend = 0;
  for (const auto& [algo, rows] : series) {
    const char* c = color_of(algo);
    std::string path;
    for (const auto* r : rows) {
      const auto& m = pick(*r, metric);
      const double x = by_sigma ? sx(r->sigma) : sx(static_cast<double>(slots[algo]));
      s << "<line x1=\"" << x << "\" y1=\"" << sy(std::max(0.0, m.mean - m.std)) << "\" x2=\"" << x
        << "\" y2=\"" << sy(m.mean + m.std) << "\" stroke=\"" << c << "\"/>\n";
      s << "<circle cx=\"" << x << "\" cy=\"" << sy(m.mean) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
      path += (path.empty() ? "M" : " L") + num(x) + " " + num(sy(m.mean));
      if (!by_sigma) {
        s << "<text x=\"" << x << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
          << to_string(algo) << "</text>\n";
      }
    }
    if (by_sigma && rows.size() > 1) {
      s << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << c << "\"/>\n";
    }
    const double ly = T + 16.0 * static_cast<double>(legend++);
    s << "<rect x=\"" << W - R + 15 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\""
      << c << "\"/><text x=\"" << W - R + 30 << "\" y=\"" << ly + 9 << "\">" << to_string(algo)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace cfreg
