#include "rlgps/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "rlgps/analysis.hpp"
#include "rlgps/text.hpp"

namespace rlgps {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Round step for about `target` ticks over [0, span].
double tick_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (const double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

}  // namespace

std::string group_color(const std::string& group) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : group) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return palette[h % (sizeof palette / sizeof palette[0])];
}

void write_regret_svg(std::ostream& out, const std::vector<AggregateResult>& groups, const std::string& title) {
  double x_max = 1.0;
  double y_max = 0.0;
  double y_min = 0.0;
  for (const AggregateResult& g : groups) {
    if (!g.episode.empty()) x_max = std::max(x_max, static_cast<double>(g.episode.back()));
    for (std::size_t k = 0; k < g.mean.size(); ++k) {
      y_max = std::max({y_max, g.mean[k] + g.sem[k], g.median[k]});
      y_min = std::min({y_min, g.mean[k] - g.sem[k], g.median[k]});
    }
  }
  if (y_max - y_min <= 0.0) y_max = y_min + 1.0;
  const double y_step = tick_step(y_max - y_min, 5);
  y_max = std::ceil(y_max / y_step) * y_step;
  y_min = std::floor(y_min / y_step) * y_step;
  const double x_min = 1.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x_max > x_min ? (x - x_min) / (x_max - x_min) : 0.0) * plot_w; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
  out << "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  if (!title.empty()) {
    out << "<text x=\"" << fixed(kLeft + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"16\">" << escape_xml(title) << "</text>\n";
  }

  // Axes and ticks.
  out << "<g stroke=\"#444\" stroke-width=\"1\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop + plot_h) << "\" x2=\"" << fixed(kLeft + plot_w)
      << "\" y2=\"" << fixed(kTop + plot_h) << "\"/>\n";
  out << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft) << "\" y2=\""
      << fixed(kTop + plot_h) << "\"/>\n";
  for (double y = y_min; y <= y_max + 1e-9 * y_step; y += y_step) {
    out << "<line x1=\"" << fixed(kLeft - 4) << "\" y1=\"" << fixed(py(y)) << "\" x2=\"" << fixed(kLeft) << "\" y2=\""
        << fixed(py(y)) << "\"/>\n";
    out << "<text stroke=\"none\" x=\"" << fixed(kLeft - 8) << "\" y=\"" << fixed(py(y) + 4)
        << "\" text-anchor=\"end\">" << format_double(std::round(y / y_step) * y_step) << "</text>\n";
  }
  const double x_step = tick_step(x_max - x_min + 1.0, 5);
  for (double x = x_step; x <= x_max + 1e-9; x += x_step) {
    out << "<line x1=\"" << fixed(px(x)) << "\" y1=\"" << fixed(kTop + plot_h) << "\" x2=\"" << fixed(px(x))
        << "\" y2=\"" << fixed(kTop + plot_h + 4) << "\"/>\n";
    out << "<text stroke=\"none\" x=\"" << fixed(px(x)) << "\" y=\"" << fixed(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\">" << format_double(x) << "</text>\n";
  }
  out << "<text stroke=\"none\" x=\"" << fixed(kLeft + plot_w / 2) << "\" y=\"" << fixed(kHeight - 10)
      << "\" text-anchor=\"middle\" font-size=\"13\">episode</text>\n";
  out << "<text stroke=\"none\" transform=\"translate(18," << fixed(kTop + plot_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"13\">cumulative regret</text>\n";
  out << "</g>\n";

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const AggregateResult& g = groups[gi];
    const std::string color = group_color(g.group);
    if (g.episode.empty()) continue;
    std::ostringstream band, mean, median;
    for (std::size_t k = 0; k < g.episode.size(); ++k) {
      band << fixed(px(double(g.episode[k]))) << "," << fixed(py(g.mean[k] + g.sem[k])) << " ";
    }
    for (std::size_t k = g.episode.size(); k-- > 0;) {
      band << fixed(px(double(g.episode[k]))) << "," << fixed(py(g.mean[k] - g.sem[k])) << " ";
    }
    for (std::size_t k = 0; k < g.episode.size(); ++k) {
      mean << fixed(px(double(g.episode[k]))) << "," << fixed(py(g.mean[k])) << " ";
      median << fixed(px(double(g.episode[k]))) << "," << fixed(py(g.median[k])) << " ";
    }
    out << "<g class=\"group\" data-group=\"" << escape_xml(g.group) << "\">\n";
    out << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    out << "<polyline points=\"" << mean.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<polyline points=\"" << median.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" stroke-dasharray=\"2,3\"/>\n";
    const double ly = kTop + 10.0 + 20.0 * static_cast<double>(gi);
    const double lx = kLeft + plot_w + 15.0;
    out << "<line x1=\"" << fixed(lx) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(lx + 20) << "\" y2=\""
        << fixed(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fixed(lx + 26) << "\" y=\"" << fixed(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(g.group.empty() ? "run" : g.group)
        << " (n=" << g.trials << ")</text>\n";
    out << "</g>\n";
  }
  out << "</svg>\n";
}

std::string format_check(const CheckLine& line) {
  return "CHECK " + line.name + (line.pass ? " PASS" : " FAIL") + " lhs=" + format_double(line.lhs) +
         " rhs=" + format_double(line.rhs) + " margin=" + format_double(line.margin);
}

std::vector<CheckLine> run_verification(const ExperimentConfig& cfg) {
  std::vector<CheckLine> out;

  PotentialSuiteSpec suite;
  suite.sequences = cfg.verify_sequences;
  suite.noise = cfg.noise;
  suite.seed = cfg.seed;
  const PotentialSuiteReport lr = run_potential_suite(suite);
  auto check_line = [&](const std::string& name, const PotentialTally& t) {
    out.push_back({name, t.passed == lr.sequences, double(t.passed), double(lr.sequences), t.worst_margin});
  };
  check_line("variance_sum", lr.variance_sum);
  check_line("delayed_sum", lr.delayed_sum);
  check_line("variance_ratio", lr.variance_ratio);
  check_line("variance_sum_spectral", lr.variance_sum_spectral);
  check_line("delayed_sum_tight", lr.delayed_sum_tight);
  check_line("variance_ratio_scaled", lr.variance_ratio_scaled);

  ScalarKernelSpec base = cfg.base;
  base.variance = 1.0;
  const LmcKernel kernel = LmcKernel::lmc(base, MixingMatrix::random(2, 2, cfg.seed).scaled_to_max_diagonal(1.0));
  auto coverage_line = [&](const std::string& name, const CoverageReport& r) {
    out.push_back({name, r.pass, r.lower_ci, r.threshold, r.lower_ci - r.threshold});
  };

  ComposedSetup composed;
  composed.kernel = kernel;
  composed.noise = cfg.noise;
  composed.beta_scale = cfg.beta_scale;
  composed.trials = cfg.verify_trials;
  composed.seed = cfg.seed;
  coverage_line("composed_linear", check_composed_bound(TestFunction::Linear, composed, cfg.delta));
  coverage_line("composed_quadratic", check_composed_bound(TestFunction::HalfSquaredNorm, composed, cfg.delta));

  CoverageSetup value;
  value.kernel = kernel;
  value.noise = cfg.noise;
  value.beta_scale = cfg.beta_scale;
  value.trials = cfg.verify_trials;
  value.seed = cfg.seed;
  coverage_line("value_coverage", check_corollary_coverage(value, cfg.delta));
  return out;
}

}  // namespace rlgps
