#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "maglab/errors.hpp"
#include "maglab/lab/lab.hpp"

namespace maglab::lab {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

/// Loads an artifact and checks it against the manifest hash.
nlohmann::json load_artifact(const RunManifest& m, const ArtifactRecord& a) {
  const fs::path path = m.run_directory / a.path;
  const std::string text = read_file(path);
  if (sha256_hex(text) != a.sha256) throw IoError("artifact " + path.string() + " does not match its manifest hash");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- SVG

struct Series {
  std::vector<double> x, y;
  std::string color;
  bool dashed = false;
  bool markers = false;
  std::string label;
  std::string attributes;
};

class LinePlot {
 public:
  LinePlot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void add(Series s) { series_.push_back(std::move(s)); }
  void add_segments(std::vector<std::array<double, 4>> segments, std::string color, std::string label) {
    segments_.push_back({std::move(segments), std::move(color), std::move(label)});
  }

  std::string svg() const {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    auto extend = [&](double x, double y) {
      if (!std::isfinite(x) || !std::isfinite(y)) return;
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    };
    for (const auto& s : series_) {
      for (std::size_t i = 0; i < s.x.size(); ++i) extend(s.x[i], s.y[i]);
    }
    for (const auto& g : segments_) {
      for (const auto& seg : g.segments) extend(seg[0], seg[1]), extend(seg[2], seg[3]);
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double padx = 0.03 * (x1 - x0), pady = 0.05 * (y1 - y0);
    x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;

    const double W = 720, H = 480, L = 80, R = 170, T = 40, B = 60;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title_ << "</text>\n";
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
      const double xv = x0 + (x1 - x0) * k / 5, yv = y0 + (y1 - y0) * k / 5;
      o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
        << short_num(xv) << "</text>\n";
      o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
        << short_num(yv) << "</text>\n";
    }
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\" font-size=\"13\">"
      << xlabel_ << "</text>\n";
    o << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << (T + H - B) / 2 << ")\">" << ylabel_ << "</text>\n";

    int legend = 0;
    auto add_legend = [&](const std::string& color, const std::string& label) {
      if (label.empty()) return;
      const double y = T + 14 + 18 * legend++;
      o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << y << "\" x2=\"" << W - R + 30 << "\" y2=\"" << y
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
      o << "<text x=\"" << W - R + 36 << "\" y=\"" << y + 4 << "\" font-size=\"11\">" << label << "</text>\n";
    };
    for (const auto& s : series_) {
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
        << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " " << s.attributes << " points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (i) o << ' ';
        o << px(s.x[i]) << ',' << py(s.y[i]);
      }
      o << "\"/>\n";
      if (s.markers) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << s.color
            << "\"/>\n";
        }
      }
      add_legend(s.color, s.label);
    }
    for (const auto& g : segments_) {
      o << "<path fill=\"none\" stroke=\"" << g.color << "\" stroke-width=\"1\" d=\"";
      for (const auto& seg : g.segments) {
        o << 'M' << px(seg[0]) << ',' << py(seg[1]) << 'L' << px(seg[2]) << ',' << py(seg[3]);
      }
      o << "\"/>\n";
      add_legend(g.color, g.label);
    }
    o << "</svg>\n";
    return o.str();
  }

 private:
  struct SegmentGroup {
    std::vector<std::array<double, 4>> segments;
    std::string color;
    std::string label;
  };
  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
  std::vector<SegmentGroup> segments_;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof *kPalette)]; }

/// Marching squares for the level set {f = level} on a tensor grid.
std::vector<std::array<double, 4>> contour(const std::vector<double>& xs, const std::vector<double>& ys,
                                           const std::vector<std::vector<double>>& f, double level) {
  std::vector<std::array<double, 4>> out;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
      // Corners counter-clockwise: (i,j), (i+1,j), (i+1,j+1), (i,j+1).
      const double cx[4] = {xs[i], xs[i + 1], xs[i + 1], xs[i]};
      const double cy[4] = {ys[j], ys[j], ys[j + 1], ys[j + 1]};
      const double v[4] = {f[i][j] - level, f[i + 1][j] - level, f[i + 1][j + 1] - level, f[i][j + 1] - level};
      std::vector<std::array<double, 2>> hits;
      for (int e = 0; e < 4; ++e) {
        const int a = e, b = (e + 1) % 4;
        if ((v[a] < 0) != (v[b] < 0)) {
          const double s = v[a] / (v[a] - v[b]);
          hits.push_back({cx[a] + s * (cx[b] - cx[a]), cy[a] + s * (cy[b] - cy[a])});
        }
      }
      if (hits.size() == 2) out.push_back({hits[0][0], hits[0][1], hits[1][0], hits[1][1]});
      if (hits.size() == 4) {
        // Saddle: resolve with the cell-centre value.
        const double centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
        if ((centre < 0) == (v[0] < 0)) {
          out.push_back({hits[0][0], hits[0][1], hits[1][0], hits[1][1]});
          out.push_back({hits[2][0], hits[2][1], hits[3][0], hits[3][1]});
        } else {
          out.push_back({hits[0][0], hits[0][1], hits[3][0], hits[3][1]});
          out.push_back({hits[1][0], hits[1][1], hits[2][0], hits[2][1]});
        }
      }
    }
  }
  return out;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size(), my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  return sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

struct Prediction {
  nlohmann::json doc;
  /// Rescaled prediction for level n at h (NaN when h is not tabulated).
  double at(const char* table, double h, std::size_t n) const {
    for (const auto& [key, values] : doc.at(table).items()) {
      if (std::abs(std::stod(key) - h) <= 1e-12 * h && n < values.size()) return values[n].get<double>();
    }
    return std::numeric_limits<double>::quiet_NaN();
  }
};

}  // namespace

ReportFiles emit_report(const RunManifest& manifest) {
  if (manifest.status != "complete") {
    throw PreconditionError("emit_report: manifest status is '" + manifest.status + "', not complete");
  }
  const fs::path dir = manifest.run_directory / "report";
  try {
    fs::create_directories(dir);
  } catch (const fs::filesystem_error& e) {
    throw IoError("cannot create " + dir.string() + ": " + e.what());
  }

  ReportFiles out;
  nlohmann::json config;
  Prediction prediction;
  std::vector<nlohmann::json> dispersive;
  std::optional<nlohmann::json> symbol;
  struct Row { std::string kind; SpectrumResult s; };
  std::vector<Row> spectra;
  std::map<double, SpectrumResult> direct;

  for (const auto& a : manifest.artifacts) {
    if (a.path.size() < 5 || a.path.substr(a.path.size() - 5) != ".json") continue;
    if (a.path == "config.json") {
      config = load_artifact(manifest, a);
    } else if (a.path == "harmonic_prediction.json") {
      prediction.doc = load_artifact(manifest, a);
    } else if (a.stage == "dispersive_curves") {
      dispersive.push_back(load_artifact(manifest, a));
    } else if (a.path == "effective_symbol_band1.json") {
      symbol = load_artifact(manifest, a);
    } else if (a.stage == "magnetic2d" || a.stage == "quantize_order0" || a.stage == "quantize_order1" ||
               a.stage == "bohr_sommerfeld") {
      auto s = spectrum_from_json(load_artifact(manifest, a));
      if (a.stage == "magnetic2d") direct[s.h] = s;
      spectra.push_back({a.stage, std::move(s)});
    }
  }
  if (prediction.doc.is_null()) throw IoError("manifest has no harmonic_prediction.json");
  const bool plots = config.is_null() ? true : config.at("outputs").at("emit_plots").get<bool>();

  std::sort(spectra.begin(), spectra.end(), [](const Row& a, const Row& b) {
    return a.s.h != b.s.h ? a.s.h > b.s.h : a.kind < b.kind;
  });
  std::ostringstream eig;
  eig << "kind,h,band,index,eigenvalue,residual\n";
  for (const auto& r : spectra) {
    for (std::size_t i = 0; i < r.s.eigenvalues.size(); ++i) {
      eig << r.kind << ',' << num(r.s.h) << ',' << r.s.band << ',' << r.s.indices[i] << ','
          << num(r.s.eigenvalues[i]) << ',' << (r.s.residuals.empty() ? "" : num(r.s.residuals[i])) << '\n';
    }
  }

  std::ostringstream pred;
  pred << "h,n,lambda_closed_form,lambda_hessian\n";
  std::vector<std::pair<double, std::string>> keys;
  for (const auto& [key, v] : prediction.doc.at("lambda_closed_form").items()) keys.emplace_back(std::stod(key), key);
  std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [h, key] : keys) {
    const auto& p = prediction.doc.at("lambda_closed_form").at(key);
    const auto& q = prediction.doc.at("lambda_hessian").at(key);
    for (std::size_t n = 0; n < p.size(); ++n) {
      pred << num(h) << ',' << n << ',' << num(p[n].get<double>()) << ',' << num(q[n].get<double>()) << '\n';
    }
  }

  // Ground-state error against each candidate, normalised by hbar = h^(1/3).
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream err;
  err << "h,hbar,lambda1,prediction_closed_form,prediction_hessian,error_closed_form,error_hessian\n";
  std::vector<double> log_h, log_closed_form, log_hessian;
  for (auto it = direct.rbegin(); it != direct.rend(); ++it) {
    const auto& [h, s] = *it;
    if (s.eigenvalues.empty()) continue;
    const double hbar = std::cbrt(h);
    const double l1 = s.eigenvalues.front();
    const double pp = prediction.at("lambda_closed_form", h, 0), ph = prediction.at("lambda_hessian", h, 0);
    const double ep = std::abs(l1 - pp) / hbar, eh = std::abs(l1 - ph) / hbar;
    rows.push_back({{"h", h}, {"hbar", hbar}, {"lambda1", l1}, {"prediction_closed_form", pp},
                    {"prediction_hessian", ph}, {"error_closed_form", ep}, {"error_hessian", eh}});
    err << num(h) << ',' << num(hbar) << ',' << num(l1) << ',' << num(pp) << ',' << num(ph) << ','
        << num(ep) << ',' << num(eh) << '\n';
    if (ep > 0 && eh > 0 && std::isfinite(ep) && std::isfinite(eh)) {
      log_h.push_back(std::log(h));
      log_closed_form.push_back(std::log(ep));
      log_hessian.push_back(std::log(eh));
    }
  }
  out.slope_closed_form = least_squares_slope(log_h, log_closed_form);
  out.slope_hessian = least_squares_slope(log_h, log_hessian);

  double mean_closed_form = 0, mean_hessian = 0;
  for (const auto& r : rows) mean_closed_form += r["error_closed_form"].get<double>(), mean_hessian += r["error_hessian"].get<double>();
  nlohmann::json summary = {
      {"schema", "maglab.report_summary"},
      {"version", 1},
      {"config_hash", manifest.config_hash},
      {"error_definition", "|lambda_1(h)/h^(4/3) - prediction| / h^(1/3), rescaled units"},
      {"errors_vs_h", rows},
      {"slope_closed_form", out.slope_closed_form},
      {"slope_hessian", out.slope_hessian},
      {"better_candidate", rows.empty() ? nlohmann::json() : nlohmann::json(mean_closed_form <= mean_hessian ? "closed_form" : "hessian")},
      {"c1_closed_form", prediction.doc.at("c1_closed_form")},
      {"c1_hessian", prediction.doc.at("c1_hessian")}};
  nlohmann::json comparisons = nlohmann::json::array();
  for (const auto& a : manifest.artifacts) {
    if (a.stage != "comparison") continue;
    const auto doc = load_artifact(manifest, a);
    comparisons.push_back({{"h", a.h ? nlohmann::json(*a.h) : nlohmann::json()},
                           {"hausdorff_like", doc.at("hausdorff_like")},
                           {"rank_check", doc.at("rank_check")}});
  }
  summary["comparisons"] = comparisons;

  auto emit = [&](const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    out.files.push_back(dir / name);
  };
  emit("eigenvalues.csv", eig.str());
  emit("predictions.csv", pred.str());
  emit("errors_vs_h.csv", err.str());
  emit("summary.json", summary.dump(2) + "\n");

  if (plots) {
    LinePlot curves("Dispersive curves", "nu", "mu_k(nu)");
    std::sort(dispersive.begin(), dispersive.end(),
              [](const auto& a, const auto& b) { return a.at("band").template get<int>() < b.at("band").template get<int>(); });
    for (std::size_t i = 0; i < dispersive.size(); ++i) {
      const int band = dispersive[i].at("band").get<int>();
      curves.add({dispersive[i].at("nu_grid").get<std::vector<double>>(),
                  dispersive[i].at("values").get<std::vector<double>>(), color(i), false, false,
                  "band " + std::to_string(band), "data-band=\"" + std::to_string(band) + "\""});
    }
    emit("dispersive_curves.svg", curves.svg());

    LinePlot levels("Principal symbol level sets (band 1)", "x", "xi");
    if (symbol) {
      const auto xs = symbol->at("x_grid").get<std::vector<double>>();
      const auto ys = symbol->at("xi_grid").get<std::vector<double>>();
      const auto f = symbol->at("principal").get<std::vector<std::vector<double>>>();
      const auto window = config.is_null() ? std::vector<double>{}
                                           : config.at("discretization").at("energy_window").get<std::vector<double>>();
      double lowest = INFINITY;
      for (const auto& row : f) lowest = std::min(lowest, *std::min_element(row.begin(), row.end()));
      const double top = window.size() == 2 ? window[1] : lowest + 0.5;
      for (int k = 1; k <= 6; ++k) {
        const double level = lowest + (top - lowest) * k / 6.0;
        levels.add_segments(contour(xs, ys, f, level), color(k - 1), "E = " + short_num(level));
      }
    }
    emit("symbol_contour.svg", levels.svg());

    LinePlot conv("lambda_n(h) / h^(4/3) against h^(1/3)", "h^(1/3)", "lambda_n / h^(4/3)");
    std::size_t levels_max = 0;
    for (const auto& [h, s] : direct) levels_max = std::max(levels_max, s.eigenvalues.size());
    for (std::size_t n = 0; n < levels_max; ++n) {
      Series measured{{}, {}, color(n), false, true, "2D n=" + std::to_string(n), ""};
      Series closed_form{{}, {}, color(n), true, false, n == 0 ? "prediction (closed-form c1)" : "", ""};
      Series hessian{{}, {}, color(n), true, false, n == 0 ? "prediction (Hessian c1)" : "",
                     "stroke-opacity=\"0.5\""};
      for (const auto& [h, s] : direct) {
        const double x = std::cbrt(h);
        if (n < s.eigenvalues.size()) measured.x.push_back(x), measured.y.push_back(s.eigenvalues[n]);
        const double pp = prediction.at("lambda_closed_form", h, n), ph = prediction.at("lambda_hessian", h, n);
        if (std::isfinite(pp)) closed_form.x.push_back(x), closed_form.y.push_back(pp);
        if (std::isfinite(ph)) hessian.x.push_back(x), hessian.y.push_back(ph);
      }
      conv.add(std::move(measured));
      conv.add(std::move(closed_form));
      conv.add(std::move(hessian));
    }
    emit("convergence.svg", conv.svg());
  }
  return out;
}

}  // namespace maglab::lab
