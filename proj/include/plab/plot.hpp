#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "plab/error.hpp"

namespace plab::plot {

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int col(const std::string& name) const
    {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return int(i);
        return -1;
    }
};

// Numeric CSV; lines starting with '#' are skipped.
inline Table read_table(std::istream& is)
{
    Table t;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (t.columns.empty()) {
            t.columns = f;
            continue;
        }
        if (f.size() != t.columns.size()) throw Error("plot", "row has " + std::to_string(f.size()) + " fields, header has " + std::to_string(t.columns.size()));
        std::vector<double> r;
        for (auto& s : f) {
            try {
                r.push_back(std::stod(s));
            } catch (const std::exception&) {
                throw Error("plot", "non-numeric field '" + s + "'");
            }
        }
        t.rows.push_back(r);
    }
    return t;
}

inline std::string detect_kind(const Table& t)
{
    auto starts = [&](std::vector<std::string> pre) {
        if (t.columns.size() < pre.size()) return false;
        return std::equal(pre.begin(), pre.end(), t.columns.begin());
    };
    if (starts({"param", "n", "estimate", "se"})) return "scan";
    if (starts({"t", "cov", "se"})) return "cov";
    throw Error("plot", "unrecognized CSV schema (expected a scan or covariance CSV)");
}

struct Series {
    std::string label;
    std::vector<double> x, y, err;
    bool line = true, markers = true;
};

namespace detail {

inline std::string num(double v)
{
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

}  // namespace detail

inline std::string render(const std::vector<Series>& series, const std::string& title, const std::string& xlabel, const std::string& ylabel, bool logy)
{
    const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 55;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    auto ty = [&](double v) { return logy ? std::log10(v) : v; };
    for (auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (logy && !(s.y[i] > 0)) continue;
            double e = s.err.empty() ? 0 : s.err[i];
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            double lo = logy ? s.y[i] : s.y[i] - e, hi = s.y[i] + e;
            y0 = std::min(y0, ty(lo));
            y1 = std::max(y1, ty(hi));
        }
    if (x0 > x1) throw Error("plot", logy ? "no positive values to draw on a log scale" : "nothing to draw");
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        double xv = x0 + (x1 - x0) * i / 5, yv = y0 + (y1 - y0) * i / 5;
        double yl = logy ? std::pow(10, yv) : yv;
        double X = px(xv), Y = H - B - (yv - y0) / (y1 - y0) * (H - T - B);
        os << "<line x1=\"" << X << "\" y1=\"" << H - B << "\" x2=\"" << X << "\" y2=\"" << H - B + 5 << "\" stroke=\"black\"/>";
        os << "<text x=\"" << X << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << detail::num(xv) << "</text>\n";
        os << "<line x1=\"" << L - 5 << "\" y1=\"" << Y << "\" x2=\"" << L << "\" y2=\"" << Y << "\" stroke=\"black\"/>";
        os << "<text x=\"" << L - 8 << "\" y=\"" << Y + 4 << "\" text-anchor=\"end\">" << detail::num(yl) << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    os << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel << (logy ? " (log)" : "")
       << "</text>\n";
    for (size_t k = 0; k < series.size(); ++k) {
        auto& s = series[k];
        const char* c = colors[k % 6];
        std::string pts;
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (logy && !(s.y[i] > 0)) continue;
            pts += detail::num(px(s.x[i])) + "," + detail::num(py(s.y[i])) + " ";
            if (!s.err.empty() && s.err[i] > 0) {
                double lo = s.y[i] - s.err[i];
                if (logy && !(lo > 0)) lo = std::pow(10, y0);
                os << "<line x1=\"" << px(s.x[i]) << "\" y1=\"" << py(lo) << "\" x2=\"" << px(s.x[i]) << "\" y2=\"" << py(s.y[i] + s.err[i])
                   << "\" stroke=\"" << c << "\"/>\n";
            }
            if (s.markers) os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
        }
        if (s.line && !pts.empty())
            os << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << c << "\"" << (s.markers ? "" : " stroke-dasharray=\"4 3\"") << "/>\n";
        os << "<text x=\"" << W - R - 120 << "\" y=\"" << T + 16 * (k + 1) << "\" fill=\"" << c << "\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

// kind: "auto", "scan" or "cov"
inline std::string svg_from_csv(std::istream& is, std::string kind = "auto")
{
    auto t = read_table(is);
    if (t.columns.empty() || t.rows.empty()) throw Error("plot", "empty CSV");
    auto detected = detect_kind(t);
    if (kind == "auto") kind = detected;
    if (kind != detected) throw Error("plot", "CSV schema is '" + detected + "', not '" + kind + "'");
    std::vector<Series> ss;
    if (kind == "scan") {
        int cp = t.col("param"), cn = t.col("n"), ce = t.col("estimate"), cs = t.col("se");
        std::map<double, Series> by_n;
        for (auto& r : t.rows) {
            auto& s = by_n[r[size_t(cn)]];
            s.label = "n = " + detail::num(r[size_t(cn)]);
            s.x.push_back(r[size_t(cp)]);
            s.y.push_back(r[size_t(ce)]);
            s.err.push_back(2 * r[size_t(cs)]);
        }
        for (auto& [n, s] : by_n) ss.push_back(s);
        return render(ss, "crossing probability", "parameter", "estimate", false);
    }
    int ct = t.col("t"), cc = t.col("cov"), cs = t.col("se"), cf = t.col("fitted");
    Series s;
    s.label = "Cov(f, f_t)";
    for (auto& r : t.rows) {
        s.x.push_back(r[size_t(ct)]);
        s.y.push_back(r[size_t(cc)]);
        s.err.push_back(2 * r[size_t(cs)]);
    }
    ss.push_back(s);
    if (cf >= 0) {
        Series f;
        f.label = "fit";
        f.markers = false;
        for (auto& r : t.rows) {
            f.x.push_back(r[size_t(ct)]);
            f.y.push_back(r[size_t(cf)]);
        }
        ss.push_back(f);
    }
    return render(ss, "covariance decay", "t", "covariance", true);
}

}  // namespace plab::plot
