#include "ditto/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ditto/io.hpp"

namespace ditto::report {

using rollout::EvalReport;
using rollout::EvalRow;

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

}  // namespace

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::string out = "scenario,variant,axis,axis_value,mean,std\n";
    for (const auto& r : report.rows) {
        out += csv_escape(r.scenario) + "," + csv_escape(r.variant) + "," +
               csv_escape(r.axis) + "," + fmt(r.axis_value) + "," + fmt(r.mean) + "," +
               fmt(r.stddev) + "\n";
    }
    atomic_write(path, out);
}

EvalReport read_report_csv(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("scenario,", 0) != 0)
        throw std::runtime_error("read_report_csv: missing header in " + path.string());
    EvalReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 6)
            throw std::runtime_error("read_report_csv: malformed row: " + line);
        report.rows.push_back(
            {f[0], f[1], f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
    }
    return report;
}

std::vector<Series> series_from_report(const EvalReport& report, const std::string& axis) {
    std::map<std::string, Series> grouped;
    for (const auto& r : report.rows) {
        if (r.axis != axis) continue;
        const std::string key = r.scenario + " / " + r.variant;
        auto& s = grouped[key];
        s.name = key;
        s.points.emplace_back(r.axis_value, r.mean);
    }
    std::vector<Series> out;
    for (auto& [_, s] : grouped) {
        std::sort(s.points.begin(), s.points.end());
        out.push_back(std::move(s));
    }
    return out;
}

void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::string& xlabel, const std::string& ylabel,
                          const std::vector<Series>& series) {
    if (series.empty()) throw std::invalid_argument("write_line_chart_svg: no series");
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;
    ymin = std::min(ymin, 0.0);

    const double w = 640, h = 420, ml = 70, mr = 160, mt = 40, mb = 50;
    const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    const auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << title << "</text>\n";
    // axes
    svg << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
        << h - mb << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << h - mb << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        svg << "<text x=\"" << px(xv) << "\" y=\"" << h - mb + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv) << "</text>\n";
        svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv) << "</text>\n";
    }
    svg << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 10
        << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
    svg << "<text x=\"16\" y=\"" << (mt + h - mb) / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << (mt + h - mb) / 2 << ")\">" << ylabel << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = colors[si % 8];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.points) svg << px(x) << "," << py(y) << " ";
        svg << "\"/>\n";
        const double ly = mt + 16 + 16 * static_cast<double>(si);
        svg << "<line x1=\"" << w - mr + 10 << "\" y1=\"" << ly << "\" x2=\"" << w - mr + 30
            << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << w - mr + 36 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
            << s.name << "</text>\n";
    }
    svg << "</svg>\n";
    atomic_write(path, svg.str());
}

}  // namespace ditto::report
