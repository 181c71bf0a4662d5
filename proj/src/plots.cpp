// ----------------------------------------------------------------------------
// Copyright 2026 the nvib authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ----------------------------------------------------------------------------

#include "nvib/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nvib/checkpoint.hpp"
#include "nvib/corpus.hpp"
#include "nvib/verify.hpp"

namespace nvib {

void write_series_csv(const std::string& path, const std::string& x_label,
                      const std::vector<PlotSeries>& series)
{
    std::ofstream os(path);
    if (!os) {
        throw InputError("cannot write " + path);
    }
    os << x_label;
    for (const PlotSeries& s : series) {
        os << "," << s.label;
    }
    os << "\n";
    const std::size_t rows = series.empty() ? 0 : series[0].x.size();
    char buf[64];
    for (std::size_t i = 0; i < rows; ++i) {
        std::snprintf(buf, sizeof buf, "%.12g", series[0].x[i]);
        os << buf;
        for (const PlotSeries& s : series) {
            std::snprintf(buf, sizeof buf, ",%.12g", s.y[i]);
            os << buf;
        }
        os << "\n";
    }
}

void write_series_svg(const std::string& path, const std::string& title,
                      const std::vector<PlotSeries>& series)
{
    const int width = 640, height = 420, margin = 50;
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const PlotSeries& s : series) {
        for (double v : s.x) {
            x_lo = std::min(x_lo, v);
            x_hi = std::max(x_hi, v);
        }
        for (double v : s.y) {
            y_lo = std::min(y_lo, v);
            y_hi = std::max(y_hi, v);
        }
    }
    if (x_hi <= x_lo) {
        x_hi = x_lo + 1.0;
    }
    if (y_hi <= y_lo) {
        y_hi = y_lo + 1.0;
    }
    auto px = [&](double x) {
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin);
    };
    auto py = [&](double y) {
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin);
    };
    static const char* colors[] = {"#4477aa", "#66aa55", "#cc6677", "#aa7744"};

    std::ofstream os(path);
    if (!os) {
        throw InputError("cannot write " + path);
    }
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
       << "\" height=\"" << height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"14\">"
       << title << "</text>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
       << width - margin << "\" y2=\"" << height - margin
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
       << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", x_lo);
    os << "<text x=\"" << margin << "\" y=\"" << height - margin + 18
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", x_hi);
    os << "<text x=\"" << width - margin << "\" y=\"" << height - margin + 18
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << buf
       << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", y_lo);
    os << "<text x=\"" << margin - 6 << "\" y=\"" << height - margin
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << buf
       << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", y_hi);
    os << "<text x=\"" << margin - 6 << "\" y=\"" << margin + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << buf
       << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const PlotSeries& s = series[k];
        os << "<polyline fill=\"none\" stroke=\"" << colors[k % 4]
           << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            os << px(s.x[i]) << "," << py(s.y[i]) << " ";
        }
        os << "\"/>\n";
        os << "<text x=\"" << width - margin - 4 << "\" y=\"" << margin + 16 * (k + 1)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" "
              "fill=\""
           << colors[k % 4] << "\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
}

void emit_fig3(const std::string& out_dir)
{
    std::filesystem::create_directories(out_dir);
    const auto curve = verify::gamma_approximation_curves();
    PlotSeries icdf{"inverse_cdf_error", {}, {}};
    PlotSeries gauss{"gaussian_error", {}, {}};
    for (const auto& pt : curve) {
        icdf.x.push_back(pt.alpha);
        icdf.y.push_back(pt.inverse_cdf_error);
        gauss.x.push_back(pt.alpha);
        gauss.y.push_back(pt.gaussian_error);
    }
    const auto base = std::filesystem::path(out_dir);
    write_series_csv((base / "fig3.csv").string(), "alpha", {icdf, gauss});
    write_series_svg((base / "fig3.svg").string(),
                     "Gamma approximation error by shape", {icdf, gauss});
}

void emit_nu_vs_length(const std::string& checkpoint_path, const std::string& data_path,
                       const std::string& tokenizer, const std::string& out_dir)
{
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    Autoencoder model = model_from_checkpoint(ckpt);
    const Corpus corpus =
        ingest(data_path, parse_tokenizer(tokenizer), 1, model.config().max_len);

    std::vector<double> sums(static_cast<std::size_t>(model.config().max_len) + 1, 0.0);
    std::vector<long> counts(sums.size(), 0);
    for (const TokenSequence& x : corpus.sentences) {
        const std::size_t n = static_cast<std::size_t>(x.length());
        sums[n] += model.retained(x);
        ++counts[n];
    }
    PlotSeries nu{"mean_retained", {}, {}};
    for (std::size_t n = 1; n < sums.size(); ++n) {
        if (counts[n] > 0) {
            nu.x.push_back(static_cast<double>(n));
            nu.y.push_back(sums[n] / counts[n]);
        }
    }
    if (nu.x.empty()) {
        throw InputError("no sentences to evaluate");
    }
    std::filesystem::create_directories(out_dir);
    const auto base = std::filesystem::path(out_dir);
    write_series_csv((base / "nu_vs_length.csv").string(), "length", {nu});
    write_series_svg((base / "nu_vs_length.svg").string(),
                     "Retained proportion by input length", {nu});
}

void emit_loss_curves(const std::string& losses_csv, const std::string& out_dir)
{
    std::ifstream in(losses_csv);
    if (!in) {
        throw InputError("cannot open loss log: " + losses_csv);
    }
    std::string header;
    std::getline(in, header);
    PlotSeries lr{"l_r", {}, {}}, ld{"l_d", {}, {}}, lg{"l_g", {}, {}},
        total{"total", {}, {}};
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream is(line);
        std::string cell;
        double vals[5];
        int col = 0;
        while (std::getline(is, cell, ',') && col < 5) {
            vals[col++] = std::stod(cell);
        }
        if (col != 5) {
            throw InputError("malformed loss log row: " + line);
        }
        lr.x.push_back(vals[0]);
        lr.y.push_back(vals[1]);
        ld.x.push_back(vals[0]);
        ld.y.push_back(vals[2]);
        lg.x.push_back(vals[0]);
        lg.y.push_back(vals[3]);
        total.x.push_back(vals[0]);
        total.y.push_back(vals[4]);
    }
    if (lr.x.empty()) {
        throw InputError("loss log has no rows");
    }
    std::filesystem::create_directories(out_dir);
    const auto base = std::filesystem::path(out_dir);
    write_series_csv((base / "loss_curves.csv").string(), "step",
                     {lr, ld, lg, total});
    write_series_svg((base / "loss_curves.svg").string(), "Training losses",
                     {lr, ld, lg, total});
}

} // namespace nvib
