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

#pragma once

#include <string>
#include <vector>

namespace nvib {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// CSV (always) and a small SVG line rendering of the same series.
void write_series_csv(const std::string& path, const std::string& x_label,
                      const std::vector<PlotSeries>& series);
void write_series_svg(const std::string& path, const std::string& title,
                      const std::vector<PlotSeries>& series);

/// Gamma-approximation error curves. Writes fig3.csv and fig3.svg.
void emit_fig3(const std::string& out_dir);

/// Mean retained components by input length for a checkpoint. Writes
/// nu_vs_length.csv/.svg.
void emit_nu_vs_length(const std::string& checkpoint_path, const std::string& data_path,
                       const std::string& tokenizer, const std::string& out_dir);

/// Re-renders a training loss log. Writes loss_curves.csv/.svg.
void emit_loss_curves(const std::string& losses_csv, const std::string& out_dir);

} // namespace nvib
