#pragma once

#include <mawii/comparators.hpp>
#include <mawii/inference.hpp>
#include <mawii/simulate.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace mawii {

// Method, Est, SE (and nH where present) for one dataset.
std::string format_comparison(const std::vector<MethodOutcome>& outcomes);

// Same as CSV: method,beta,se,nH,error.
std::string format_comparison_csv(const std::vector<MethodOutcome>& outcomes);

// bin,f_lo,f_hi,f_center,mean,se,count
std::string format_diagnostic_csv(const DiagnosticSeries& s);

// Scatter of beta_hat against nH (log axis) with the two-SE band.
std::string sweep_svg(const SweepResult& s);

// Residuals t_hat against f with the binned mean and a +/- critical-value band.
std::string diagnostic_svg(const DiagnosticSeries& s);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

} // namespace mawii
