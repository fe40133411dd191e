#pragma once

// File formats: labelled curves as CSV, fitted models as JSON, key=value
// configuration files, and round-trip-exact number formatting.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "fairflda/classifier.hpp"
#include "fairflda/fnspace.hpp"

namespace fairflda {

/// Shortest text that parses back to the same double; "inf", "-inf", "nan".
std::string format_double(double v);
/// Accepts everything format_double emits plus "infinity"; throws ArgumentError otherwise.
double parse_double(std::string_view text);

/// Header a,y,x_0,...,x_{m-1}; curves on the uniform grid of size m.
void write_dataset_csv(std::ostream& os, const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
/// Throws ParseError (with the 1-based line) on malformed or empty input.
Dataset read_dataset_csv(std::istream& is);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Self-describing JSON holding the grid, per-half eigenpairs, mean
/// coefficients, priors, thresholds and the manifest.
std::string model_to_json(const FittedFairClassifier& clf);
FittedFairClassifier model_from_json(std::string_view text);
void save_model(const std::filesystem::path& path, const FittedFairClassifier& clf);
FittedFairClassifier load_model(const std::filesystem::path& path);

/// Lines "key = value"; blank lines and lines starting with '#' are skipped.
std::map<std::string, std::string> read_config(std::istream& is);
std::map<std::string, std::string> read_config(const std::filesystem::path& path);

}  // namespace fairflda
