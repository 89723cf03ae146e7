#pragma once

#include <mawii/linalg.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace mawii {

// Individual-level observations O = (Z, X, A, Y).
//
// Invariants, checked on construction:
//  - Z entries in {0, 1, 2}, no missing values anywhere;
//  - column 0 of X is identically 1;
//  - n > m + d_x;
//  - no constant Z column.
// Immutable once built.
class Dataset
{
public:
    // X must already contain the intercept column.
    Dataset(Matrix genotypes, Matrix covariates, Vector exposure, Vector outcome,
            std::vector<std::string> snp_names = {}, std::vector<std::string> covariate_names = {});

    // Prepends the intercept to `covariates` (n x k, k >= 0).
    static Dataset with_intercept(Matrix genotypes, const Matrix& covariates, Vector exposure,
                                  Vector outcome, std::vector<std::string> snp_names = {},
                                  std::vector<std::string> covariate_names = {});

    Eigen::Index n() const noexcept { return Z_.rows(); }
    Eigen::Index m() const noexcept { return Z_.cols(); }
    Eigen::Index d_x() const noexcept { return X_.cols(); }

    const Matrix& Z() const noexcept { return Z_; }
    const Matrix& X() const noexcept { return X_; }
    const Vector& A() const noexcept { return A_; }
    const Vector& Y() const noexcept { return Y_; }

    const std::vector<std::string>& snp_names() const noexcept { return snp_names_; }
    // Names of X columns, starting with "(intercept)".
    const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }

    // (X, Z), column names matching.
    Matrix full_design() const;
    std::vector<std::string> full_design_names() const;

    bool operator==(const Dataset& other) const;

private:
    Matrix Z_;
    Matrix X_;
    Vector A_;
    Vector Y_;
    std::vector<std::string> snp_names_;
    std::vector<std::string> covariate_names_;
};

// Column roles for a delimited input file.
//
// Either list columns explicitly or give a prefix ending in '*'
// (e.g. "Z*"). Defaults match the files written by write_dataset.
struct Schema
{
    std::string exposure = "A";
    std::string outcome = "Y";
    std::vector<std::string> snps = {"Z*"};
    std::vector<std::string> covariates = {"X*"};

    // "exposure=A;outcome=Y;snps=Z*;covariates=age,sex" (';' or newlines).
    static Schema parse(const std::string& text);
    // Reads a file containing the same key=value text.
    static Schema from_file(const std::filesystem::path& path);
};

// Reads comma- or tab-delimited text (auto-detected from the header line).
Dataset load_dataset(const std::filesystem::path& path, const Schema& schema = {});

// Parses already-loaded text; `source` is only used in messages.
Dataset parse_dataset(const std::string& text, const Schema& schema = {}, const std::string& source = "<memory>");

// Writes a CSV readable by load_dataset with the default schema. Values are
// written in shortest round-trip form so reloading is exact.
void write_dataset(const std::filesystem::path& path, const Dataset& d);

// Genotype-only delimited file (every column a SNP, values in {0, 1, 2});
// the pool that custom simulations resample rows from.
Matrix load_genotypes(const std::filesystem::path& path);

nlohmann::json summarize_json(const Dataset& d);

// Screen for the exposure heteroscedasticity that identification needs.
struct HeteroscedasticityScreen
{
    Vector cov_estimates;       // sample Cov(Z_j, squared residual of A on (X, Z))
    double test_statistic = 0;  // Koenker studentized Breusch-Pagan LM
    double degrees_of_freedom = 0;
    double p_value = 1;
};

HeteroscedasticityScreen heteroscedasticity_screen(const Dataset& d);

nlohmann::json to_json(const HeteroscedasticityScreen& s);

} // namespace mawii
