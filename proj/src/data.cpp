#include <mawii/data.hpp>
#include <mawii/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mawii {

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view line, char delim)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

bool matches(const std::string& pattern, const std::string& name)
{
    if (!pattern.empty() && pattern.back() == '*') {
        return name.compare(0, pattern.size() - 1, pattern, 0, pattern.size() - 1) == 0;
    }
    return pattern == name;
}

bool is_missing_token(const std::string& s)
{
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "." || s == "null";
}

std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace

Dataset::Dataset(Matrix genotypes, Matrix covariates, Vector exposure, Vector outcome,
                 std::vector<std::string> snp_names, std::vector<std::string> covariate_names)
    : Z_(std::move(genotypes)), X_(std::move(covariates)), A_(std::move(exposure)), Y_(std::move(outcome)),
      snp_names_(std::move(snp_names)), covariate_names_(std::move(covariate_names))
{
    const auto n = Z_.rows();
    if (X_.rows() != n || A_.size() != n || Y_.size() != n) {
        throw input_error("dataset components have inconsistent row counts",
                          {{"Z", Z_.rows()}, {"X", X_.rows()}, {"A", A_.size()}, {"Y", Y_.size()}});
    }
    if (Z_.cols() < 1) throw input_error("dataset needs at least one SNP column");
    if (X_.cols() < 1) throw input_error("covariate matrix must contain the intercept column");

    if (snp_names_.empty()) {
        for (Eigen::Index j = 0; j < Z_.cols(); ++j) snp_names_.push_back("Z" + std::to_string(j + 1));
    }
    if (covariate_names_.empty()) {
        covariate_names_.push_back("(intercept)");
        for (Eigen::Index k = 1; k < X_.cols(); ++k) covariate_names_.push_back("X" + std::to_string(k));
    }
    if (static_cast<Eigen::Index>(snp_names_.size()) != Z_.cols() ||
        static_cast<Eigen::Index>(covariate_names_.size()) != X_.cols()) {
        throw input_error("column name count does not match matrix width");
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        if (X_(i, 0) != 1.0) {
            throw input_error("column 0 of X must be the intercept (all ones)", {{"row", i + 1}});
        }
        for (Eigen::Index j = 0; j < Z_.cols(); ++j) {
            const double z = Z_(i, j);
            if (z != 0.0 && z != 1.0 && z != 2.0) {
                throw input_error("genotype entry outside {0,1,2} at row " + std::to_string(i + 1) +
                                      ", column " + snp_names_[j],
                                  {{"row", i + 1}, {"column", snp_names_[j]}, {"value", z}});
            }
        }
        for (Eigen::Index k = 0; k < X_.cols(); ++k) {
            if (!std::isfinite(X_(i, k))) {
                throw input_error("missing or non-finite covariate", {{"row", i + 1}, {"column", covariate_names_[k]}});
            }
        }
        if (!std::isfinite(A_(i)) || !std::isfinite(Y_(i))) {
            throw input_error("missing or non-finite exposure/outcome", {{"row", i + 1}});
        }
    }

    nlohmann::json constant = nlohmann::json::array();
    for (Eigen::Index j = 0; j < Z_.cols(); ++j) {
        if ((Z_.col(j).array() == Z_(0, j)).all()) constant.push_back(snp_names_[j]);
    }
    if (!constant.empty()) {
        throw input_error("monomorphic SNP columns: " + constant.dump(), {{"monomorphic_columns", constant}});
    }

    if (n <= Z_.cols() + X_.cols()) {
        throw input_error("need n > m + d_x", {{"n", n}, {"m", Z_.cols()}, {"d_x", X_.cols()}});
    }
}

Dataset Dataset::with_intercept(Matrix genotypes, const Matrix& covariates, Vector exposure, Vector outcome,
                                std::vector<std::string> snp_names, std::vector<std::string> covariate_names)
{
    const auto n = genotypes.rows();
    if (covariates.rows() != n && covariates.cols() > 0) {
        throw input_error("covariate rows do not match genotype rows");
    }
    Matrix X(n, covariates.cols() + 1);
    X.col(0).setOnes();
    if (covariates.cols() > 0) X.rightCols(covariates.cols()) = covariates;
    std::vector<std::string> names;
    if (!covariate_names.empty()) {
        names.push_back("(intercept)");
        names.insert(names.end(), covariate_names.begin(), covariate_names.end());
    }
    return Dataset(std::move(genotypes), std::move(X), std::move(exposure), std::move(outcome),
                   std::move(snp_names), std::move(names));
}

Matrix Dataset::full_design() const
{
    Matrix W(n(), d_x() + m());
    W.leftCols(d_x()) = X_;
    W.rightCols(m()) = Z_;
    return W;
}

std::vector<std::string> Dataset::full_design_names() const
{
    auto names = covariate_names_;
    names.insert(names.end(), snp_names_.begin(), snp_names_.end());
    return names;
}

bool Dataset::operator==(const Dataset& other) const
{
    return Z_ == other.Z_ && X_ == other.X_ && A_ == other.A_ && Y_ == other.Y_ &&
           snp_names_ == other.snp_names_ && covariate_names_ == other.covariate_names_;
}

Schema Schema::parse(const std::string& text)
{
    Schema s;
    std::string normalized = text;
    std::replace(normalized.begin(), normalized.end(), '\n', ';');
    std::stringstream ss(normalized);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty() || item[0] == '#') continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw input_error("schema entry without '=': " + item);
        const auto key = trim(item.substr(0, eq));
        const auto value = trim(item.substr(eq + 1));
        auto list = [&] {
            std::vector<std::string> out;
            for (auto& v : split(value, ',')) {
                if (!v.empty()) out.push_back(v);
            }
            return out;
        };
        if (key == "exposure") {
            s.exposure = value;
        } else if (key == "outcome") {
            s.outcome = value;
        } else if (key == "snps") {
            s.snps = list();
        } else if (key == "covariates") {
            s.covariates = list();
        } else {
            throw input_error("unknown schema key: " + key);
        }
    }
    return s;
}

Schema Schema::from_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw input_error("cannot open schema file: " + path.string(), {{"path", path.string()}});
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open input file: " + path.string(), {{"path", path.string()}});
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), schema, path.string());
}

Dataset parse_dataset(const std::string& text, const Schema& schema, const std::string& source)
{
    std::vector<std::string_view> lines;
    {
        std::string_view all(text);
        std::size_t start = 0;
        while (start < all.size()) {
            auto pos = all.find('\n', start);
            if (pos == std::string_view::npos) pos = all.size();
            lines.push_back(all.substr(start, pos - start));
            start = pos + 1;
        }
        while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    }
    if (lines.empty()) throw input_error("input is empty: " + source, {{"path", source}});

    const char delim = lines[0].find('\t') != std::string_view::npos ? '\t' : ',';
    const auto header = split(lines[0], delim);
    const auto ncol = header.size();

    auto find_column = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw input_error("column '" + name + "' not found in header", {{"column", name}, {"path", source}});
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto exposure_col = find_column(schema.exposure);
    const auto outcome_col = find_column(schema.outcome);

    std::vector<bool> taken(ncol, false);
    taken[exposure_col] = taken[outcome_col] = true;
    auto expand = [&](const std::vector<std::string>& patterns, bool required_each) {
        std::vector<std::size_t> cols;
        for (const auto& p : patterns) {
            bool any = false;
            for (std::size_t c = 0; c < ncol; ++c) {
                if (!taken[c] && matches(p, header[c])) {
                    cols.push_back(c);
                    taken[c] = true;
                    any = true;
                }
            }
            if (!any && required_each && p.back() != '*') {
                throw input_error("column '" + p + "' not found in header", {{"column", p}, {"path", source}});
            }
        }
        return cols;
    };
    const auto snp_cols = expand(schema.snps, true);
    const auto cov_cols = expand(schema.covariates, true);
    if (snp_cols.empty()) throw input_error("schema selects no SNP columns", {{"path", source}});

    const auto n = static_cast<Eigen::Index>(lines.size() - 1);
    Matrix Z(n, static_cast<Eigen::Index>(snp_cols.size()));
    Matrix C(n, static_cast<Eigen::Index>(cov_cols.size()));
    Vector A(n);
    Vector Y(n);

    std::vector<double> row(ncol, 0.0);
    std::vector<bool> needed(ncol, false);
    needed[exposure_col] = needed[outcome_col] = true;
    for (auto c : snp_cols) needed[c] = true;
    for (auto c : cov_cols) needed[c] = true;

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto line_no = static_cast<long>(i) + 2;
        const auto fields = split(lines[static_cast<std::size_t>(i) + 1], delim);
        if (fields.size() != ncol) {
            throw input_error("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                  " fields, header has " + std::to_string(ncol),
                              {{"line", line_no}, {"row", i + 1}, {"path", source}});
        }
        for (std::size_t c = 0; c < ncol; ++c) {
            if (!needed[c]) continue;
            const auto& f = fields[c];
            nlohmann::json where = {{"line", line_no}, {"row", i + 1}, {"column", header[c]}, {"path", source}};
            if (is_missing_token(f)) {
                throw input_error("missing value at row " + std::to_string(i + 1) + ", column " + header[c], where);
            }
            double v = 0.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v)) {
                where["value"] = f;
                throw input_error("non-numeric value '" + f + "' at row " + std::to_string(i + 1) + ", column " +
                                      header[c],
                                  where);
            }
            row[c] = v;
        }
        for (std::size_t k = 0; k < snp_cols.size(); ++k) {
            const double z = row[snp_cols[k]];
            if (z != 0.0 && z != 1.0 && z != 2.0) {
                throw input_error("genotype value " + fields[snp_cols[k]] + " outside {0,1,2} at row " +
                                      std::to_string(i + 1) + ", column " + header[snp_cols[k]],
                                  {{"line", line_no},
                                   {"row", i + 1},
                                   {"column", header[snp_cols[k]]},
                                   {"value", z},
                                   {"path", source}});
            }
            Z(i, static_cast<Eigen::Index>(k)) = z;
        }
        for (std::size_t k = 0; k < cov_cols.size(); ++k) C(i, static_cast<Eigen::Index>(k)) = row[cov_cols[k]];
        A(i) = row[exposure_col];
        Y(i) = row[outcome_col];
    }

    std::vector<std::string> snp_names;
    for (auto c : snp_cols) snp_names.push_back(header[c]);
    std::vector<std::string> cov_names;
    for (auto c : cov_cols) cov_names.push_back(header[c]);
    if (cov_names.empty()) {
        return Dataset::with_intercept(std::move(Z), C, std::move(A), std::move(Y), std::move(snp_names));
    }
    return Dataset::with_intercept(std::move(Z), C, std::move(A), std::move(Y), std::move(snp_names),
                                   std::move(cov_names));
}

Matrix load_genotypes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open genotype file: " + path.string(), {{"path", path.string()}});
    std::string line;
    if (!std::getline(in, line)) throw input_error("genotype file is empty", {{"path", path.string()}});
    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto header = split(line, delim);

    std::vector<double> values;
    long line_no = 1;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line, delim);
        if (fields.size() != header.size()) {
            throw input_error("line " + std::to_string(line_no) + " has the wrong number of fields",
                              {{"line", line_no}, {"path", path.string()}});
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const auto& f = fields[c];
            double v = -1.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc() || res.ptr != f.data() + f.size() || (v != 0.0 && v != 1.0 && v != 2.0)) {
                throw input_error("genotype value '" + f + "' outside {0,1,2} at line " + std::to_string(line_no) +
                                      ", column " + header[c],
                                  {{"line", line_no}, {"column", header[c]}, {"value", f}, {"path", path.string()}});
            }
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw input_error("genotype file has no rows", {{"path", path.string()}});
    const auto cols = static_cast<Eigen::Index>(header.size());
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(),
                                                                                                      rows, cols);
}

void write_dataset(const std::filesystem::path& path, const Dataset& d)
{
    std::ofstream out(path);
    if (!out) throw input_error("cannot write dataset file: " + path.string(), {{"path", path.string()}});
    for (const auto& s : d.snp_names()) out << s << ',';
    for (std::size_t k = 1; k < d.covariate_names().size(); ++k) out << d.covariate_names()[k] << ',';
    out << "A,Y\n";
    std::string line;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        line.clear();
        for (Eigen::Index j = 0; j < d.m(); ++j) {
            line += static_cast<char>('0' + static_cast<int>(d.Z()(i, j)));
            line += ',';
        }
        for (Eigen::Index k = 1; k < d.d_x(); ++k) {
            line += format_double(d.X()(i, k));
            line += ',';
        }
        line += format_double(d.A()(i));
        line += ',';
        line += format_double(d.Y()(i));
        line += '\n';
        out << line;
    }
    if (!out) throw input_error("failed writing dataset file: " + path.string());
}

nlohmann::json summarize_json(const Dataset& d)
{
    const double n = static_cast<double>(d.n());
    Vector freq = d.Z().colwise().mean() / 2.0;
    auto var = [&](const Vector& v) { return (v.array() - v.mean()).square().sum() / (n - 1.0); };
    return {
        {"n", d.n()},
        {"m", d.m()},
        {"d_x", d.d_x()},
        {"snps", d.snp_names()},
        {"covariates", d.covariate_names()},
        {"exposure", {{"mean", d.A().mean()}, {"variance", var(d.A())}}},
        {"outcome", {{"mean", d.Y().mean()}, {"variance", var(d.Y())}}},
        {"allele_frequency", {{"min", freq.minCoeff()}, {"max", freq.maxCoeff()}}},
    };
}

HeteroscedasticityScreen heteroscedasticity_screen(const Dataset& d)
{
    const LeastSquares full(d.full_design(), d.full_design_names());
    const Vector resid = full.residuals(d.A());
    const Vector e2 = resid.array().square();
    const double n = static_cast<double>(d.n());

    HeteroscedasticityScreen s;
    const Vector e2c = e2.array() - e2.mean();
    s.cov_estimates.resize(d.m());
    for (Eigen::Index j = 0; j < d.m(); ++j) {
        const Vector zc = d.Z().col(j).array() - d.Z().col(j).mean();
        s.cov_estimates(j) = zc.dot(e2c) / (n - 1.0);
    }

    // Koenker: n * (RSS_X - RSS_XZ) / TSS of the auxiliary regression of the
    // squared residuals, which is n R^2 when X is the intercept alone.
    const double tss = e2c.squaredNorm();
    const double rss_full = full.residuals(e2).squaredNorm();
    const double rss_restricted = d.d_x() == 1 ? tss : LeastSquares(d.X(), d.covariate_names()).residuals(e2).squaredNorm();
    s.degrees_of_freedom = static_cast<double>(d.m());
    s.test_statistic = tss > 0.0 ? n * (rss_restricted - rss_full) / tss : 0.0;
    s.p_value = chi_squared_sf(s.test_statistic, s.degrees_of_freedom);
    return s;
}

nlohmann::json to_json(const HeteroscedasticityScreen& s)
{
    return {
        {"cov_estimates", std::vector<double>(s.cov_estimates.begin(), s.cov_estimates.end())},
        {"test_statistic", s.test_statistic},
        {"degrees_of_freedom", s.degrees_of_freedom},
        {"p_value", s.p_value},
    };
}

} // namespace mawii
