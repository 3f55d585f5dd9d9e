#include "metrology/dataset.hpp"

#include "metrology/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace metrology {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Splits one record. Double quotes group fields and "" escapes a quote.
std::vector<std::string> split_record(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            fields.push_back(std::string(trim(field)));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(std::string(trim(field)));
    return fields;
}

std::optional<double> parse_number(std::string_view text) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
    return value;
}

}  // namespace

MetricName MetricName::parse(std::string_view header) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto dot = header.find('.', start);
        parts.emplace_back(header.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    if (parts.size() < 2) {
        throw validation_error("bad_metric_name",
                               "column '" + std::string(header) + "' is not of the form Construct.Metric[.Tool]");
    }
    for (const auto& p : parts) {
        if (p.empty()) {
            throw validation_error("bad_metric_name", "column '" + std::string(header) + "' has an empty segment");
        }
    }
    MetricName name;
    name.raw = std::string(header);
    name.construct = parts.front();
    if (parts.size() == 2) {
        name.metric = parts[1];
    } else {
        name.tool = parts.back();
        name.metric = parts[1];
        for (std::size_t i = 2; i + 1 < parts.size(); ++i) name.metric += "." + parts[i];
    }
    return name;
}

std::string to_string(MissingPolicy policy) {
    return policy == MissingPolicy::listwise ? "listwise" : "pairwise";
}

MissingPolicy missing_policy_from_string(std::string_view text) {
    if (text == "listwise") return MissingPolicy::listwise;
    if (text == "pairwise") return MissingPolicy::pairwise;
    throw validation_error("bad_missing_policy", "missing policy must be 'listwise' or 'pairwise'");
}

MetricDataset::MetricDataset(std::vector<std::string> entity_ids, std::vector<MetricName> columns,
                             Eigen::MatrixXd values, Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing,
                             std::vector<std::string> provenance)
    : entity_ids_(std::move(entity_ids)),
      columns_(std::move(columns)),
      values_(std::move(values)),
      missing_(std::move(missing)),
      provenance_(std::move(provenance)) {
    const auto n = static_cast<Eigen::Index>(entity_ids_.size());
    const auto p = static_cast<Eigen::Index>(columns_.size());
    if (values_.rows() != n || values_.cols() != p || missing_.rows() != n || missing_.cols() != p) {
        throw validation_error("shape_mismatch", "dataset values do not match entity and column counts");
    }
    std::set<std::string> seen;
    for (const auto& c : columns_) {
        if (!seen.insert(c.raw).second) {
            throw validation_error("duplicate_column", "duplicate column name '" + c.raw + "'");
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            if (missing_(i, j)) {
                values_(i, j) = kNaN;
            } else if (!std::isfinite(values_(i, j))) {
                throw validation_error("non_finite", "non-finite value in column '" + columns_[j].raw + "'");
            }
        }
    }
}

MetricDataset MetricDataset::from_matrix(const std::vector<std::string>& headers, const Eigen::MatrixXd& values) {
    std::vector<MetricName> columns;
    columns.reserve(headers.size());
    for (const auto& h : headers) columns.push_back(MetricName::parse(h));
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(values.rows()));
    for (Eigen::Index i = 0; i < values.rows(); ++i) ids.push_back(std::to_string(i + 1));
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(values.rows(), values.cols(), false);
    return MetricDataset(std::move(ids), std::move(columns), values, std::move(missing));
}

std::optional<std::size_t> MetricDataset::find(std::string_view raw_name) const {
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        if (columns_[j].raw == raw_name) return j;
    }
    return std::nullopt;
}

std::size_t MetricDataset::index_of(std::string_view raw_name) const {
    if (auto j = find(raw_name)) return *j;
    throw validation_error("unknown_metric", "unknown metric '" + std::string(raw_name) + "'");
}

MetricDataset MetricDataset::select(std::span<const std::string> raw_names) const {
    std::vector<std::size_t> idx;
    idx.reserve(raw_names.size());
    for (const auto& name : raw_names) idx.push_back(index_of(name));
    const auto n = static_cast<Eigen::Index>(n_entities());
    Eigen::MatrixXd v(n, static_cast<Eigen::Index>(idx.size()));
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> m(n, static_cast<Eigen::Index>(idx.size()));
    std::vector<MetricName> cols;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        v.col(static_cast<Eigen::Index>(k)) = values_.col(static_cast<Eigen::Index>(idx[k]));
        m.col(static_cast<Eigen::Index>(k)) = missing_.col(static_cast<Eigen::Index>(idx[k]));
        cols.push_back(columns_[idx[k]]);
    }
    return MetricDataset(entity_ids_, std::move(cols), std::move(v), std::move(m), provenance_);
}

MetricDataset MetricDataset::without(std::span<const std::string> raw_names) const {
    for (const auto& name : raw_names) index_of(name);
    std::vector<std::string> keep;
    for (const auto& c : columns_) {
        if (std::find(raw_names.begin(), raw_names.end(), c.raw) == raw_names.end()) keep.push_back(c.raw);
    }
    return select(keep);
}

Eigen::MatrixXd MetricDataset::complete_cases() const {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        if (!missing_.row(i).any()) rows.push_back(i);
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), values_.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = values_.row(rows[r]);
    return out;
}

std::vector<std::string> MetricDataset::metric_names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.raw);
    return out;
}

MetricDataset load_dataset(std::istream& source, const ParseOptions& options) {
    std::string line;
    std::vector<std::string> header;
    while (std::getline(source, line)) {
        if (!trim(line).empty()) {
            header = split_record(line, options.delimiter);
            break;
        }
    }
    if (header.empty()) throw validation_error("missing_header", "input has no header row");
    if (header.size() < 2) throw validation_error("missing_header", "header must name an id column and at least one metric");
    if (!header.front().empty() && header.front().substr(0, 3) == "\xEF\xBB\xBF") header.front().erase(0, 3);

    std::vector<MetricName> columns;
    std::set<std::string> seen;
    for (std::size_t j = 1; j < header.size(); ++j) {
        if (!seen.insert(header[j]).second) {
            throw validation_error("duplicate_column", "duplicate column name '" + header[j] + "'");
        }
        columns.push_back(MetricName::parse(header[j]));
    }
    const std::size_t p = columns.size();

    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> cells;
    std::size_t line_no = 1;
    while (std::getline(source, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_record(line, options.delimiter);
        if (fields.size() != p + 1) {
            throw validation_error("ragged_row", "line " + std::to_string(line_no) + " has " +
                                                     std::to_string(fields.size()) + " fields, expected " +
                                                     std::to_string(p + 1));
        }
        ids.push_back(std::move(fields.front()));
        fields.erase(fields.begin());
        cells.push_back(std::move(fields));
    }
    if (ids.empty()) throw validation_error("no_rows", "input has a header but no data rows");

    const auto n = static_cast<Eigen::Index>(ids.size());
    Eigen::MatrixXd values(n, static_cast<Eigen::Index>(p));
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing(n, static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
        std::size_t non_empty = 0;
        std::size_t numeric = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto& text = cells[i][j];
            const auto r = static_cast<Eigen::Index>(i);
            const auto c = static_cast<Eigen::Index>(j);
            if (text.empty()) {
                values(r, c) = kNaN;
                missing(r, c) = true;
                continue;
            }
            ++non_empty;
            if (auto v = parse_number(text)) {
                ++numeric;
                values(r, c) = *v;
                missing(r, c) = false;
            } else if (options.strict) {
                throw validation_error("unparseable_cell", "row '" + ids[i] + "', column '" + columns[j].raw +
                                                               "': cannot parse '" + text + "' as a number");
            } else {
                values(r, c) = kNaN;
                missing(r, c) = true;
            }
        }
        if (non_empty > 0 && numeric == 0) {
            throw validation_error("categorical_column",
                                   "column '" + columns[j].raw + "' is not numeric; recode it before loading");
        }
    }
    return MetricDataset(std::move(ids), std::move(columns), std::move(values), std::move(missing));
}

MetricDataset load_dataset_file(const std::string& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw validation_error("io_error", "cannot open '" + path + "'");
    return load_dataset(in, options);
}

MetricDataset parse_dataset(std::string_view text, const ParseOptions& options) {
    std::istringstream in{std::string(text)};
    return load_dataset(in, options);
}

std::string format_double(double value) {
    if (!std::isfinite(value)) return "";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

void write_dataset(std::ostream& out, const MetricDataset& ds, char delimiter) {
    out << "id";
    for (const auto& c : ds.columns()) out << delimiter << c.raw;
    out << '\n';
    for (std::size_t i = 0; i < ds.n_entities(); ++i) {
        out << ds.entity_ids()[i];
        for (std::size_t j = 0; j < ds.n_metrics(); ++j) {
            out << delimiter;
            if (!ds.is_missing(i, j)) out << format_double(ds.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        out << '\n';
    }
}

MetricDataset invert_reversed(const MetricDataset& ds, std::span<const std::string> metrics,
                              std::optional<Reflection> reflect) {
    if (reflect && !(std::isfinite(reflect->min) && std::isfinite(reflect->max) && reflect->min <= reflect->max)) {
        throw validation_error("bad_bounds", "reflection bounds must be finite with min <= max");
    }
    Eigen::MatrixXd values = ds.values();
    auto provenance = ds.provenance();
    for (const auto& name : metrics) {
        const auto j = static_cast<Eigen::Index>(ds.index_of(name));
        for (Eigen::Index i = 0; i < values.rows(); ++i) {
            if (ds.missing()(i, j)) continue;
            double& x = values(i, j);
            if (reflect) {
                if (x < reflect->min || x > reflect->max) {
                    throw validation_error("out_of_bounds", "value " + format_double(x) + " in '" + name +
                                                                "' lies outside the reflection bounds");
                }
                x = reflect->min + reflect->max - x;
            } else {
                x = -x;
            }
        }
        provenance.push_back(reflect ? "reflect(" + format_double(reflect->min) + "," + format_double(reflect->max) +
                                           "):" + name
                                     : "negate:" + name);
    }
    return MetricDataset(ds.entity_ids(), ds.columns(), std::move(values), ds.missing(), std::move(provenance));
}

std::vector<std::string> CorrelationMatrix::names() const {
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(l.raw);
    return out;
}

namespace {

void finish_correlation(Eigen::MatrixXd& r) {
    const auto p = r.rows();
    for (Eigen::Index i = 0; i < p; ++i) {
        r(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = std::clamp(0.5 * (r(i, j) + r(j, i)), -1.0, 1.0);
            r(i, j) = v;
            r(j, i) = v;
        }
    }
}

}  // namespace

Eigen::MatrixXd pearson(const Eigen::MatrixXd& x) {
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    Eigen::MatrixXd cov = centered.transpose() * centered;
    const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    Eigen::MatrixXd r = cov.array() / (sd * sd.transpose()).array();
    finish_correlation(r);
    return r;
}

CorrelationMatrix correlation_matrix(const MetricDataset& ds, MissingPolicy policy) {
    CorrelationMatrix cm;
    cm.labels = ds.columns();
    cm.missing_policy = policy;
    const auto p = static_cast<Eigen::Index>(ds.n_metrics());
    if (p == 0) throw validation_error("no_metrics", "dataset has no metric columns");

    if (policy == MissingPolicy::listwise) {
        const Eigen::MatrixXd x = ds.complete_cases();
        if (x.rows() < 3) {
            throw validation_error("insufficient_cases",
                                   "need at least 3 complete cases, have " + std::to_string(x.rows()));
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            if ((x.col(j).array() == x(0, j)).all()) {
                throw validation_error("constant_column", "column '" + ds.columns()[j].raw + "' has zero variance");
            }
        }
        cm.r = pearson(x);
        cm.n_used = static_cast<std::size_t>(x.rows());
        return cm;
    }

    const auto& v = ds.values();
    const auto& miss = ds.missing();
    cm.r = Eigen::MatrixXd::Identity(p, p);
    cm.pair_counts = Eigen::MatrixXi::Zero(p, p);
    std::size_t min_count = std::numeric_limits<std::size_t>::max();
    for (Eigen::Index j = 0; j < p; ++j) {
        double first = 0.0;
        bool have = false;
        bool varies = false;
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            if (miss(i, j)) continue;
            if (!have) {
                first = v(i, j);
                have = true;
            } else if (v(i, j) != first) {
                varies = true;
            }
        }
        if (!varies) throw validation_error("constant_column", "column '" + ds.columns()[j].raw + "' has zero variance");
    }
    for (Eigen::Index a = 0; a < p; ++a) {
        for (Eigen::Index b = 0; b <= a; ++b) {
            std::vector<Eigen::Index> rows;
            for (Eigen::Index i = 0; i < v.rows(); ++i) {
                if (!miss(i, a) && !miss(i, b)) rows.push_back(i);
            }
            if (rows.size() < 3) {
                throw validation_error("insufficient_cases", "pair ('" + ds.columns()[a].raw + "', '" +
                                                                 ds.columns()[b].raw + "') has fewer than 3 complete cases");
            }
            min_count = std::min(min_count, rows.size());
            cm.pair_counts(a, b) = cm.pair_counts(b, a) = static_cast<int>(rows.size());
            if (a == b) continue;
            Eigen::MatrixXd pair(static_cast<Eigen::Index>(rows.size()), 2);
            for (std::size_t k = 0; k < rows.size(); ++k) {
                pair(static_cast<Eigen::Index>(k), 0) = v(rows[k], a);
                pair(static_cast<Eigen::Index>(k), 1) = v(rows[k], b);
            }
            if ((pair.col(0).array() == pair(0, 0)).all() || (pair.col(1).array() == pair(0, 1)).all()) {
                throw validation_error("constant_column", "pair ('" + ds.columns()[a].raw + "', '" +
                                                              ds.columns()[b].raw + "') has zero variance on shared cases");
            }
            const double r = pearson(pair)(0, 1);
            cm.r(a, b) = cm.r(b, a) = r;
        }
    }
    finish_correlation(cm.r);
    cm.n_used = min_count;
    Eigen::LLT<Eigen::MatrixXd> llt(cm.r);
    if (llt.info() != Eigen::Success) {
        cm.warnings.push_back("pairwise correlation matrix is not positive definite");
    }
    return cm;
}

void write_correlations(std::ostream& out, const CorrelationMatrix& cm, char delimiter) {
    out << "metric";
    for (const auto& l : cm.labels) out << delimiter << l.raw;
    out << '\n';
    for (std::size_t i = 0; i < cm.labels.size(); ++i) {
        out << cm.labels[i].raw;
        for (std::size_t j = 0; j < cm.labels.size(); ++j) {
            out << delimiter << format_double(cm.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        out << '\n';
    }
}

}  // namespace metrology
