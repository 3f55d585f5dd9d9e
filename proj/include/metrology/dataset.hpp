#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace metrology {

// Column header of the form Construct.Metric[.Tool], e.g. "Size.LOC.Designite".
// Headers with more than three segments fold the middle segments into the
// metric name, so "A.b.c.Tool" parses as {A, b.c, Tool}.
struct MetricName {
    std::string construct;
    std::string metric;
    std::optional<std::string> tool;
    std::string raw;

    static MetricName parse(std::string_view header);

    bool operator==(const MetricName& other) const { return raw == other.raw; }
    auto operator<=>(const MetricName& other) const { return raw <=> other.raw; }
};

enum class MissingPolicy { listwise, pairwise };

std::string to_string(MissingPolicy policy);
MissingPolicy missing_policy_from_string(std::string_view text);

struct ParseOptions {
    char delimiter = ',';
    // Reject any non-empty cell that is not a number instead of marking it missing.
    bool strict = false;
};

// Entities x metrics table. Missing cells hold NaN and are flagged in `missing`.
// Immutable after construction; transformations return new values.
class MetricDataset {
public:
    MetricDataset() = default;
    MetricDataset(std::vector<std::string> entity_ids, std::vector<MetricName> columns,
                  Eigen::MatrixXd values, Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing,
                  std::vector<std::string> provenance = {});

    // Builds a complete dataset (no missing cells) from raw headers.
    static MetricDataset from_matrix(const std::vector<std::string>& headers, const Eigen::MatrixXd& values);

    std::size_t n_entities() const { return entity_ids_.size(); }
    std::size_t n_metrics() const { return columns_.size(); }

    const std::vector<std::string>& entity_ids() const { return entity_ids_; }
    const std::vector<MetricName>& columns() const { return columns_; }
    const Eigen::MatrixXd& values() const { return values_; }
    const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& missing() const { return missing_; }
    const std::vector<std::string>& provenance() const { return provenance_; }

    bool is_missing(std::size_t row, std::size_t col) const { return missing_(row, col); }

    // Throws validation_error("unknown_metric") if absent.
    std::size_t index_of(std::string_view raw_name) const;
    std::optional<std::size_t> find(std::string_view raw_name) const;

    // Column subset in the given order.
    MetricDataset select(std::span<const std::string> raw_names) const;
    // All columns except the given ones (order preserved).
    MetricDataset without(std::span<const std::string> raw_names) const;

    // Rows with no missing cell, as a dense matrix.
    Eigen::MatrixXd complete_cases() const;

    std::vector<std::string> metric_names() const;

private:
    std::vector<std::string> entity_ids_;
    std::vector<MetricName> columns_;
    Eigen::MatrixXd values_;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing_;
    std::vector<std::string> provenance_;
};

MetricDataset load_dataset(std::istream& source, const ParseOptions& options = {});
MetricDataset load_dataset_file(const std::string& path, const ParseOptions& options = {});
MetricDataset parse_dataset(std::string_view text, const ParseOptions& options = {});

// Canonical echo: header row "id,<raw names>", empty cells for missing values,
// numbers in shortest round-trip form.
void write_dataset(std::ostream& out, const MetricDataset& ds, char delimiter = ',');

struct Reflection {
    double min;
    double max;
};

// Negate (x -> -x) when `reflect` is empty, otherwise x -> min + max - x.
MetricDataset invert_reversed(const MetricDataset& ds, std::span<const std::string> metrics,
                              std::optional<Reflection> reflect = std::nullopt);

struct CorrelationMatrix {
    std::vector<MetricName> labels;
    Eigen::MatrixXd r;
    // Complete-case count (listwise) or the smallest per-pair count (pairwise).
    std::size_t n_used = 0;
    MissingPolicy missing_policy = MissingPolicy::listwise;
    // Per-pair counts; only filled for the pairwise policy.
    Eigen::MatrixXi pair_counts;
    std::vector<std::string> warnings;

    std::size_t size() const { return labels.size(); }
    std::vector<std::string> names() const;
};

CorrelationMatrix correlation_matrix(const MetricDataset& ds, MissingPolicy policy = MissingPolicy::listwise);

// Pearson correlation over a dense matrix (no missing cells).
Eigen::MatrixXd pearson(const Eigen::MatrixXd& x);

void write_correlations(std::ostream& out, const CorrelationMatrix& cm, char delimiter = ',');

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

}  // namespace metrology
