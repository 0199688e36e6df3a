#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mfnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// Address of an independent random stream. Components are packed into 64
/// bits (layer: 12 bits, purpose: 12 bits, node: 40 bits) so distinct tags
/// map to distinct streams for a fixed seed.
struct StreamTag {
    std::uint64_t layer = 0;
    std::uint64_t node = 0;
    std::uint64_t purpose = 0;
};

namespace purpose {
inline constexpr std::uint64_t weights = 0;
inline constexpr std::uint64_t fallback = 1;
inline constexpr std::uint64_t mc_gram = 2;
inline constexpr std::uint64_t dataset = 3;
inline constexpr std::uint64_t labels = 4;
inline constexpr std::uint64_t replicate = 5;
} // namespace purpose

std::uint64_t split_stream(std::uint64_t seed, const StreamTag& tag);

/// Counter-based generator: the k-th output is a bijective 64-bit mix of
/// key + k * golden_gamma. Satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t key) : key_(key) {}
    Rng(std::uint64_t seed, const StreamTag& tag) : key_(split_stream(seed, tag)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()();

    /// Uniform on [0, 1).
    double uniform();
    double normal() { return normal_(*this); }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix64(std::uint64_t z);

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

struct Dataset {
    Matrix X;              // N x d, rows are samples
    Vector y;              // N
    double x_inf_bound = 0.0;
    bool non_parallel = false;

    Index n() const { return X.rows(); }
    Index d() const { return X.cols(); }

    /// Throws InvalidArgument when shapes, finiteness or the recorded bound
    /// are inconsistent.
    void validate() const;
};

enum class DatasetKind { gaussian_regression, two_cluster };

DatasetKind parse_dataset_kind(std::string_view s);
std::string to_string(DatasetKind kind);

Dataset make_synthetic_dataset(Index n, Index d, std::uint64_t seed, DatasetKind kind);

/// Exact pairwise check: no row is a scalar multiple of another (zero rows
/// count as parallel to everything).
bool rows_non_parallel(const Matrix& X);

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct RunRecord {
    std::size_t step = 0;
    double t = 0.0;
    double loss = 0.0;
    std::vector<double> max_weight;  // per weight layer 1..L+1
    std::vector<double> spread;      // per hidden layer 1..L (NaN if width < 2)
    double skip = std::numeric_limits<double>::quiet_NaN();

    bool operator==(const RunRecord& other) const;
};

enum class ResultFormat { csv, json };

void emit_results(const std::vector<RunRecord>& records, const std::filesystem::path& path,
                  ResultFormat format);
std::vector<RunRecord> read_results(const std::filesystem::path& path, ResultFormat format);

/// 17 significant digits; round-trips every finite double.
std::string format_number(double v);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& M);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct DatasetSpec {
    DatasetKind kind = DatasetKind::gaussian_regression;
    Index n = 8;
    Index d = 4;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::vector<Index> widths{64};
    Index depth = 3;
    double sigma1 = 1.0;
    double eta = 0.05;
    std::size_t steps = 0;
    std::string activation = "tanh";
    std::string loss = "pseudo_huber";
    DatasetSpec dataset;
    std::vector<Index> m_grid;
    std::map<std::string, double> tolerances;
    std::string output = "out";

    /// Throws InvalidArgument on violated invariants.
    void validate() const;

    double tolerance(const std::string& key, double fallback) const;
};

ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& config);

Dataset make_dataset(const ExperimentConfig& config);

} // namespace mfnet
