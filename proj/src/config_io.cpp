#include "mfnet/config_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mfnet/errors.hpp"

namespace mfnet {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t kLayerBits = 12;
constexpr std::uint64_t kPurposeBits = 12;
constexpr std::uint64_t kNodeBits = 40;

bool same_double(double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

bool same_vector(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!same_double(a[i], b[i])) return false;
    return true;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

double parse_number(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw InvalidArgument("not a number: '" + s + "'");
    return v;
}

nlohmann::json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

double from_number_or_null(const nlohmann::json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.get<double>();
}

} // namespace

// ---------------------------------------------------------------------------
// Randomness

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t split_stream(std::uint64_t seed, const StreamTag& tag) {
    if (tag.layer >= (1ULL << kLayerBits) || tag.purpose >= (1ULL << kPurposeBits) ||
        tag.node >= (1ULL << kNodeBits))
        throw InvalidArgument("stream tag component out of range");
    const std::uint64_t packed = (tag.layer << (kPurposeBits + kNodeBits)) |
                                 (tag.purpose << kNodeBits) | tag.node;
    return mix64(mix64(seed) ^ packed);
}

Rng::result_type Rng::operator()() {
    ++counter_;
    return mix64(key_ + counter_ * kGoldenGamma);
}

double Rng::uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Data

void Dataset::validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw InvalidArgument("dataset needs N >= 1 and d >= 1");
    if (y.size() != X.rows()) throw InvalidArgument("label count does not match sample count");
    if (!X.allFinite() || !y.allFinite()) throw InvalidArgument("dataset has non-finite entries");
    if (X.cwiseAbs().maxCoeff() != x_inf_bound)
        throw InvalidArgument("x_inf_bound does not match max |X|");
    if (non_parallel && !rows_non_parallel(X))
        throw InvalidArgument("non_parallel flag set but rows are parallel");
}

DatasetKind parse_dataset_kind(std::string_view s) {
    if (s == "gaussian_regression") return DatasetKind::gaussian_regression;
    if (s == "two_cluster") return DatasetKind::two_cluster;
    throw InvalidArgument("unknown dataset kind '" + std::string(s) + "'");
}

std::string to_string(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::gaussian_regression: return "gaussian_regression";
    case DatasetKind::two_cluster: return "two_cluster";
    }
    return "unknown";
}

bool rows_non_parallel(const Matrix& X) {
    const Index n = X.rows();
    const Index d = X.cols();
    for (Index a = 0; a < n; ++a) {
        for (Index b = a + 1; b < n; ++b) {
            bool parallel = true;
            for (Index p = 0; p < d && parallel; ++p)
                for (Index q = p + 1; q < d && parallel; ++q)
                    if (X(a, p) * X(b, q) - X(a, q) * X(b, p) != 0.0) parallel = false;
            // d == 1 leaves every pair parallel
            if (parallel) return false;
        }
    }
    return true;
}

Dataset make_synthetic_dataset(Index n, Index d, std::uint64_t seed, DatasetKind kind) {
    if (n < 1 || d < 1) throw InvalidArgument("make_synthetic_dataset: n and d must be >= 1");

    Dataset data;
    data.X.resize(n, d);
    data.y.resize(n);

    Rng label_rng(seed, {0, 0, purpose::labels});
    Vector direction(d);
    for (Index k = 0; k < d; ++k) direction(k) = label_rng.normal();

    switch (kind) {
    case DatasetKind::gaussian_regression: {
        for (Index i = 0; i < n; ++i) {
            Rng rng(seed, {0, static_cast<std::uint64_t>(i), purpose::dataset});
            for (Index k = 0; k < d; ++k) data.X(i, k) = rng.normal();
        }
        break;
    }
    case DatasetKind::two_cluster: {
        const double norm = direction.norm();
        const Vector center = norm > 0.0 ? Vector(direction / norm) : Vector::Ones(d);
        for (Index i = 0; i < n; ++i) {
            Rng rng(seed, {0, static_cast<std::uint64_t>(i), purpose::dataset});
            const double sign = (i % 2 == 0) ? 1.0 : -1.0;
            for (Index k = 0; k < d; ++k) data.X(i, k) = sign * center(k) + 0.3 * rng.normal();
            data.y(i) = sign;
        }
        break;
    }
    }

    const double scale = data.X.cwiseAbs().maxCoeff();
    if (scale > 0.0) data.X /= scale;
    data.x_inf_bound = data.X.cwiseAbs().maxCoeff();

    if (kind == DatasetKind::gaussian_regression) {
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
        for (Index i = 0; i < n; ++i)
            data.y(i) = std::tanh(2.0 * inv_sqrt_d * data.X.row(i).dot(direction));
    }

    data.non_parallel = rows_non_parallel(data.X);
    return data;
}

// ---------------------------------------------------------------------------
// Records

bool RunRecord::operator==(const RunRecord& other) const {
    return step == other.step && same_double(t, other.t) && same_double(loss, other.loss) &&
           same_vector(max_weight, other.max_weight) && same_vector(spread, other.spread) &&
           same_double(skip, other.skip);
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing", path.string());
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_number(row[c]);
        out << '\n';
    }
    if (!out) throw IoError("write failed", path.string());
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& M) {
    std::vector<std::string> header;
    for (Index c = 0; c < M.cols(); ++c) header.push_back("c" + std::to_string(c));
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(M.rows()));
    for (Index r = 0; r < M.rows(); ++r)
        for (Index c = 0; c < M.cols(); ++c) rows[static_cast<std::size_t>(r)].push_back(M(r, c));
    write_csv(path, header, rows);
}

void emit_results(const std::vector<RunRecord>& records, const std::filesystem::path& path,
                  ResultFormat format) {
    if (records.empty()) throw InvalidArgument("emit_results: no records");
    const std::size_t n_weight = records.front().max_weight.size();
    const std::size_t n_spread = records.front().spread.size();
    for (const auto& r : records)
        if (r.max_weight.size() != n_weight || r.spread.size() != n_spread)
            throw InvalidArgument("emit_results: records have inconsistent layer counts");

    if (format == ResultFormat::csv) {
        std::vector<std::string> header{"step", "t", "loss"};
        for (std::size_t l = 0; l < n_weight; ++l) header.push_back("max_weight_" + std::to_string(l + 1));
        for (std::size_t l = 0; l < n_spread; ++l) header.push_back("spread_" + std::to_string(l + 1));
        header.push_back("skip");
        std::vector<std::vector<double>> rows;
        rows.reserve(records.size());
        for (const auto& r : records) {
            std::vector<double> row{static_cast<double>(r.step), r.t, r.loss};
            row.insert(row.end(), r.max_weight.begin(), r.max_weight.end());
            row.insert(row.end(), r.spread.begin(), r.spread.end());
            row.push_back(r.skip);
            rows.push_back(std::move(row));
        }
        write_csv(path, header, rows);
        return;
    }

    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json mw = nlohmann::json::array();
        for (double v : r.max_weight) mw.push_back(number_or_null(v));
        nlohmann::json sp = nlohmann::json::array();
        for (double v : r.spread) sp.push_back(number_or_null(v));
        arr.push_back({{"step", r.step},
                       {"t", r.t},
                       {"loss", number_or_null(r.loss)},
                       {"max_weight", mw},
                       {"spread", sp},
                       {"skip", number_or_null(r.skip)}});
    }
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing", path.string());
    out << arr.dump(2) << '\n';
    if (!out) throw IoError("write failed", path.string());
}

std::vector<RunRecord> read_results(const std::filesystem::path& path, ResultFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading", path.string());
    std::vector<RunRecord> records;

    if (format == ResultFormat::json) {
        const nlohmann::json arr = nlohmann::json::parse(in);
        for (const auto& j : arr) {
            RunRecord r;
            r.step = j.at("step").get<std::size_t>();
            r.t = j.at("t").get<double>();
            r.loss = from_number_or_null(j.at("loss"));
            for (const auto& v : j.at("max_weight")) r.max_weight.push_back(from_number_or_null(v));
            for (const auto& v : j.at("spread")) r.spread.push_back(from_number_or_null(v));
            r.skip = from_number_or_null(j.at("skip"));
            records.push_back(std::move(r));
        }
        return records;
    }

    std::string line;
    if (!std::getline(in, line)) throw IoError("empty results file", path.string());
    const auto header = split_line(line);
    std::size_t n_weight = 0, n_spread = 0;
    for (const auto& h : header) {
        if (h.rfind("max_weight_", 0) == 0) ++n_weight;
        if (h.rfind("spread_", 0) == 0) ++n_spread;
    }
    const std::size_t expected = 4 + n_weight + n_spread;
    if (header.size() != expected) throw IoError("unexpected results header", path.string());

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != expected) throw IoError("malformed results row", path.string());
        RunRecord r;
        r.step = static_cast<std::size_t>(parse_number(cells[0]));
        r.t = parse_number(cells[1]);
        r.loss = parse_number(cells[2]);
        std::size_t c = 3;
        for (std::size_t l = 0; l < n_weight; ++l) r.max_weight.push_back(parse_number(cells[c++]));
        for (std::size_t l = 0; l < n_spread; ++l) r.spread.push_back(parse_number(cells[c++]));
        r.skip = parse_number(cells[c]);
        records.push_back(std::move(r));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
    if (depth < 1) throw InvalidArgument("config: depth must be >= 1");
    if (widths.empty()) throw InvalidArgument("config: widths must not be empty");
    if (widths.size() != 1 && static_cast<Index>(widths.size()) != depth)
        throw InvalidArgument("config: widths must have one entry or one per hidden layer");
    for (Index w : widths)
        if (w < 1) throw InvalidArgument("config: widths must be positive");
    for (Index w : m_grid)
        if (w < 1) throw InvalidArgument("config: m_grid entries must be positive");
    if (!(sigma1 > 0.0)) throw InvalidArgument("config: sigma1 must be > 0");
    if (!(eta > 0.0)) throw InvalidArgument("config: eta must be > 0");
    if (dataset.n < 1 || dataset.d < 1) throw InvalidArgument("config: dataset n and d must be >= 1");
}

double ExperimentConfig::tolerance(const std::string& key, double fallback) const {
    const auto it = tolerances.find(key);
    return it == tolerances.end() ? fallback : it->second;
}

ExperimentConfig parse_config(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw InvalidArgument("config: top level must be an object");

    static const char* known[] = {"seed", "widths", "depth", "sigma1", "eta", "steps", "activation",
                                  "loss", "dataset", "m_grid", "tolerances", "output"};
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || item.key() == k;
        if (!ok) throw InvalidArgument("config: unknown key '" + item.key() + "'");
    }

    ExperimentConfig c;
    try {
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("widths")) c.widths = j["widths"].get<std::vector<Index>>();
        if (j.contains("depth")) c.depth = j["depth"].get<Index>();
        if (j.contains("sigma1")) c.sigma1 = j["sigma1"].get<double>();
        if (j.contains("eta")) c.eta = j["eta"].get<double>();
        if (j.contains("steps")) c.steps = j["steps"].get<std::size_t>();
        if (j.contains("activation")) c.activation = j["activation"].get<std::string>();
        if (j.contains("loss")) c.loss = j["loss"].get<std::string>();
        if (j.contains("dataset")) {
            const auto& ds = j["dataset"];
            for (const auto& item : ds.items())
                if (item.key() != "kind" && item.key() != "n" && item.key() != "d")
                    throw InvalidArgument("config: unknown dataset key '" + item.key() + "'");
            if (ds.contains("kind")) c.dataset.kind = parse_dataset_kind(ds["kind"].get<std::string>());
            if (ds.contains("n")) c.dataset.n = ds["n"].get<Index>();
            if (ds.contains("d")) c.dataset.d = ds["d"].get<Index>();
        }
        if (j.contains("m_grid")) c.m_grid = j["m_grid"].get<std::vector<Index>>();
        if (j.contains("tolerances"))
            c.tolerances = j["tolerances"].get<std::map<std::string, double>>();
        if (j.contains("output")) c.output = j["output"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config", path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c) {
    nlohmann::json j{{"seed", c.seed},
                     {"widths", c.widths},
                     {"depth", c.depth},
                     {"sigma1", c.sigma1},
                     {"eta", c.eta},
                     {"steps", c.steps},
                     {"activation", c.activation},
                     {"loss", c.loss},
                     {"dataset", {{"kind", to_string(c.dataset.kind)}, {"n", c.dataset.n}, {"d", c.dataset.d}}},
                     {"m_grid", c.m_grid},
                     {"tolerances", c.tolerances},
                     {"output", c.output}};
    return j.dump(2);
}

Dataset make_dataset(const ExperimentConfig& config) {
    return make_synthetic_dataset(config.dataset.n, config.dataset.d, config.seed, config.dataset.kind);
}

} // namespace mfnet
