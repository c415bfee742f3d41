#include "lcan/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lcan::io {
namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(const fs::path& path, std::size_t line, const std::string& what) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& text, const fs::path& path, std::size_t line) {
    const std::string t = trim(text);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) parse_fail(path, line, "not a number: '" + t + "'");
    return v;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

json matrix_to_json(const MatrixXd& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

MatrixXd matrix_from_json(const json& j) {
    const Index rows = static_cast<Index>(j.size());
    const Index cols = rows ? static_cast<Index>(j[0].size()) : 0;
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (static_cast<Index>(j[i].size()) != cols) throw DataError("ragged matrix in JSON");
        for (Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

json vector_to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_adjacency(const fs::path& path, const Sociomatrix& y) {
    auto out = open_out(path);
    const Index n = y.size();
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (j) out << ',';
            if (i == j) out << "NA";
            else out << (y.edge(i, j) ? '1' : '0');
        }
        out << '\n';
    }
}

Sociomatrix read_adjacency(const fs::path& path, std::optional<int> censor_cap) {
    auto in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        std::vector<double> row;
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const std::string f = trim(fields[j]);
            if (j == rows.size()) {
                if (f != "NA" && f != "0") parse_fail(path, lineno, "diagonal must be NA");
                row.push_back(0.0);
                continue;
            }
            if (f == "0") row.push_back(0.0);
            else if (f == "1") row.push_back(1.0);
            else parse_fail(path, lineno, "entry must be 0 or 1, got '" + f + "'");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            parse_fail(path, lineno, "row length differs from the first row");
        rows.push_back(std::move(row));
    }
    const Index n = static_cast<Index>(rows.size());
    if (n == 0) throw DataError(path.string() + ": empty adjacency file");
    if (static_cast<Index>(rows.front().size()) != n) throw DataError(path.string() + ": matrix is not square");
    MatrixXd m(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
    return Sociomatrix::from_dense(m, censor_cap);
}

void write_matrix_csv(const fs::path& path, const MatrixXd& m) {
    auto out = open_out(path);
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

MatrixXd read_matrix_csv(const fs::path& path) {
    auto in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        for (const auto& f : split(line, ',')) row.push_back(parse_double(f, path, lineno));
        if (!rows.empty() && row.size() != rows.front().size())
            parse_fail(path, lineno, "row length differs from the first row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return {};
    MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    return m;
}

void write_covariates(const fs::path& dir, const CovariateSet& covs) {
    // Distinct nodal columns in first-seen order.
    std::vector<std::pair<std::string, VectorXd>> nodal;
    auto add = [&](const NodeCovariate& c) {
        for (const auto& [name, values] : nodal)
            if (name == c.name) {
                if (values != c.values)
                    throw DataError("covariate '" + c.name + "' has different row and column values");
                return;
            }
        nodal.emplace_back(c.name, c.values);
    };
    for (const auto& c : covs.row) add(c);
    for (const auto& c : covs.column) add(c);

    auto csv = open_out(dir / "covariates.csv");
    for (std::size_t k = 0; k < nodal.size(); ++k) csv << (k ? "," : "") << nodal[k].first;
    csv << '\n';
    for (Index i = 0; i < covs.n; ++i) {
        for (std::size_t k = 0; k < nodal.size(); ++k)
            csv << (k ? "," : "") << format_double(nodal[k].second(i));
        csv << '\n';
    }

    auto meta = open_out(dir / "covariates.meta");
    meta << "# name role dependence [file]\n";
    auto dep = [](bool d) { return d ? "dependent" : "independent"; };
    for (const auto& c : covs.row) meta << c.name << " row " << dep(c.community_dependent) << '\n';
    for (const auto& c : covs.column) meta << c.name << " column " << dep(c.community_dependent) << '\n';
    for (const auto& c : covs.dyadic) {
        const std::string file = "dyadic_" + c.name() + ".csv";
        write_matrix_csv(dir / file, c.values());
        meta << c.name() << " dyadic " << dep(c.community_dependent()) << ' ' << file << '\n';
    }
}

CovariateSet read_covariates(const fs::path& csv, const fs::path& meta, Index n) {
    CovariateSet covs;
    covs.n = n;

    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    if (fs::exists(csv)) {
        auto in = open_in(csv);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            const auto fields = split(line, ',');
            if (names.empty()) {
                for (const auto& f : fields) names.push_back(trim(f));
                columns.resize(names.size());
                continue;
            }
            if (fields.size() != names.size()) parse_fail(csv, lineno, "wrong number of fields");
            for (std::size_t k = 0; k < fields.size(); ++k)
                columns[k].push_back(parse_double(fields[k], csv, lineno));
        }
    }
    auto nodal = [&](const std::string& name, std::size_t lineno) {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == name) {
                if (static_cast<Index>(columns[k].size()) != n)
                    throw DataError(csv.string() + ": expected " + std::to_string(n) + " rows");
                return VectorXd(Eigen::Map<const VectorXd>(columns[k].data(), n));
            }
        parse_fail(meta, lineno, "covariate '" + name + "' missing from " + csv.filename().string());
    };

    auto in = open_in(meta);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::istringstream fields(t);
        std::string name, role, dependence, file;
        fields >> name >> role >> dependence >> file;
        if (dependence != "dependent" && dependence != "independent")
            parse_fail(meta, lineno, "dependence must be 'dependent' or 'independent'");
        const bool dep = dependence == "dependent";
        if (role == "row") covs.row.push_back({name, nodal(name, lineno), dep});
        else if (role == "column") covs.column.push_back({name, nodal(name, lineno), dep});
        else if (role == "dyadic") {
            if (file.empty()) parse_fail(meta, lineno, "dyadic covariate needs a file");
            covs.dyadic.emplace_back(name, read_matrix_csv(meta.parent_path() / file), dep);
        } else {
            parse_fail(meta, lineno, "role must be row, column or dyadic");
        }
    }
    covs.validate();
    return covs;
}

std::map<std::string, bool> read_dependence_flags(const fs::path& path) {
    auto in = open_in(path);
    std::map<std::string, bool> flags;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::istringstream fields(t);
        std::string name, dependence;
        fields >> name >> dependence;
        if (dependence != "dependent" && dependence != "independent")
            parse_fail(path, lineno, "expected '<name> dependent|independent'");
        flags[name] = dependence == "dependent";
    }
    return flags;
}

json state_to_json(const ModelState& s) {
    json j;
    j["K"] = s.K();
    j["labels"] = s.community.labels();
    j["beta0"] = s.coeffs.beta0;
    j["beta_r"] = matrix_to_json(s.coeffs.beta_r);
    j["beta_c"] = matrix_to_json(s.coeffs.beta_c);
    j["beta_dr"] = matrix_to_json(s.coeffs.beta_dr);
    j["beta_dc"] = matrix_to_json(s.coeffs.beta_dc);
    j["a"] = vector_to_json(s.effects.a);
    j["b"] = vector_to_json(s.effects.b);
    j["h"] = vector_to_json(s.effects.h);
    j["sigma_ab"] = matrix_to_json(s.effects.sigma_ab);
    j["sigma_h2"] = s.effects.sigma_h2;
    j["rho"] = s.latent.rho;
    j["lambda"] = matrix_to_json(s.latent.lambda);
    j["z"] = matrix_to_json(s.latent.z);
    return j;
}

ModelState state_from_json(const json& j) {
    ModelState s;
    const int K = j.at("K").get<int>();
    s.community = CommunityAssignment(K, j.at("labels").get<std::vector<int>>());
    s.coeffs.beta0 = j.at("beta0").get<double>();
    auto coeff = [&](const char* key) {
        MatrixXd m = matrix_from_json(j.at(key));
        if (m.rows() == 0) m.resize(0, K);
        return m;
    };
    s.coeffs.beta_r = coeff("beta_r");
    s.coeffs.beta_c = coeff("beta_c");
    s.coeffs.beta_dr = coeff("beta_dr");
    s.coeffs.beta_dc = coeff("beta_dc");
    s.effects.a = vector_from_json(j.at("a"));
    s.effects.b = vector_from_json(j.at("b"));
    s.effects.h = vector_from_json(j.at("h"));
    s.effects.sigma_ab = matrix_from_json(j.at("sigma_ab"));
    s.effects.sigma_h2 = j.at("sigma_h2").get<double>();
    s.latent.rho = j.at("rho").get<double>();
    s.latent.lambda = matrix_from_json(j.at("lambda"));
    s.latent.z = matrix_from_json(j.at("z"));
    return s;
}

json checkpoint_to_json(const ChainCheckpoint& cp) {
    return {{"iteration", cp.iteration},
            {"rng_state", cp.rng_state},
            {"membership_accepts", cp.membership_accepts},
            {"membership_tries", cp.membership_tries},
            {"rho_accepts", cp.rho_accepts},
            {"state", state_to_json(cp.state)}};
}

ChainCheckpoint checkpoint_from_json(const json& j) {
    ChainCheckpoint cp;
    cp.iteration = j.at("iteration").get<int>();
    cp.rng_state = j.at("rng_state").get<std::string>();
    cp.membership_accepts = j.at("membership_accepts").get<long>();
    cp.membership_tries = j.at("membership_tries").get<long>();
    cp.rho_accepts = j.at("rho_accepts").get<long>();
    cp.state = state_from_json(j.at("state"));
    return cp;
}

void write_draws_header(std::ostream& out) { out << "iteration,parameter,index,value\n"; }

void write_draws(std::ostream& out, const std::vector<Draw>& draws, std::size_t first,
                 const std::vector<UbetaColumn>& columns, bool censored) {
    for (std::size_t d = first; d < draws.size(); ++d) {
        const Draw& dr = draws[d];
        const std::string it = std::to_string(dr.iteration) + ",";
        auto emit = [&](const std::string& name, Index index, double value) {
            out << it << name << ',' << index << ',' << format_double(value) << '\n';
        };
        auto emit_matrix = [&](const std::string& name, const MatrixXd& m) {
            // Row-major: index = l * K + k.
            for (Index l = 0; l < m.rows(); ++l)
                for (Index k = 0; k < m.cols(); ++k) emit(name, l * m.cols() + k, m(l, k));
        };
        emit("beta0", 0, dr.coeffs.beta0);
        emit_matrix("beta_r", dr.coeffs.beta_r);
        emit_matrix("beta_c", dr.coeffs.beta_c);
        emit_matrix("beta_dr", dr.coeffs.beta_dr);
        emit_matrix("beta_dc", dr.coeffs.beta_dc);
        for (Index k = 0; k < dr.lambda.size(); ++k) emit("lambda", k, dr.lambda.data()[k]);
        emit("rho", 0, dr.rho);
        for (Index k = 0; k < 4; ++k) emit("sigma_ab", k, dr.sigma_ab.data()[k]);
        for (Index i = 0; i < dr.a.size(); ++i) emit("a", i, dr.a(i));
        for (Index i = 0; i < dr.b.size(); ++i) emit("b", i, dr.b(i));
        if (censored) {
            for (Index i = 0; i < dr.h.size(); ++i) emit("h", i, dr.h(i));
            emit("sigma_h2", 0, dr.sigma_h2);
        }
        for (std::size_t i = 0; i < dr.labels.size(); ++i)
            emit("label", static_cast<Index>(i), dr.labels[i]);
        for (std::size_t c = 0; c < columns.size(); ++c)
            for (Index i = 0; i < dr.ubeta.rows(); ++i)
                emit("ubeta:" + columns[c].name, i, dr.ubeta(i, static_cast<Index>(c)));
        emit("loglik", 0, dr.loglik);
    }
}

std::vector<Draw> read_draws(const fs::path& path, const std::vector<UbetaColumn>& columns,
                             Index n, int K) {
    Index num_row = 0, num_col = 0, num_dy = 0;
    for (const auto& c : columns) {
        if (c.name.rfind("row:", 0) == 0) ++num_row;
        else if (c.name.rfind("col:", 0) == 0) ++num_col;
        else if (c.name.rfind("dr:", 0) == 0) ++num_dy;
    }
    std::map<std::string, Index> column_index;
    for (std::size_t c = 0; c < columns.size(); ++c)
        column_index["ubeta:" + columns[c].name] = static_cast<Index>(c);

    auto fresh = [&](int iteration) {
        Draw d;
        d.iteration = iteration;
        d.coeffs.beta_r = MatrixXd::Zero(num_row, K);
        d.coeffs.beta_c = MatrixXd::Zero(num_col, K);
        d.coeffs.beta_dr = MatrixXd::Zero(num_dy, K);
        d.coeffs.beta_dc = MatrixXd::Zero(num_dy, K);
        d.lambda = MatrixXd::Zero(K, K);
        d.sigma_ab.setZero();
        d.a = VectorXd::Zero(n);
        d.b = VectorXd::Zero(n);
        d.h = VectorXd::Zero(n);
        d.labels.assign(static_cast<std::size_t>(n), 0);
        d.ubeta = MatrixXd::Zero(n, static_cast<Index>(columns.size()));
        return d;
    };

    auto in = open_in(path);
    std::vector<Draw> draws;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || trim(line).empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 4) parse_fail(path, lineno, "expected 4 fields");
        const int it = static_cast<int>(parse_double(f[0], path, lineno));
        const std::string& name = f[1];
        const Index idx = static_cast<Index>(parse_double(f[2], path, lineno));
        const double v = parse_double(f[3], path, lineno);
        if (draws.empty() || draws.back().iteration != it) draws.push_back(fresh(it));
        Draw& d = draws.back();
        auto in_range = [&](Index size) {
            if (idx < 0 || idx >= size) parse_fail(path, lineno, "index out of range for " + name);
        };
        auto set_coeff = [&](MatrixXd& m) {
            in_range(m.size());
            m(idx / K, idx % K) = v;
        };
        if (name == "beta0") d.coeffs.beta0 = v;
        else if (name == "beta_r") set_coeff(d.coeffs.beta_r);
        else if (name == "beta_c") set_coeff(d.coeffs.beta_c);
        else if (name == "beta_dr") set_coeff(d.coeffs.beta_dr);
        else if (name == "beta_dc") set_coeff(d.coeffs.beta_dc);
        else if (name == "lambda") { in_range(K * K); d.lambda.data()[idx] = v; }
        else if (name == "rho") d.rho = v;
        else if (name == "sigma_ab") { in_range(4); d.sigma_ab.data()[idx] = v; }
        else if (name == "a") { in_range(n); d.a(idx) = v; }
        else if (name == "b") { in_range(n); d.b(idx) = v; }
        else if (name == "h") { in_range(n); d.h(idx) = v; }
        else if (name == "sigma_h2") d.sigma_h2 = v;
        else if (name == "label") { in_range(n); d.labels[static_cast<std::size_t>(idx)] = static_cast<int>(v); }
        else if (name == "loglik") d.loglik = v;
        else if (auto c = column_index.find(name); c != column_index.end()) {
            in_range(n);
            d.ubeta(idx, c->second) = v;
        } else {
            parse_fail(path, lineno, "unknown parameter '" + name + "'");
        }
    }
    return draws;
}

json columns_to_json(const std::vector<UbetaColumn>& columns) {
    json j = json::array();
    for (const auto& c : columns) j.push_back({{"name", c.name}, {"community_dependent", c.community_dependent}});
    return j;
}

std::vector<UbetaColumn> columns_from_json(const json& j) {
    std::vector<UbetaColumn> out;
    for (const auto& c : j) out.push_back({c.at("name").get<std::string>(), c.at("community_dependent").get<bool>()});
    return out;
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::uint64_t hash = 14695981039346656037ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ULL;
        }
    }
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << hash;
    return hex.str();
}

json read_json(const fs::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace lcan::io
