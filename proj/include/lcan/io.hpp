#pragma once

#include "lcan/sampler.hpp"
#include "lcan/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lcan::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Full-precision decimal form that parses back to the same double.
std::string format_double(double x);

/// Headerless 0/1 CSV with "NA" on the diagonal.
void write_adjacency(const fs::path& path, const Sociomatrix& y);
Sociomatrix read_adjacency(const fs::path& path, std::optional<int> censor_cap = std::nullopt);

/// Writes covariates.csv (nodal values, one column per distinct name), the
/// covariates.meta sidecar and one n x n CSV per dyadic covariate.
void write_covariates(const fs::path& dir, const CovariateSet& covs);
/// Reads the sidecar at `meta`; nodal values come from `csv`, dyadic files are
/// resolved relative to the sidecar.
CovariateSet read_covariates(const fs::path& csv, const fs::path& meta, Index n);

/// Reads "name dependent|independent" lines, e.g. for --dep-flags.
std::map<std::string, bool> read_dependence_flags(const fs::path& path);

void write_matrix_csv(const fs::path& path, const MatrixXd& m);
MatrixXd read_matrix_csv(const fs::path& path);

json state_to_json(const ModelState& state);
ModelState state_from_json(const json& j);

json checkpoint_to_json(const ChainCheckpoint& cp);
ChainCheckpoint checkpoint_from_json(const json& j);

/// Long-format draws: iteration,parameter,index,value.
void write_draws_header(std::ostream& out);
void write_draws(std::ostream& out, const std::vector<Draw>& draws, std::size_t first,
                 const std::vector<UbetaColumn>& columns, bool censored);

/// Rebuilds draws from a long-format file; `columns`, n and K come from the
/// chain manifest.
std::vector<Draw> read_draws(const fs::path& path, const std::vector<UbetaColumn>& columns,
                             Index n, int K);

json columns_to_json(const std::vector<UbetaColumn>& columns);
std::vector<UbetaColumn> columns_from_json(const json& j);

/// 64-bit FNV-1a digest of a file's bytes, as 16 hex digits.
std::string file_digest(const fs::path& path);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

}  // namespace lcan::io
