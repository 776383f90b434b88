#pragma once

// Flat-file formats shared by the command-line tool and the tests.
//
//   panel.csv       "# I=..,J=..,K=..,T=.." then "t,i,j,k", one row per edge
//                   present (1-based); absent rows are zeros.
//   covariates.csv  "t,z1,...,zQ", one row per time point.
//   draws.jsonl     one JSON object per stored draw.
//
// Numbers are written with 17 significant digits so re-reading is lossless.

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "mstr/gibbs.hpp"
#include "mstr/pooled.hpp"
#include "mstr/simulate.hpp"

namespace mstr {

/// Malformed input file; `offset` is the byte position of the problem.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset) : std::runtime_error(what), offset(offset) {}
  std::size_t offset;
};

using json = nlohmann::ordered_json;

void write_panel_csv(std::ostream& os, const NetworkPanel& panel);
/// Reads the edge list; the covariate matrix of the result is empty (T x 0).
NetworkPanel read_panel_csv(std::istream& is, const std::string& source = "panel");

void write_covariates_csv(std::ostream& os, const Eigen::MatrixXd& z);
Eigen::MatrixXd read_covariates_csv(std::istream& is, const std::string& source = "covariates");

/// Reads both files and checks that they agree on T; the panel is validated.
NetworkPanel load_panel(const std::filesystem::path& panel_csv, const std::filesystem::path& covariates_csv);
void save_panel(const std::filesystem::path& dir, const NetworkPanel& panel);

json to_json(const RegimeParams& p);
json to_json(const ShrinkageState& s);
json to_json(const PooledParams& p);
json truth_json(const Simulation& sim);

/// Flattening order of gamma in a draw record: regime, mode, rank, entry,
/// with the entry index fastest.
json gamma_legend(const PanelDims& dims, Index regimes, Index rank);
json draw_record(const Draw& d);
json draw_record(const PooledDraw& d);

/// Rebuilds draws from draws.jsonl using the legend dimensions.
std::vector<Draw> read_draws(std::istream& is, const PanelDims& dims, Index regimes, Index rank);
std::vector<PooledDraw> read_pooled_draws(std::istream& is, Index Q, Index regimes);

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace mstr
