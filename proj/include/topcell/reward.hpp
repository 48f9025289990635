/*!
  \file reward.hpp
  \brief Routability rewards: typed cell graphs, an edge-conditioned GNN
         trained with a hinge loss, and a diffusion-break proxy scorer
*/

#pragma once

#include "topcell/netlist.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace topcell
{

/* graph encoding */

inline constexpr std::size_t num_node_kinds = 5;
inline constexpr std::size_t num_edge_categories = 12;

/*! \brief Relation of a gate->channel edge: terminal side x terminal net class. */
enum class connection
{
  gate_to_drain_rail,
  gate_to_drain_output,
  gate_to_drain_internal,
  gate_to_source_rail,
  gate_to_source_output,
  gate_to_source_internal
};

/*! \brief Category id in [0, 12): device type * 6 + connection. */
std::size_t edge_category( mos_type type, connection relation );
std::string edge_category_name( std::size_t category );

struct cell_graph
{
  struct edge
  {
    std::size_t src;
    std::size_t dst;
    std::size_t category;
  };

  std::vector<std::string> names;  ///< node names, sorted
  std::vector<std::size_t> kinds;  ///< node feature: net_kind as integer
  std::vector<edge> edges;
  std::vector<std::vector<std::size_t>> in_edges; ///< per node, indices into edges

  std::size_t num_nodes() const noexcept { return names.size(); }
  /*! \brief Rebuilds in_edges from edges. */
  void index();
};

/*! \brief Nets become nodes; each transistor yields gate->drain and gate->source edges. */
cell_graph encode_cell_graph( cell_netlist const& cell );

/* GNN */

struct gnn_params
{
  std::size_t d = 16;
  std::size_t k_layers = 3;
  Eigen::MatrixXd node_embed;                        ///< num_node_kinds x d
  std::vector<std::vector<Eigen::MatrixXd>> edge_weight; ///< [layer][category], d x d
  Eigen::VectorXd readout;                           ///< d
  double bias = 0.0;

  static gnn_params zeros( std::size_t d, std::size_t k_layers );
  static gnn_params random( std::size_t d, std::size_t k_layers, std::uint64_t seed, double scale = 0.5 );

  std::size_t size() const noexcept;
  Eigen::VectorXd flatten() const;
  void assign( Eigen::VectorXd const& flat );
  bool all_finite() const;
  void check_shapes() const;
};

/*! \brief Raw logit: K rounds of mean in-neighbour messages f(e_uv) h_u under
           max(0, .), mean-pooled and fed to a linear head. */
double gnn_forward( cell_graph const& graph, gnn_params const& params );

double margin_loss( double logit, int label );

/*! \brief Exact (sub)gradient of margin_loss(gnn_forward(graph), label). */
gnn_params gnn_gradients( cell_graph const& graph, gnn_params const& params, int label );

struct labeled_graph
{
  cell_graph graph;
  int label; ///< +1 routable, -1 unroutable
};

/*! \brief Defaults tuned on the proxy-labelled 3-input corpus.

  Gate nets of a static CMOS cell have no in-edges unless an inverter drives
  them, so every message chain is at most two hops long and deeper stacks
  decay to the zero vector; one layer is the useful depth here.
*/
struct reward_train_config
{
  std::size_t d = 16;
  std::size_t k_layers = 1;
  double lr = 0.5;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  double init_scale = 1.0;
};

struct epoch_log
{
  std::size_t epoch;
  double loss;
  double accuracy;
};

struct reward_model
{
  gnn_params params;
  std::vector<epoch_log> log;
};

reward_model train_reward_model( std::vector<labeled_graph> const& records, reward_train_config const& config );

double accuracy( std::vector<labeled_graph> const& records, gnn_params const& params );

std::string save_model( gnn_params const& params );
gnn_params load_model( std::string const& json_text );

inline constexpr int model_format_version = 1;

/* diffusion-break proxy */

struct proxy_options
{
  bool greedy = true;                 ///< allow beam search above the exhaustive limit
  std::size_t exhaustive_limit = 12;  ///< columns searched exactly
  std::size_t beam_width = 64;
};

struct proxy_result
{
  std::size_t breaks = 0;
  double score = 0.0;
  bool exact = true;
  /*! \brief Column order of the best placement: (pmos device, nmos device) indices. */
  std::vector<std::pair<std::size_t, std::size_t>> columns;

  bool routable() const noexcept { return breaks == 0; }
};

/*! \brief Minimal diffusion breaks over single-row placements sharing gate columns. */
proxy_result proxy_score( cell_netlist const& cell, proxy_options const& options = {} );

/* reward sources */

struct proxy_reward
{
};

using reward_table = std::map<std::uint64_t, double>;

using reward_source = std::variant<gnn_params, proxy_reward, reward_table>;

double reward_of( reward_source const& source, cell_netlist const& cell );

} // namespace topcell
