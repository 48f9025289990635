#include "topcell/error.hpp"
#include "topcell/reward.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace topcell
{

/* parameters */

gnn_params gnn_params::zeros( std::size_t d, std::size_t k_layers )
{
  if ( d == 0 || k_layers == 0 )
    throw shape_mismatch( "hidden width and layer count must be positive" );
  gnn_params p;
  p.d = d;
  p.k_layers = k_layers;
  p.node_embed = Eigen::MatrixXd::Zero( num_node_kinds, d );
  p.edge_weight.assign( k_layers, std::vector<Eigen::MatrixXd>( num_edge_categories, Eigen::MatrixXd::Zero( d, d ) ) );
  p.readout = Eigen::VectorXd::Zero( d );
  p.bias = 0.0;
  return p;
}

gnn_params gnn_params::random( std::size_t d, std::size_t k_layers, std::uint64_t seed, double scale )
{
  auto p = zeros( d, k_layers );
  std::mt19937_64 rng( seed );
  std::normal_distribution<double> normal( 0.0, 1.0 );
  auto fill = [&]( Eigen::MatrixXd& m, double s ) {
    for ( Eigen::Index i = 0; i < m.rows(); ++i )
      for ( Eigen::Index j = 0; j < m.cols(); ++j )
        m( i, j ) = s * normal( rng );
  };
  fill( p.node_embed, scale );
  double w = scale * std::sqrt( 2.0 / static_cast<double>( d ) );
  for ( auto& layer : p.edge_weight )
    for ( auto& m : layer )
      fill( m, w );
  for ( Eigen::Index i = 0; i < p.readout.size(); ++i )
    p.readout( i ) = w * normal( rng );
  return p;
}

std::size_t gnn_params::size() const noexcept
{
  return num_node_kinds * d + k_layers * num_edge_categories * d * d + d + 1;
}

Eigen::VectorXd gnn_params::flatten() const
{
  Eigen::VectorXd flat( static_cast<Eigen::Index>( size() ) );
  Eigen::Index k = 0;
  auto put = [&]( Eigen::MatrixXd const& m ) {
    for ( Eigen::Index i = 0; i < m.rows(); ++i )
      for ( Eigen::Index j = 0; j < m.cols(); ++j )
        flat( k++ ) = m( i, j );
  };
  put( node_embed );
  for ( auto const& layer : edge_weight )
    for ( auto const& m : layer )
      put( m );
  for ( Eigen::Index i = 0; i < readout.size(); ++i )
    flat( k++ ) = readout( i );
  flat( k ) = bias;
  return flat;
}

void gnn_params::assign( Eigen::VectorXd const& flat )
{
  if ( static_cast<std::size_t>( flat.size() ) != size() )
    throw shape_mismatch( "flat parameter vector has the wrong length" );
  Eigen::Index k = 0;
  auto get = [&]( Eigen::MatrixXd& m ) {
    for ( Eigen::Index i = 0; i < m.rows(); ++i )
      for ( Eigen::Index j = 0; j < m.cols(); ++j )
        m( i, j ) = flat( k++ );
  };
  get( node_embed );
  for ( auto& layer : edge_weight )
    for ( auto& m : layer )
      get( m );
  for ( Eigen::Index i = 0; i < readout.size(); ++i )
    readout( i ) = flat( k++ );
  bias = flat( k );
}

bool gnn_params::all_finite() const
{
  return flatten().allFinite();
}

void gnn_params::check_shapes() const
{
  auto const dd = static_cast<Eigen::Index>( d );
  if ( d == 0 || k_layers == 0 )
    throw shape_mismatch( "hidden width and layer count must be positive" );
  if ( node_embed.rows() != static_cast<Eigen::Index>( num_node_kinds ) || node_embed.cols() != dd )
    throw shape_mismatch( "node_embed" );
  if ( edge_weight.size() != k_layers )
    throw shape_mismatch( "edge_weight layer count" );
  for ( auto const& layer : edge_weight )
  {
    if ( layer.size() != num_edge_categories )
      throw shape_mismatch( "edge_weight category count" );
    for ( auto const& m : layer )
    {
      if ( m.rows() != dd || m.cols() != dd )
        throw shape_mismatch( "edge_weight matrix" );
    }
  }
  if ( readout.size() != dd )
    throw shape_mismatch( "readout" );
}

/* forward / backward */

namespace
{

struct forward_cache
{
  std::vector<Eigen::MatrixXd> h;   ///< h[0..K], each V x d
  std::vector<Eigen::MatrixXd> pre; ///< pre[1..K] stored at index k-1
  Eigen::VectorXd pooled;
  double logit = 0.0;
};

void check_graph( cell_graph const& graph )
{
  if ( graph.in_edges.size() != graph.num_nodes() || graph.kinds.size() != graph.num_nodes() )
    throw shape_mismatch( "graph is not indexed" );
  for ( auto k : graph.kinds )
  {
    if ( k >= num_node_kinds )
      throw shape_mismatch( "node kind out of range" );
  }
  for ( auto const& e : graph.edges )
  {
    if ( e.src >= graph.num_nodes() || e.dst >= graph.num_nodes() || e.category >= num_edge_categories )
      throw shape_mismatch( "edge out of range" );
  }
}

forward_cache run_forward( cell_graph const& graph, gnn_params const& params )
{
  params.check_shapes();
  check_graph( graph );
  auto const V = static_cast<Eigen::Index>( graph.num_nodes() );
  auto const d = static_cast<Eigen::Index>( params.d );

  forward_cache c;
  Eigen::MatrixXd h( V, d );
  for ( Eigen::Index v = 0; v < V; ++v )
    h.row( v ) = params.node_embed.row( static_cast<Eigen::Index>( graph.kinds[v] ) );
  c.h.push_back( h );

  for ( std::size_t k = 0; k < params.k_layers; ++k )
  {
    Eigen::MatrixXd pre = Eigen::MatrixXd::Zero( V, d );
    for ( Eigen::Index v = 0; v < V; ++v )
    {
      auto const& in = graph.in_edges[v];
      if ( in.empty() )
        continue;
      Eigen::VectorXd acc = Eigen::VectorXd::Zero( d );
      for ( auto e : in )
      {
        auto const& edge = graph.edges[e];
        acc.noalias() += params.edge_weight[k][edge.category] * c.h.back().row( static_cast<Eigen::Index>( edge.src ) ).transpose();
      }
      pre.row( v ) = acc.transpose() / static_cast<double>( in.size() );
    }
    c.pre.push_back( pre );
    c.h.push_back( pre.cwiseMax( 0.0 ) );
  }

  c.pooled = V > 0 ? Eigen::VectorXd( c.h.back().colwise().mean().transpose() ) : Eigen::VectorXd::Zero( d );
  c.logit = params.readout.dot( c.pooled ) + params.bias;
  return c;
}

} // namespace

double gnn_forward( cell_graph const& graph, gnn_params const& params )
{
  return run_forward( graph, params ).logit;
}

double margin_loss( double logit, int label )
{
  return std::max( 0.0, 1.0 - static_cast<double>( label ) * logit );
}

gnn_params gnn_gradients( cell_graph const& graph, gnn_params const& params, int label )
{
  auto c = run_forward( graph, params );
  auto grad = gnn_params::zeros( params.d, params.k_layers );
  double const y = static_cast<double>( label );
  if ( 1.0 - y * c.logit <= 0.0 )
    return grad;

  auto const V = static_cast<Eigen::Index>( graph.num_nodes() );
  double const dlogit = -y;
  grad.bias = dlogit;
  grad.readout = dlogit * c.pooled;
  if ( V == 0 )
    return grad;

  // dL/dh_K: the mean pool spreads readout evenly over the nodes
  Eigen::MatrixXd dh = ( dlogit / static_cast<double>( V ) ) * params.readout.transpose().replicate( V, 1 );
  for ( std::size_t k = params.k_layers; k-- > 0; )
  {
    Eigen::MatrixXd dpre = dh.cwiseProduct( ( c.pre[k].array() > 0.0 ).cast<double>().matrix() );
    Eigen::MatrixXd dprev = Eigen::MatrixXd::Zero( V, static_cast<Eigen::Index>( params.d ) );
    for ( Eigen::Index v = 0; v < V; ++v )
    {
      auto const& in = graph.in_edges[v];
      if ( in.empty() )
        continue;
      double const inv = 1.0 / static_cast<double>( in.size() );
      Eigen::VectorXd g = dpre.row( v ).transpose() * inv;
      for ( auto e : in )
      {
        auto const& edge = graph.edges[e];
        auto const u = static_cast<Eigen::Index>( edge.src );
        grad.edge_weight[k][edge.category].noalias() += g * c.h[k].row( u );
        dprev.row( u ).noalias() += ( params.edge_weight[k][edge.category].transpose() * g ).transpose();
      }
    }
    dh = std::move( dprev );
  }
  for ( Eigen::Index v = 0; v < V; ++v )
    grad.node_embed.row( static_cast<Eigen::Index>( graph.kinds[v] ) ) += dh.row( v );
  return grad;
}

/* training */

double accuracy( std::vector<labeled_graph> const& records, gnn_params const& params )
{
  if ( records.empty() )
    return 0.0;
  std::size_t correct = 0;
  for ( auto const& r : records )
  {
    double logit = gnn_forward( r.graph, params );
    correct += ( logit > 0.0 ? 1 : -1 ) == r.label;
  }
  return static_cast<double>( correct ) / static_cast<double>( records.size() );
}

reward_model train_reward_model( std::vector<labeled_graph> const& records, reward_train_config const& config )
{
  bool has_pos = std::any_of( records.begin(), records.end(), []( auto const& r ) { return r.label == 1; } );
  bool has_neg = std::any_of( records.begin(), records.end(), []( auto const& r ) { return r.label == -1; } );
  if ( !has_pos || !has_neg )
    throw degenerate_data();
  for ( auto const& r : records )
  {
    if ( r.label != 1 && r.label != -1 )
      throw error( error_category::input, "labels must be -1 or +1" );
  }

  reward_model model;
  model.params = gnn_params::random( config.d, config.k_layers, config.seed, config.init_scale );
  std::mt19937_64 rng( config.seed ^ 0x9e3779b97f4a7c15ull );
  std::vector<std::size_t> order( records.size() );
  std::iota( order.begin(), order.end(), 0 );
  std::size_t const batch = std::max<std::size_t>( 1, config.batch_size );

  Eigen::VectorXd theta = model.params.flatten();
  for ( std::size_t epoch = 0; epoch < config.epochs; ++epoch )
  {
    // Fisher-Yates on raw engine output keeps the order identical across standard libraries
    for ( std::size_t i = order.size(); i > 1; --i )
      std::swap( order[i - 1], order[rng() % i] );

    double loss_sum = 0.0;
    for ( std::size_t start = 0; start < order.size(); start += batch )
    {
      std::size_t end = std::min( order.size(), start + batch );
      Eigen::VectorXd g = Eigen::VectorXd::Zero( theta.size() );
      for ( std::size_t i = start; i < end; ++i )
      {
        auto const& r = records[order[i]];
        loss_sum += margin_loss( gnn_forward( r.graph, model.params ), r.label );
        g += gnn_gradients( r.graph, model.params, r.label ).flatten();
      }
      theta -= config.lr * g / static_cast<double>( end - start );
      model.params.assign( theta );
    }
    model.log.push_back(
        { epoch + 1, loss_sum / static_cast<double>( records.size() ), accuracy( records, model.params ) } );
  }
  return model;
}

/* persistence */

std::string save_model( gnn_params const& params )
{
  params.check_shapes();
  using nlohmann::json;
  auto matrix = []( Eigen::MatrixXd const& m ) {
    json rows = json::array();
    for ( Eigen::Index i = 0; i < m.rows(); ++i )
    {
      json row = json::array();
      for ( Eigen::Index j = 0; j < m.cols(); ++j )
        row.push_back( m( i, j ) );
      rows.push_back( std::move( row ) );
    }
    return rows;
  };
  json doc;
  doc["format_version"] = model_format_version;
  doc["d"] = params.d;
  doc["k_layers"] = params.k_layers;
  doc["node_embed"] = matrix( params.node_embed );
  json layers = json::array();
  for ( auto const& layer : params.edge_weight )
  {
    json cats = json::array();
    for ( auto const& m : layer )
      cats.push_back( matrix( m ) );
    layers.push_back( std::move( cats ) );
  }
  doc["edge_weight"] = std::move( layers );
  json readout = json::array();
  for ( Eigen::Index i = 0; i < params.readout.size(); ++i )
    readout.push_back( params.readout( i ) );
  doc["readout"] = std::move( readout );
  doc["bias"] = params.bias;
  return doc.dump( 1 ) + "\n";
}

gnn_params load_model( std::string const& json_text )
{
  using nlohmann::json;
  json doc;
  try
  {
    doc = json::parse( json_text );
  }
  catch ( json::exception const& e )
  {
    throw format_error( std::string( "model file is not valid JSON: " ) + e.what() );
  }
  try
  {
    if ( doc.at( "format_version" ).get<int>() != model_format_version )
      throw format_error( "unsupported model format_version " + doc.at( "format_version" ).dump() );
    auto p = gnn_params::zeros( doc.at( "d" ).get<std::size_t>(), doc.at( "k_layers" ).get<std::size_t>() );
    auto read = [&]( json const& rows, Eigen::MatrixXd& m ) {
      if ( rows.size() != static_cast<std::size_t>( m.rows() ) )
        throw shape_mismatch( "matrix rows" );
      for ( Eigen::Index i = 0; i < m.rows(); ++i )
      {
        auto const& row = rows.at( static_cast<std::size_t>( i ) );
        if ( row.size() != static_cast<std::size_t>( m.cols() ) )
          throw shape_mismatch( "matrix columns" );
        for ( Eigen::Index j = 0; j < m.cols(); ++j )
          m( i, j ) = row.at( static_cast<std::size_t>( j ) ).get<double>();
      }
    };
    read( doc.at( "node_embed" ), p.node_embed );
    auto const& layers = doc.at( "edge_weight" );
    if ( layers.size() != p.k_layers )
      throw shape_mismatch( "edge_weight layer count" );
    for ( std::size_t k = 0; k < p.k_layers; ++k )
    {
      if ( layers.at( k ).size() != num_edge_categories )
        throw shape_mismatch( "edge_weight category count" );
      for ( std::size_t c = 0; c < num_edge_categories; ++c )
        read( layers.at( k ).at( c ), p.edge_weight[k][c] );
    }
    auto const& readout = doc.at( "readout" );
    if ( readout.size() != p.d )
      throw shape_mismatch( "readout" );
    for ( std::size_t i = 0; i < p.d; ++i )
      p.readout( static_cast<Eigen::Index>( i ) ) = readout.at( i ).get<double>();
    p.bias = doc.at( "bias" ).get<double>();
    if ( !p.all_finite() )
      throw format_error( "model contains non-finite values" );
    return p;
  }
  catch ( json::exception const& e )
  {
    throw format_error( std::string( "malformed model file: " ) + e.what() );
  }
}

} // namespace topcell
