#include "topcell/error.hpp"
#include "topcell/grpo.hpp"
#include "topcell/permute.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <map>

namespace topcell
{

/* generic helpers */

namespace
{

double unit_uniform( std::mt19937_64& rng )
{
  return static_cast<double>( rng() >> 11 ) * 0x1.0p-53;
}

std::size_t draw( Eigen::VectorXd const& log_probs, std::mt19937_64& rng )
{
  double u = unit_uniform( rng );
  double acc = 0.0;
  for ( Eigen::Index i = 0; i < log_probs.size(); ++i )
  {
    acc += std::exp( log_probs( i ) );
    if ( u < acc )
      return static_cast<std::size_t>( i );
  }
  // rounding left u above the total mass: take the last token with mass
  for ( Eigen::Index i = log_probs.size(); i-- > 0; )
  {
    if ( std::isfinite( log_probs( i ) ) )
      return static_cast<std::size_t>( i );
  }
  return 0;
}

} // namespace

token_seq sample_tokens( policy const& pi, cell_netlist const& prompt, std::mt19937_64& rng )
{
  token_seq out;
  while ( true )
  {
    auto tokens = pi.support( prompt, out );
    if ( tokens.empty() )
      return out;
    out.push_back( tokens[draw( pi.next_log_probs( prompt, out ), rng )] );
  }
}

std::vector<double> token_log_probs( policy const& pi, cell_netlist const& prompt, token_seq const& tokens )
{
  std::vector<double> out;
  token_seq prefix;
  for ( auto const& tok : tokens )
  {
    auto support = pi.support( prompt, prefix );
    auto it = std::find( support.begin(), support.end(), tok );
    if ( it == support.end() )
      out.push_back( -std::numeric_limits<double>::infinity() );
    else
      out.push_back( pi.next_log_probs( prompt, prefix )( it - support.begin() ) );
    prefix.push_back( tok );
  }
  return out;
}

token_seq greedy_tokens( policy const& pi, cell_netlist const& prompt )
{
  token_seq out;
  while ( true )
  {
    auto tokens = pi.support( prompt, out );
    if ( tokens.empty() )
      return out;
    auto lp = pi.next_log_probs( prompt, out );
    Eigen::Index best = 0;
    for ( Eigen::Index i = 1; i < lp.size(); ++i )
    {
      if ( lp( i ) > lp( best ) )
        best = i;
    }
    out.push_back( tokens[static_cast<std::size_t>( best )] );
  }
}

/* features */

std::vector<std::pair<std::string, Eigen::VectorXd>> pivot_features( cell_netlist const& cell )
{
  auto normalized = normalize_orientation( cell );
  auto graph = build_graph( normalized );
  double const now = static_cast<double>( proxy_score( normalized ).breaks );

  std::vector<std::pair<std::string, Eigen::VectorXd>> out;
  for ( auto const& candidate : list_valid_pivots( normalized ) )
  {
    auto const& g = graph[candidate.network];
    auto const& name = candidate.net.name;
    swap_region region;
    auto swapped = swap_net( normalized, name, region );
    double after = static_cast<double>( proxy_score( swapped ).breaks );

    Eigen::VectorXd phi( pivot_feature_count );
    phi << ( candidate.network == pull_network::pull_up ? 1.0 : 0.0 ),
        ( candidate.network == pull_network::pull_down ? 1.0 : 0.0 ),
        static_cast<double>( g.up.at( name ).size() ) / 2.0, static_cast<double>( g.down.at( name ).size() ) / 2.0,
        static_cast<double>( region.delta.size() ) / 4.0, now / 4.0, after / 4.0, ( after - now ) / 4.0;
    out.emplace_back( name, std::move( phi ) );
  }
  return out;
}

/* toy policy */

struct toy_softmax_policy::feature_cache
{
  std::mutex mutex;
  std::map<std::string, std::vector<std::pair<std::string, Eigen::VectorXd>>> entries;
};

toy_softmax_policy::toy_softmax_policy() : toy_softmax_policy( Eigen::VectorXd::Zero( pivot_feature_count ) )
{
}

toy_softmax_policy::toy_softmax_policy( Eigen::VectorXd theta ) : cache_( std::make_shared<feature_cache>() )
{
  set_params( theta );
}

void toy_softmax_policy::set_params( Eigen::VectorXd const& theta )
{
  if ( static_cast<std::size_t>( theta.size() ) != pivot_feature_count )
    throw shape_mismatch( "toy policy expects " + std::to_string( pivot_feature_count ) + " parameters" );
  theta_ = theta;
}

std::vector<std::pair<std::string, Eigen::VectorXd>> const&
toy_softmax_policy::features( cell_netlist const& prompt ) const
{
  auto key = serialize_spice( prompt );
  {
    std::lock_guard lock( cache_->mutex );
    if ( auto it = cache_->entries.find( key ); it != cache_->entries.end() )
      return it->second;
  }
  auto computed = pivot_features( prompt );
  std::lock_guard lock( cache_->mutex );
  return cache_->entries.emplace( key, std::move( computed ) ).first->second;
}

std::vector<std::string> toy_softmax_policy::support( cell_netlist const& prompt, token_seq const& prefix ) const
{
  std::vector<std::string> out;
  if ( !prefix.empty() )
    return out;
  for ( auto const& [name, _] : features( prompt ) )
    out.push_back( name );
  return out;
}

Eigen::VectorXd toy_softmax_policy::next_log_probs( cell_netlist const& prompt, token_seq const& prefix ) const
{
  if ( !prefix.empty() )
    return {};
  auto const& f = features( prompt );
  Eigen::VectorXd logits( static_cast<Eigen::Index>( f.size() ) );
  for ( std::size_t i = 0; i < f.size(); ++i )
    logits( static_cast<Eigen::Index>( i ) ) = theta_.dot( f[i].second );
  if ( f.empty() )
    return logits;
  double m = logits.maxCoeff();
  double lse = m + std::log( ( logits.array() - m ).exp().sum() );
  return logits.array() - lse;
}

Eigen::MatrixXd toy_softmax_policy::next_log_prob_jacobian( cell_netlist const& prompt, token_seq const& prefix ) const
{
  if ( !prefix.empty() )
    return Eigen::MatrixXd( 0, static_cast<Eigen::Index>( pivot_feature_count ) );
  auto const& f = features( prompt );
  Eigen::VectorXd p = next_log_probs( prompt, prefix ).array().exp();
  Eigen::MatrixXd phi( static_cast<Eigen::Index>( f.size() ), static_cast<Eigen::Index>( pivot_feature_count ) );
  for ( std::size_t i = 0; i < f.size(); ++i )
    phi.row( static_cast<Eigen::Index>( i ) ) = f[i].second.transpose();
  Eigen::RowVectorXd mean = p.transpose() * phi;
  return phi.rowwise() - mean;
}

std::unique_ptr<policy> toy_softmax_policy::snapshot() const
{
  return std::make_unique<toy_softmax_policy>( *this );
}

std::string save_policy( toy_softmax_policy const& pi )
{
  nlohmann::json doc;
  doc["format_version"] = policy_format_version;
  doc["feature_map_version"] = pivot_feature_map_version;
  auto theta = pi.params();
  doc["theta"] = std::vector<double>( theta.data(), theta.data() + theta.size() );
  return doc.dump( 1 ) + "\n";
}

toy_softmax_policy load_policy( std::string const& json_text )
{
  try
  {
    auto doc = nlohmann::json::parse( json_text );
    if ( doc.at( "format_version" ).get<int>() != policy_format_version )
      throw format_error( "unsupported policy format_version " + doc.at( "format_version" ).dump() );
    if ( doc.at( "feature_map_version" ).get<int>() != pivot_feature_map_version )
      throw format_error( "unsupported feature_map_version " + doc.at( "feature_map_version" ).dump() );
    auto theta = doc.at( "theta" ).get<std::vector<double>>();
    Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>( theta.data(), static_cast<Eigen::Index>( theta.size() ) );
    if ( !v.allFinite() )
      throw format_error( "policy contains non-finite values" );
    return toy_softmax_policy( v );
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw format_error( std::string( "malformed policy file: " ) + e.what() );
  }
}

} // namespace topcell
