#include "helpers.hpp"

#include "topcell/error.hpp"
#include "topcell/grpo.hpp"
#include "topcell/reward.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <random>

using namespace topcell;
using namespace topcell::test;

namespace
{

/* Softmax over a fixed token list with one logit parameter per token; the
   prompt is ignored.  Rows of the Jacobian are e_i - p. */
class scripted_policy : public policy
{
public:
  scripted_policy( std::vector<std::string> tokens, Eigen::VectorXd theta )
      : tokens_( std::move( tokens ) ), theta_( std::move( theta ) )
  {
  }

  std::vector<std::string> support( cell_netlist const&, token_seq const& prefix ) const override
  {
    return prefix.empty() ? tokens_ : std::vector<std::string>{};
  }
  Eigen::VectorXd next_log_probs( cell_netlist const&, token_seq const& prefix ) const override
  {
    if ( !prefix.empty() )
      return {};
    double m = theta_.maxCoeff();
    double lse = m + std::log( ( theta_.array() - m ).exp().sum() );
    return theta_.array() - lse;
  }
  Eigen::MatrixXd next_log_prob_jacobian( cell_netlist const& prompt, token_seq const& prefix ) const override
  {
    Eigen::VectorXd p = next_log_probs( prompt, prefix ).array().exp();
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity( theta_.size(), theta_.size() );
    return J.rowwise() - p.transpose();
  }
  std::unique_ptr<policy> snapshot() const override { return std::make_unique<scripted_policy>( *this ); }
  Eigen::VectorXd params() const override { return theta_; }
  void set_params( Eigen::VectorXd const& theta ) override { theta_ = theta; }

private:
  std::vector<std::string> tokens_;
  Eigen::VectorXd theta_;
};

cell_netlist nand3()
{
  return parse_spice( ".SUBCKT NAND3 A B C Y VDD GND\nMP1 VDD A Y VDD PMOS\nMP2 VDD B Y VDD PMOS\n"
                      "MP3 VDD C Y VDD PMOS\nMN1 Y A N1 GND NMOS\nMN2 N1 B N2 GND NMOS\n"
                      "MN3 N2 C GND GND NMOS\n.ENDS\n" );
}

Eigen::VectorXd random_vector( std::mt19937_64& rng, Eigen::Index n, double scale )
{
  std::normal_distribution<double> normal( 0.0, scale );
  Eigen::VectorXd v( n );
  for ( Eigen::Index i = 0; i < n; ++i )
    v( i ) = normal( rng );
  return v;
}

struct target_cell
{
  cell_netlist cell;
  std::string best;
};

// seed cells with breaks whose best pivot (by brute force over all pivots) is unique
std::vector<target_cell> unique_best_cells( std::size_t limit )
{
  std::vector<target_cell> out;
  for ( unsigned bits = 1; bits < 255 && out.size() < limit; ++bits )
  {
    auto cell = synth_function( truth_table( 3, bits ), "F" + std::to_string( bits ) );
    if ( proxy_score( cell ).breaks == 0 )
      continue;
    std::map<std::size_t, std::vector<std::string>> by_breaks;
    for ( auto const& p : list_valid_pivots( cell ) )
      by_breaks[proxy_score( swap_net( cell, p.net.name ) ).breaks].push_back( p.net.name );
    if ( by_breaks.size() > 1 && by_breaks.begin()->second.size() == 1 )
      out.push_back( { cell, by_breaks.begin()->second.front() } );
  }
  return out;
}

} // namespace

TEST_CASE( "advantages" )
{
  auto zero = compute_advantages( { 1, 1, 1, 1 }, 1e-8 );
  for ( auto a : zero )
    CHECK( a == 0.0 );
  auto pair = compute_advantages( { 0, 2 }, 1e-8 );
  CHECK( pair[0] == doctest::Approx( -1.0 ).epsilon( 1e-7 ) );
  CHECK( pair[1] == doctest::Approx( 1.0 ).epsilon( 1e-7 ) );
  CHECK( std::abs( pair[0] + 1.0 / ( 1.0 + 1e-8 ) ) <= 1e-12 );
}

TEST_CASE( "advantage shift invariance and standardization over random groups" )
{
  std::mt19937_64 rng( 1 );
  std::uniform_real_distribution<double> u( -5.0, 5.0 );
  for ( int trial = 0; trial < 1000; ++trial )
  {
    std::size_t M = 2 + rng() % 15;
    std::vector<double> r( M ), shifted( M );
    double c = u( rng );
    for ( std::size_t j = 0; j < M; ++j )
    {
      r[j] = std::round( u( rng ) * 4.0 ) / 4.0;
      shifted[j] = r[j] + c;
    }
    auto a = compute_advantages( r, 1e-8 );
    auto b = compute_advantages( shifted, 1e-8 );
    for ( std::size_t j = 0; j < M; ++j )
      REQUIRE( std::abs( a[j] - b[j] ) <= 1e-9 );
    CHECK( std::max_element( a.begin(), a.end() ) - a.begin() == std::max_element( r.begin(), r.end() ) - r.begin() );

    double mu = std::accumulate( r.begin(), r.end(), 0.0 ) / M;
    double var = 0.0;
    for ( auto x : r )
      var += ( x - mu ) * ( x - mu );
    double sigma = std::sqrt( var / M );
    if ( sigma == 0.0 )
      continue;
    double mean_a = std::accumulate( a.begin(), a.end(), 0.0 ) / M;
    double var_a = 0.0;
    for ( auto x : a )
      var_a += ( x - mean_a ) * ( x - mean_a );
    CHECK( std::abs( mean_a ) <= 1e-9 );
    CHECK( std::abs( std::sqrt( var_a / M ) - sigma / ( sigma + 1e-8 ) ) <= 1e-9 );
  }
}

TEST_CASE( "clipped surrogate term" )
{
  for ( double A : { -3.0, -0.5, 0.0, 0.25, 2.0 } )
    CHECK( clipped_term( 1.0, A, 0.2 ) == A );
  CHECK( clipped_term( 1.5, 2.0, 0.2 ) == doctest::Approx( 2.4 ).epsilon( 1e-15 ) );
  CHECK( clipped_term( 0.5, -1.0, 0.2 ) == doctest::Approx( -0.8 ).epsilon( 1e-15 ) );
  CHECK( clipped_term( 0.5, 1.0, 0.2 ) == 0.5 );
}

TEST_CASE( "importance ratio" )
{
  auto cell = nand3();
  scripted_policy pi( { "N1", "N2" }, Eigen::Vector2d( 0.3, -0.2 ) );
  scripted_policy old( { "N1", "N2" }, Eigen::Vector2d( -0.1, 0.4 ) );
  CHECK( is_ratio( pi, pi, cell, { "N1" }, 0 ) == 1.0 );

  auto p_new = std::exp( 0.3 ) / ( std::exp( 0.3 ) + std::exp( -0.2 ) );
  auto p_old = std::exp( -0.1 ) / ( std::exp( -0.1 ) + std::exp( 0.4 ) );
  CHECK( is_ratio( pi, old, cell, { "N1" }, 0 ) == doctest::Approx( p_new / p_old ).epsilon( 1e-12 ) );

  scripted_policy narrow( { "N2" }, Eigen::VectorXd::Zero( 1 ) );
  CHECK_THROWS_AS( is_ratio( pi, narrow, cell, { "N1" }, 0 ), zero_old_prob );
}

TEST_CASE( "categorical KL" )
{
  auto kl = categorical_kl( Eigen::Vector2d( 0.5, 0.5 ), Eigen::Vector2d( 0.9, 0.1 ) );
  CHECK( kl == doctest::Approx( 0.5 * std::log( 0.5 / 0.9 ) + 0.5 * std::log( 0.5 / 0.1 ) ).epsilon( 1e-14 ) );
  CHECK( kl == doctest::Approx( 0.5108 ).epsilon( 1e-4 ) );
  CHECK_THROWS_AS( categorical_kl( Eigen::Vector2d( 0.5, 0.5 ), Eigen::Vector2d( 1.0, 0.0 ) ), support_mismatch );
  CHECK( categorical_kl( Eigen::Vector2d( 1.0, 0.0 ), Eigen::Vector2d( 0.5, 0.5 ) ) == doctest::Approx( std::log( 2.0 ) ) );

  auto cell = nand3();
  toy_softmax_policy uniform;
  CHECK( kl_penalty( uniform, uniform, cell ) == 0.0 );

  std::mt19937_64 rng( 2 );
  std::uniform_real_distribution<double> u( 0.0, 1.0 );
  for ( int trial = 0; trial < 1000; ++trial )
  {
    std::size_t n = 2 + rng() % 6;
    Eigen::VectorXd p( n ), q( n );
    for ( std::size_t i = 0; i < n; ++i )
    {
      p( i ) = u( rng ) + 1e-3;
      q( i ) = u( rng ) + 1e-3;
    }
    p /= p.sum();
    q /= q.sum();
    CHECK( categorical_kl( p, q ) >= 0.0 );
  }
}

TEST_CASE( "toy policy is a proper distribution over valid pivots" )
{
  for ( unsigned bits : { 0x17u, 0x69u, 0xE8u, 0x96u } )
  {
    auto cell = synth_function( truth_table( 3, bits ) );
    toy_softmax_policy pi( Eigen::VectorXd::LinSpaced( pivot_feature_count, -1.0, 1.0 ) );
    auto support = pi.support( cell, {} );
    auto valid = list_valid_pivots( cell );
    REQUIRE( support.size() == valid.size() );
    for ( std::size_t i = 0; i < valid.size(); ++i )
      CHECK( support[i] == valid[i].net.name );
    if ( support.empty() )
      continue;
    CHECK( pi.next_log_probs( cell, {} ).array().exp().sum() == doctest::Approx( 1.0 ).epsilon( 1e-14 ) );
    CHECK( pi.support( cell, { support[0] } ).empty() );
    auto tokens = greedy_tokens( pi, cell );
    CHECK( tokens.size() == 1 );
  }
}

TEST_CASE( "toy policy Jacobian matches finite differences" )
{
  auto cell = synth_function( truth_table( 3, 0x96 ) );
  std::mt19937_64 rng( 4 );
  toy_softmax_policy pi( random_vector( rng, pivot_feature_count, 1.0 ) );
  auto J = pi.next_log_prob_jacobian( cell, {} );
  auto theta = pi.params();
  for ( Eigen::Index k = 0; k < theta.size(); ++k )
  {
    auto plus = theta, minus = theta;
    plus( k ) += 1e-6;
    minus( k ) -= 1e-6;
    toy_softmax_policy a( plus ), b( minus );
    Eigen::VectorXd col = ( a.next_log_probs( cell, {} ) - b.next_log_probs( cell, {} ) ) / 2e-6;
    CHECK( ( col - J.col( k ) ).norm() <= 1e-6 * ( 1.0 + col.norm() ) );
  }
}

TEST_CASE( "pivot features" )
{
  auto cell = aoi221_cell();
  auto f = pivot_features( cell );
  REQUIRE( f.size() == 4 );
  auto now = static_cast<double>( proxy_score( cell ).breaks );
  for ( auto const& [name, phi] : f )
  {
    auto pivot = validate_pivot( cell, name );
    CHECK( phi( 0 ) + phi( 1 ) == 1.0 );
    CHECK( phi( 0 ) == ( pivot.network == pull_network::pull_up ? 1.0 : 0.0 ) );
    auto after = static_cast<double>( proxy_score( swap_net( cell, name ) ).breaks );
    CHECK( phi( 5 ) == now / 4.0 );
    CHECK( phi( 6 ) == after / 4.0 );
    CHECK( phi( 7 ) == ( after - now ) / 4.0 );
  }
}

TEST_CASE( "group sampling" )
{
  auto cell = nand3();
  toy_softmax_policy uniform;
  auto a = sample_group( uniform, cell, 4, proxy_reward{}, 99 );
  auto b = sample_group( uniform, cell, 4, proxy_reward{}, 99 );
  CHECK( a.candidates == b.candidates );
  CHECK( a.candidates.size() == 4 );
  CHECK( a.netlists.size() == 4 );
  CHECK( a.prompt == &cell );

  auto nand = parse_spice( nand2_text );
  auto same = sample_group( uniform, nand, 5, proxy_reward{}, 3 );
  for ( auto const& c : same.candidates )
    CHECK( c == token_seq{ "N1" } );
  for ( auto r : same.rewards )
    CHECK( r == same.rewards.front() );

  CHECK_THROWS_AS( sample_group( uniform, parse_spice( inverter_text ), 4, proxy_reward{}, 1 ), no_valid_pivots );
}

TEST_CASE( "group sampling re-prompts on invalid pivots" )
{
  auto cell = nand3();
  scripted_policy noisy( { "Y", "N1", "A" }, Eigen::Vector3d( 0.0, 0.0, 0.0 ) );
  auto g = sample_group( noisy, cell, 6, proxy_reward{}, 5 );
  CHECK( g.candidates.size() == 6 );
  for ( auto const& c : g.candidates )
    CHECK( c == token_seq{ "N1" } );
  CHECK( !g.events.empty() );
  for ( auto const& e : g.events )
    CHECK( ( e.find( invalid_pivot_prompt ) == 0 || e.rfind( "warning", 0 ) == 0 ) );

  scripted_policy hopeless( { "Y" }, Eigen::VectorXd::Zero( 1 ) );
  auto h = sample_group( hopeless, cell, 3, proxy_reward{}, 5, 2 );
  CHECK( h.candidates.empty() );
  CHECK( std::count_if( h.events.begin(), h.events.end(), []( auto const& e ) { return e.rfind( "warning", 0 ) == 0; } ) == 3 );
}

TEST_CASE( "sampled groups over corpus cells stay equivalent" )
{
  toy_softmax_policy uniform;
  for ( unsigned bits = 1; bits < 255; bits += 7 )
  {
    truth_table tt( 3, bits );
    auto cell = synth_function( tt );
    if ( list_valid_pivots( cell ).empty() )
      continue;
    auto g = sample_group( uniform, cell, 4, proxy_reward{}, bits );
    for ( auto const& n : g.netlists )
      REQUIRE( equiv_check( n, tt ).pass );
  }
}

TEST_CASE( "objective identities" )
{
  auto cell = synth_function( truth_table( 3, 0x96 ) );
  std::mt19937_64 rng( 6 );
  toy_softmax_policy pi( random_vector( rng, pivot_feature_count, 0.5 ) );
  auto g = sample_group( pi, cell, 6, proxy_reward{}, 8 );
  g.advantages = { 0.5, -1.0, 2.0, 0.0, -0.25, 1.5 };
  auto on = grpo_objective( g, pi, pi, pi, 0.2, 0.04 );
  CHECK( on.value == doctest::Approx( ( 0.5 - 1.0 + 2.0 + 0.0 - 0.25 + 1.5 ) / 6.0 ).epsilon( 1e-12 ) );
  CHECK( on.kl == 0.0 );

  g.advantages.assign( 6, 0.0 );
  auto flat = grpo_objective( g, pi, pi, pi, 0.2, 0.04 );
  CHECK( flat.value == 0.0 );
  CHECK( flat.gradient.norm() == 0.0 );
}

TEST_CASE( "objective gradient matches central differences" )
{
  auto cell = synth_function( truth_table( 3, 0x96 ) );
  std::mt19937_64 rng( 12 );
  std::uniform_real_distribution<double> u( 0.0, 1.0 );
  for ( int trial = 0; trial < 20; ++trial )
  {
    toy_softmax_policy old( random_vector( rng, pivot_feature_count, 0.7 ) );
    toy_softmax_policy ref( random_vector( rng, pivot_feature_count, 0.7 ) );
    toy_softmax_policy pi( old.params() + random_vector( rng, pivot_feature_count, 0.3 ) );
    auto g = sample_group( old, cell, 5, proxy_reward{}, rng() );
    g.advantages = compute_advantages( { 0, 1, -1, 2, 0.5 }, 1e-8 );
    double lambda = 0.05 + 0.4 * u( rng ), kappa = u( rng );
    auto obj = grpo_objective( g, pi, old, ref, lambda, kappa );
    auto theta = pi.params();
    Eigen::VectorXd numeric( theta.size() );
    for ( Eigen::Index k = 0; k < theta.size(); ++k )
    {
      auto plus = theta, minus = theta;
      plus( k ) += 1e-6;
      minus( k ) -= 1e-6;
      toy_softmax_policy a( plus ), b( minus );
      numeric( k ) = ( grpo_objective( g, a, old, ref, lambda, kappa ).value -
                       grpo_objective( g, b, old, ref, lambda, kappa ).value ) / 2e-6;
    }
    double denom = numeric.norm() + obj.gradient.norm();
    CHECK( ( denom < 1e-12 || ( numeric - obj.gradient ).norm() / denom < 1e-5 ) );
  }
}

TEST_CASE( "scripted policy objective gradient covers the clipped branches" )
{
  auto cell = nand3();
  std::mt19937_64 rng( 21 );
  for ( int trial = 0; trial < 50; ++trial )
  {
    std::vector<std::string> tokens{ "A", "B", "C", "D" };
    scripted_policy old( tokens, random_vector( rng, 4, 1.0 ) );
    scripted_policy ref( tokens, random_vector( rng, 4, 1.0 ) );
    scripted_policy pi( tokens, old.params() + random_vector( rng, 4, 0.6 ) );
    rollout_group g;
    g.prompt = &cell;
    for ( std::size_t j = 0; j < 4; ++j )
      g.candidates.push_back( { tokens[j] } );
    g.advantages = { 1.0, -1.0, 0.5, -0.5 };
    auto obj = grpo_objective( g, pi, old, ref, 0.2, 0.3 );
    auto theta = pi.params();
    Eigen::VectorXd numeric( 4 );
    for ( Eigen::Index k = 0; k < 4; ++k )
    {
      auto plus = theta, minus = theta;
      plus( k ) += 1e-6;
      minus( k ) -= 1e-6;
      scripted_policy a( tokens, plus ), b( tokens, minus );
      numeric( k ) = ( grpo_objective( g, a, old, ref, 0.2, 0.3 ).value - grpo_objective( g, b, old, ref, 0.2, 0.3 ).value ) / 2e-6;
    }
    CHECK( ( numeric - obj.gradient ).norm() <= 1e-5 * ( numeric.norm() + obj.gradient.norm() ) );
  }
}

TEST_CASE( "training a single cell converges to its best pivot" )
{
  auto targets = unique_best_cells( 1 );
  REQUIRE( targets.size() == 1 );
  toy_softmax_policy pi, ref;
  grpo_config cfg;
  cfg.I = 200;
  auto result = train_policy( { targets[0].cell }, pi, ref, proxy_reward{}, cfg );
  CHECK( result.history.size() == 200 );
  CHECK( greedy_tokens( pi, targets[0].cell ) == token_seq{ targets[0].best } );

  toy_softmax_policy pi2, ref2;
  auto again = train_policy( { targets[0].cell }, pi2, ref2, proxy_reward{}, cfg );
  CHECK( pi2.params() == pi.params() );
  CHECK( history_csv( again.history ) == history_csv( result.history ) );
}

TEST_CASE( "a dominant KL term keeps the policy near the reference" )
{
  auto targets = unique_best_cells( 1 );
  REQUIRE( targets.size() == 1 );
  auto const& cell = targets[0].cell;
  toy_softmax_policy pi, ref;
  grpo_config cfg;
  cfg.I = 200;
  cfg.kappa = 1e3;
  // the KL Hessian scales with kappa, so the ascent step must shrink to stay stable
  cfg.lr = 1e-3;
  train_policy( { cell }, pi, ref, proxy_reward{}, cfg );
  Eigen::VectorXd p = pi.next_log_probs( cell, {} ).array().exp();
  Eigen::VectorXd q = ref.next_log_probs( cell, {} ).array().exp();
  CHECK( 0.5 * ( p - q ).cwiseAbs().sum() <= 0.05 );

  toy_softmax_policy free_pi, free_ref;
  cfg.kappa = 0.0;
  train_policy( { cell }, free_pi, free_ref, proxy_reward{}, cfg );
  Eigen::VectorXd f = free_pi.next_log_probs( cell, {} ).array().exp();
  CHECK( ( f - q ).cwiseAbs().sum() > ( p - q ).cwiseAbs().sum() );
}

TEST_CASE( "training configuration checks" )
{
  auto targets = unique_best_cells( 1 );
  toy_softmax_policy pi, ref;
  grpo_config cfg;
  cfg.I = 5;
  cfg.M = 2;
  auto r = train_policy( { targets[0].cell }, pi, ref, proxy_reward{}, cfg );
  CHECK( r.history.size() == 5 );

  cfg.M = 1;
  CHECK_THROWS_AS( train_policy( { targets[0].cell }, pi, ref, proxy_reward{}, cfg ), error );
  cfg.M = 4;
  cfg.lambda = 1.0;
  CHECK_THROWS_AS( train_policy( { targets[0].cell }, pi, ref, proxy_reward{}, cfg ), error );
  cfg.lambda = 0.2;
  CHECK_THROWS_AS( train_policy( {}, pi, ref, proxy_reward{}, cfg ), empty_dataset );

  auto log = train_policy( { parse_spice( inverter_text ), targets[0].cell }, pi, ref, proxy_reward{}, cfg ).log;
  CHECK( log.front().find( "skipping INV" ) == 0 );
  CHECK_THROWS_AS( train_policy( { parse_spice( inverter_text ) }, pi, ref, proxy_reward{}, cfg ), empty_dataset );
}

TEST_CASE( "history CSV" )
{
  std::vector<history_row> rows{ { 1, -0.5, 0.25, 0.0, "N3" } };
  CHECK( history_csv( rows ) == "iter,mean_reward,objective,kl,accepted_pivot\n1,-0.5,0.25,0,N3\n" );
}

TEST_CASE( "policy persistence" )
{
  toy_softmax_policy pi( Eigen::VectorXd::LinSpaced( pivot_feature_count, -0.3, 0.9 ) );
  auto text = save_policy( pi );
  auto doc = nlohmann::json::parse( text );
  CHECK( doc["format_version"] == policy_format_version );
  CHECK( doc["feature_map_version"] == pivot_feature_map_version );
  CHECK( doc["theta"].size() == pivot_feature_count );
  CHECK( load_policy( text ).params() == pi.params() );

  auto bad = doc;
  bad["feature_map_version"] = 7;
  CHECK_THROWS_AS( load_policy( bad.dump() ), format_error );
  bad = doc;
  bad["theta"].erase( 0 );
  CHECK_THROWS_AS( load_policy( bad.dump() ), shape_mismatch );
}

TEST_CASE( "inference loop" )
{
  toy_softmax_policy pi;
  auto routable = parse_spice( nand2_text );
  auto t = optimize_cell( routable, pi, proxy_reward{}, 5 );
  CHECK( t.steps.empty() );
  CHECK( t.swaps == 0 );

  auto aoi = aoi221_cell();
  auto none = optimize_cell( aoi, pi, proxy_reward{}, 0 );
  CHECK( none.result == aoi );
  CHECK( none.steps.empty() );

  toy_softmax_policy trained, ref;
  grpo_config cfg;
  cfg.I = 100;
  train_policy( { aoi }, trained, ref, proxy_reward{}, cfg );
  auto run = optimize_cell( aoi, trained, proxy_reward{}, 5 );
  CHECK( run.initial_breaks > 0 );
  CHECK( run.final_breaks == 0 );
  CHECK( run.steps.size() <= 5 );
  CHECK( equiv_check( run.result, aoi221_table() ).pass );
  CHECK( run.final_breaks == proxy_score( run.result ).breaks );
  for ( auto const& s : run.steps )
    CHECK( ( !s.accepted || s.reward_after > s.reward_before ) );
}

TEST_CASE( "inference loop properties over unroutable seeds" )
{
  toy_softmax_policy pi;
  for ( unsigned bits = 1; bits < 255; ++bits )
  {
    truth_table tt( 3, bits );
    auto cell = synth_function( tt );
    for ( auto mode : { proposal_mode::greedy, proposal_mode::sample, proposal_mode::uniform } )
    {
      auto t = optimize_cell( cell, pi, proxy_reward{}, 5, mode, bits );
      CHECK( t.steps.size() <= 5 );
      CHECK( t.final_breaks <= t.initial_breaks );
      REQUIRE( equiv_check( t.result, tt ).pass );
      std::size_t accepted = 0;
      for ( auto const& s : t.steps )
        accepted += s.accepted;
      CHECK( accepted == t.swaps );
    }
  }
}
