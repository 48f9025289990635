#include "topcell/error.hpp"
#include "topcell/grpo.hpp"
#include "topcell/permute.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace topcell
{

namespace
{

std::uint64_t splitmix64( std::uint64_t x )
{
  x += 0x9e3779b97f4a7c15ull;
  x = ( x ^ ( x >> 30 ) ) * 0xbf58476d1ce4e5b9ull;
  x = ( x ^ ( x >> 27 ) ) * 0x94d049bb133111ebull;
  return x ^ ( x >> 31 );
}

std::string decode_pivot( token_seq const& tokens )
{
  return std::accumulate( tokens.begin(), tokens.end(), std::string() );
}

std::string join( token_seq const& tokens )
{
  std::string out;
  for ( auto const& t : tokens )
    out += ( out.empty() ? "" : " " ) + t;
  return out;
}

std::size_t index_of( std::vector<std::string> const& support, std::string const& token )
{
  auto it = std::find( support.begin(), support.end(), token );
  return it == support.end() ? support.size() : static_cast<std::size_t>( it - support.begin() );
}

// log-probabilities of `other` re-indexed to the support of `pi`; -inf where missing
Eigen::VectorXd aligned_log_probs( policy const& pi, policy const& other, cell_netlist const& prompt,
                                   token_seq const& prefix )
{
  auto mine = pi.support( prompt, prefix );
  auto theirs = other.support( prompt, prefix );
  auto lp = other.next_log_probs( prompt, prefix );
  Eigen::VectorXd out( static_cast<Eigen::Index>( mine.size() ) );
  for ( std::size_t i = 0; i < mine.size(); ++i )
  {
    auto j = index_of( theirs, mine[i] );
    out( static_cast<Eigen::Index>( i ) ) =
        j == theirs.size() ? -std::numeric_limits<double>::infinity() : lp( static_cast<Eigen::Index>( j ) );
  }
  return out;
}

} // namespace

/* GRPO pieces */

rollout_group sample_group( policy const& old_policy, cell_netlist const& cell, std::size_t M,
                            reward_source const& reward, std::uint64_t seed, std::size_t max_retries )
{
  if ( list_valid_pivots( cell ).empty() )
    throw no_valid_pivots( cell.name );

  rollout_group group;
  group.prompt = &cell;
  for ( std::size_t j = 0; j < M; ++j )
  {
    std::mt19937_64 rng( splitmix64( seed ^ splitmix64( j ) ) );
    for ( std::size_t attempt = 0; attempt <= max_retries; ++attempt )
    {
      auto tokens = sample_tokens( old_policy, cell, rng );
      try
      {
        auto swapped = swap_net( cell, decode_pivot( tokens ) );
        group.rewards.push_back( reward_of( reward, swapped ) );
        group.candidates.push_back( std::move( tokens ) );
        group.netlists.push_back( std::move( swapped ) );
        break;
      }
      catch ( invalid_pivot const& e )
      {
        group.events.push_back( e.what() );
      }
      catch ( degenerate_region const& e )
      {
        group.events.push_back( std::string( invalid_pivot_prompt ) + " (" + e.what() + ")" );
      }
      if ( attempt == max_retries )
        group.events.push_back( "warning: slot " + std::to_string( j ) + " skipped after " +
                                std::to_string( max_retries ) + " retries" );
    }
  }
  return group;
}

std::vector<double> compute_advantages( std::vector<double> const& rewards, double eps )
{
  if ( rewards.empty() )
    return {};
  double const n = static_cast<double>( rewards.size() );
  double mu = std::accumulate( rewards.begin(), rewards.end(), 0.0 ) / n;
  double var = 0.0;
  for ( auto r : rewards )
    var += ( r - mu ) * ( r - mu );
  double sigma = std::sqrt( var / n );
  std::vector<double> out;
  for ( auto r : rewards )
    out.push_back( ( r - mu ) / ( sigma + eps ) );
  return out;
}

double clipped_term( double rho, double advantage, double lambda )
{
  return std::min( rho * advantage, std::clamp( rho, 1.0 - lambda, 1.0 + lambda ) * advantage );
}

double is_ratio( policy const& pi, policy const& old_policy, cell_netlist const& prompt, token_seq const& tokens,
                 std::size_t t )
{
  if ( t >= tokens.size() )
    throw error( error_category::input, "token position out of range" );
  auto lp_old = token_log_probs( old_policy, prompt, tokens )[t];
  if ( !std::isfinite( lp_old ) )
    throw zero_old_prob( tokens[t] );
  auto lp = token_log_probs( pi, prompt, tokens )[t];
  return std::exp( lp - lp_old );
}

double categorical_kl( Eigen::VectorXd const& p, Eigen::VectorXd const& q )
{
  if ( p.size() != q.size() )
    throw support_mismatch();
  double kl = 0.0;
  for ( Eigen::Index i = 0; i < p.size(); ++i )
  {
    if ( p( i ) <= 0.0 )
      continue;
    if ( q( i ) <= 0.0 )
      throw support_mismatch();
    kl += p( i ) * std::log( p( i ) / q( i ) );
  }
  return kl;
}

double kl_penalty( policy const& pi, policy const& reference, cell_netlist const& prompt, token_seq const& prefix )
{
  Eigen::VectorXd p = pi.next_log_probs( prompt, prefix ).array().exp();
  Eigen::VectorXd q = aligned_log_probs( pi, reference, prompt, prefix ).array().exp();
  return categorical_kl( p, q );
}

objective_value grpo_objective( rollout_group const& group, policy const& pi, policy const& old_policy,
                                policy const& reference, double lambda, double kappa )
{
  if ( group.prompt == nullptr || group.advantages.size() != group.candidates.size() )
    throw error( error_category::input, "rollout group has no prompt or unset advantages" );

  auto const& prompt = *group.prompt;
  objective_value out;
  out.gradient = Eigen::VectorXd::Zero( pi.params().size() );
  std::size_t tokens_seen = 0;

  for ( std::size_t j = 0; j < group.candidates.size(); ++j )
  {
    auto const& T = group.candidates[j];
    if ( T.empty() )
      continue;
    double const A = group.advantages[j];
    double const inv_len = 1.0 / static_cast<double>( T.size() );
    token_seq prefix;
    for ( auto const& tok : T )
    {
      auto support = pi.support( prompt, prefix );
      auto k = index_of( support, tok );
      if ( k == support.size() )
        throw error( error_category::domain, "token '" + tok + "' is outside the policy support" );
      auto lp = pi.next_log_probs( prompt, prefix );
      auto lp_old = aligned_log_probs( pi, old_policy, prompt, prefix );
      auto lp_ref = aligned_log_probs( pi, reference, prompt, prefix );
      auto J = pi.next_log_prob_jacobian( prompt, prefix );
      auto const ki = static_cast<Eigen::Index>( k );

      if ( !std::isfinite( lp_old( ki ) ) )
        throw zero_old_prob( tok );
      double rho = std::exp( lp( ki ) - lp_old( ki ) );
      double surrogate = clipped_term( rho, A, lambda );

      Eigen::VectorXd p = lp.array().exp();
      double kl = categorical_kl( p, lp_ref.array().exp().matrix() );

      out.value += inv_len * ( surrogate - kappa * kl );
      out.kl += kl;
      ++tokens_seen;

      // the unclipped branch carries the gradient; the clipped one is flat in theta
      if ( rho * A <= std::clamp( rho, 1.0 - lambda, 1.0 + lambda ) * A )
        out.gradient += inv_len * A * rho * J.row( ki ).transpose();
      for ( Eigen::Index i = 0; i < p.size(); ++i )
      {
        if ( p( i ) > 0.0 )
          out.gradient -= inv_len * kappa * p( i ) * ( lp( i ) - lp_ref( i ) ) * J.row( i ).transpose();
      }
      prefix.push_back( tok );
    }
  }
  if ( !group.candidates.empty() )
  {
    out.value /= static_cast<double>( group.candidates.size() );
    out.gradient /= static_cast<double>( group.candidates.size() );
  }
  if ( tokens_seen )
    out.kl /= static_cast<double>( tokens_seen );
  return out;
}

/* training */

void grpo_config::check() const
{
  if ( M < 2 )
    throw error( error_category::input, "group size M must be at least 2" );
  if ( !( lambda > 0.0 && lambda < 1.0 ) )
    throw error( error_category::input, "clip range lambda must lie in (0, 1)" );
  if ( !( eps > 0.0 ) )
    throw error( error_category::input, "eps must be positive" );
}

training_result train_policy( std::vector<cell_netlist> const& dataset, policy& pi, policy const& reference,
                              reward_source const& reward, grpo_config const& config )
{
  config.check();
  if ( dataset.empty() )
    throw empty_dataset();

  training_result result;
  std::vector<cell_netlist const*> usable;
  for ( auto const& cell : dataset )
  {
    if ( list_valid_pivots( cell ).empty() )
      result.log.push_back( "skipping " + cell.name + ": no valid pivot" );
    else
      usable.push_back( &cell );
  }
  if ( usable.empty() )
    throw empty_dataset();

  std::mt19937_64 rng( config.seed );
  for ( std::size_t iter = 1; iter <= config.I; ++iter )
  {
    auto old_policy = pi.snapshot();
    auto const& cell = *usable[rng() % usable.size()];
    auto group = sample_group( *old_policy, cell, config.M, reward, rng(), config.max_retries );
    for ( auto const& e : group.events )
      result.log.push_back( "iter " + std::to_string( iter ) + ": " + e );
    group.advantages = compute_advantages( group.rewards, config.eps );

    history_row row{ iter, 0.0, 0.0, 0.0, "" };
    if ( !group.rewards.empty() )
    {
      row.mean_reward = std::accumulate( group.rewards.begin(), group.rewards.end(), 0.0 ) /
                        static_cast<double>( group.rewards.size() );
      auto best = std::max_element( group.rewards.begin(), group.rewards.end() ) - group.rewards.begin();
      row.accepted_pivot = join( group.candidates[static_cast<std::size_t>( best )] );
    }
    for ( std::size_t k = 0; k < config.K; ++k )
    {
      auto obj = grpo_objective( group, pi, *old_policy, reference, config.lambda, config.kappa );
      row.objective = obj.value;
      row.kl = obj.kl;
      pi.set_params( pi.params() + config.lr * obj.gradient );
    }
    result.history.push_back( std::move( row ) );
  }
  return result;
}

std::string history_csv( std::vector<history_row> const& history )
{
  std::ostringstream os;
  os.precision( 17 );
  os << "iter,mean_reward,objective,kl,accepted_pivot\n";
  for ( auto const& r : history )
    os << r.iter << ',' << r.mean_reward << ',' << r.objective << ',' << r.kl << ',' << r.accepted_pivot << '\n';
  return os.str();
}

/* inference */

optimization_trace optimize_cell( cell_netlist const& cell, policy const& pi, reward_source const& reward,
                                  std::size_t budget, proposal_mode mode, std::uint64_t seed )
{
  optimization_trace trace;
  trace.result = cell;
  trace.initial_breaks = trace.final_breaks = proxy_score( cell ).breaks;
  if ( trace.final_breaks == 0 || budget == 0 )
    return trace;

  std::mt19937_64 rng( seed );
  double current = reward_of( reward, trace.result );
  std::set<std::string> rejected;

  while ( trace.steps.size() < budget && trace.final_breaks > 0 )
  {
    auto support = pi.support( trace.result, {} );
    Eigen::VectorXd lp = pi.next_log_probs( trace.result, {} );
    std::vector<std::size_t> open;
    for ( std::size_t i = 0; i < support.size(); ++i )
    {
      if ( !rejected.count( support[i] ) )
        open.push_back( i );
    }
    if ( open.empty() )
      break;

    std::size_t pick = open.front();
    if ( mode == proposal_mode::greedy )
    {
      for ( auto i : open )
      {
        if ( lp( static_cast<Eigen::Index>( i ) ) > lp( static_cast<Eigen::Index>( pick ) ) )
          pick = i;
      }
    }
    else if ( mode == proposal_mode::uniform )
    {
      pick = open[rng() % open.size()];
    }
    else
    {
      double total = 0.0;
      for ( auto i : open )
        total += std::exp( lp( static_cast<Eigen::Index>( i ) ) );
      double u = static_cast<double>( rng() >> 11 ) * 0x1.0p-53 * total;
      for ( auto i : open )
      {
        pick = i;
        u -= std::exp( lp( static_cast<Eigen::Index>( i ) ) );
        if ( u < 0.0 )
          break;
      }
    }

    trace_step step{ support[pick], true, false, current, current, trace.final_breaks };
    try
    {
      auto swapped = swap_net( trace.result, support[pick] );
      step.reward_after = reward_of( reward, swapped );
      step.breaks_after = proxy_score( swapped ).breaks;
      if ( step.reward_after > current )
      {
        step.accepted = true;
        trace.result = std::move( swapped );
        current = step.reward_after;
        trace.final_breaks = step.breaks_after;
        ++trace.swaps;
        rejected.clear();
      }
    }
    catch ( invalid_pivot const& )
    {
      step.valid = false;
    }
    catch ( degenerate_region const& )
    {
      step.valid = false;
    }
    if ( !step.accepted )
      rejected.insert( step.pivot );
    trace.steps.push_back( std::move( step ) );
  }
  return trace;
}

} // namespace topcell
