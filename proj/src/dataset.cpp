#include "topcell/dataset.hpp"

#include "topcell/error.hpp"
#include "topcell/permute.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace topcell
{

using ordered_json = nlohmann::ordered_json;

std::vector<truth_table> enumerate_functions()
{
  std::vector<truth_table> out;
  for ( std::uint64_t bits = 1; bits < 255; ++bits )
    out.emplace_back( 3, bits );
  return out;
}

std::string function_cell_name( truth_table const& tt )
{
  auto text = tt.to_string();
  text[text.find( ':' )] = '_';
  return "F" + text;
}

/* records */

std::string corpus_record::key() const
{
  return function.to_string() + "/" + std::to_string( variant_index );
}

cell_netlist corpus_record::cell() const
{
  return parse_spice( netlist_text );
}

std::string record_to_json( corpus_record const& r )
{
  ordered_json j;
  j["function"] = r.function.to_string();
  j["variant_index"] = r.variant_index;
  j["netlist_text"] = r.netlist_text;
  j["canonical_digest"] = digest_hex( r.canonical_digest );
  j["proxy_breaks"] = r.proxy_breaks;
  j["label"] = r.label;
  j["equiv_verified"] = r.equiv_verified;
  return j.dump();
}

corpus_record record_from_json( std::string const& line )
{
  try
  {
    auto j = nlohmann::json::parse( line );
    corpus_record r;
    r.function = truth_table::parse( j.at( "function" ).get<std::string>() );
    r.variant_index = j.at( "variant_index" ).get<std::size_t>();
    r.netlist_text = j.at( "netlist_text" ).get<std::string>();
    r.canonical_digest = std::stoull( j.at( "canonical_digest" ).get<std::string>(), nullptr, 16 );
    r.proxy_breaks = j.at( "proxy_breaks" ).get<std::size_t>();
    r.label = j.at( "label" ).get<int>();
    r.equiv_verified = j.at( "equiv_verified" ).get<bool>();
    if ( r.label != ( r.proxy_breaks == 0 ? 1 : -1 ) )
      throw format_error( "record " + r.key() + " has a label inconsistent with its breaks" );
    return r;
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw format_error( std::string( "malformed corpus record: " ) + e.what() );
  }
  catch ( std::logic_error const& e )
  {
    throw format_error( std::string( "malformed corpus digest: " ) + e.what() );
  }
}

/* build */

namespace
{

struct function_result
{
  std::vector<corpus_record> records;
  function_stats stats;
};

function_result process_function( truth_table const& tt, build_config const& config )
{
  auto const name = function_cell_name( tt );
  auto expr = factor_expr( minimize_sop( table_to_sop( tt ), tt.n_inputs() ) );
  auto seed = synth_cell( name, expr, tt );
  auto en = enumerate_topologies( seed, config.cap );

  function_result out;
  out.stats.pivots = en.pivots.size();
  out.stats.emitted = en.variants.size();
  out.stats.unique = en.unique.size();
  for ( std::size_t i = 0; i < en.variants.size(); ++i )
  {
    if ( !equiv_check( en.variants[i], tt ).pass )
      throw error( error_category::internal, "variant " + std::to_string( i ) + " of " + tt.to_string() +
                                                 " fails equivalence" );
  }
  for ( auto i : en.unique )
  {
    corpus_record r;
    r.function = tt;
    r.variant_index = i;
    r.netlist_text = serialize_spice( en.variants[i] );
    r.canonical_digest = en.digests[i];
    r.proxy_breaks = proxy_score( en.variants[i], config.proxy ).breaks;
    r.label = r.proxy_breaks == 0 ? 1 : -1;
    r.equiv_verified = true;
    out.records.push_back( std::move( r ) );
  }
  return out;
}

} // namespace

corpus build_corpus( build_config const& config )
{
  if ( config.cap == 0 )
    throw error( error_category::input, "enumeration cap must be at least 1" );
  auto functions = config.functions.empty() ? enumerate_functions() : config.functions;
  for ( auto const& tt : functions )
  {
    if ( tt.is_trivial() )
      throw trivial_function();
  }

  std::vector<function_result> results( functions.size() );
  std::vector<std::exception_ptr> failures( functions.size() );
  std::atomic<std::size_t> next{ 0 };
  auto worker = [&]() {
    for ( std::size_t i = next++; i < functions.size(); i = next++ )
    {
      try
      {
        results[i] = process_function( functions[i], config );
      }
      catch ( ... )
      {
        failures[i] = std::current_exception();
      }
    }
  };
  std::size_t const jobs = std::max<std::size_t>( 1, std::min( config.jobs, functions.size() ) );
  if ( jobs == 1 )
    worker();
  else
  {
    std::vector<std::thread> pool;
    for ( std::size_t j = 0; j < jobs; ++j )
      pool.emplace_back( worker );
    for ( auto& t : pool )
      t.join();
  }
  for ( auto const& f : failures )
  {
    if ( f )
      std::rethrow_exception( f );
  }

  corpus c;
  c.stats.functions = functions.size();
  for ( std::size_t i = 0; i < functions.size(); ++i )
  {
    auto& r = results[i];
    c.stats.per_function[functions[i].to_string()] = r.stats;
    c.stats.emitted += r.stats.emitted;
    c.stats.duplicates += r.stats.emitted - r.stats.unique;
    for ( auto& rec : r.records )
    {
      ( rec.label == 1 ? c.stats.routable : c.stats.unroutable ) += 1;
      c.records.push_back( std::move( rec ) );
    }
  }
  c.stats.records = c.records.size();
  return c;
}

std::string stats_to_json( corpus_stats const& s )
{
  ordered_json j;
  j["functions"] = s.functions;
  j["emitted"] = s.emitted;
  j["records"] = s.records;
  j["duplicates"] = s.duplicates;
  j["routable"] = s.routable;
  j["unroutable"] = s.unroutable;
  ordered_json per = ordered_json::object();
  for ( auto const& [name, f] : s.per_function )
    per[name] = { { "pivots", f.pivots }, { "emitted", f.emitted }, { "unique", f.unique } };
  j["per_function"] = std::move( per );
  return j.dump( 1 ) + "\n";
}

void write_corpus( corpus const& c, std::filesystem::path const& out_dir )
{
  std::filesystem::create_directories( out_dir );
  std::ofstream records( out_dir / "corpus.jsonl", std::ios::binary );
  for ( auto const& r : c.records )
    records << record_to_json( r ) << '\n';
  std::ofstream stats( out_dir / "stats.json", std::ios::binary );
  stats << stats_to_json( c.stats );
  if ( !records || !stats )
    throw error( error_category::input, "cannot write corpus files to " + out_dir.string() );
}

std::vector<corpus_record> read_corpus( std::filesystem::path const& jsonl )
{
  std::ifstream in( jsonl, std::ios::binary );
  if ( !in )
    throw error( error_category::input, "cannot read " + jsonl.string() );
  std::vector<corpus_record> out;
  std::string line;
  while ( std::getline( in, line ) )
  {
    if ( !line.empty() )
      out.push_back( record_from_json( line ) );
  }
  return out;
}

/* selection and split */

std::vector<corpus_record> select_unroutable( std::vector<corpus_record> const& records )
{
  std::vector<corpus_record> out;
  std::copy_if( records.begin(), records.end(), std::back_inserter( out ), []( auto const& r ) { return r.label == -1; } );
  return out;
}

split_manifest split( std::vector<corpus_record> const& subset, double fraction, std::uint64_t seed )
{
  if ( !( fraction >= 0.0 && fraction <= 1.0 ) )
    throw error( error_category::input, "split fraction must lie in [0, 1]" );
  std::set<std::pair<unsigned, std::uint64_t>> distinct;
  for ( auto const& r : subset )
    distinct.emplace( r.function.n_inputs(), r.function.bits() );
  if ( distinct.size() < 2 )
    throw too_few_functions();

  std::vector<std::string> functions;
  for ( auto const& [n, bits] : distinct )
    functions.push_back( truth_table( n, bits ).to_string() );
  std::mt19937_64 rng( seed );
  for ( std::size_t i = functions.size(); i > 1; --i )
    std::swap( functions[i - 1], functions[rng() % i] );

  auto const F = functions.size();
  auto n_train = static_cast<std::size_t>( std::ceil( fraction * static_cast<double>( F ) - 1e-9 ) );
  split_manifest m;
  m.seed = seed;
  m.fraction = fraction;
  m.train_functions.assign( functions.begin(), functions.begin() + static_cast<std::ptrdiff_t>( n_train ) );
  m.eval_functions.assign( functions.begin() + static_cast<std::ptrdiff_t>( n_train ), functions.end() );
  std::set<std::string> train_set( m.train_functions.begin(), m.train_functions.end() );
  for ( auto const& r : subset )
    ( train_set.count( r.function.to_string() ) ? m.train : m.eval ).push_back( r.key() );
  return m;
}

std::string manifest_to_json( split_manifest const& m )
{
  ordered_json j;
  j["seed"] = m.seed;
  j["split_fraction"] = m.fraction;
  j["train_functions"] = m.train_functions;
  j["eval_functions"] = m.eval_functions;
  j["train"] = m.train;
  j["eval"] = m.eval;
  return j.dump( 1 ) + "\n";
}

split_manifest manifest_from_json( std::string const& text )
{
  try
  {
    auto j = nlohmann::json::parse( text );
    split_manifest m;
    m.seed = j.at( "seed" ).get<std::uint64_t>();
    m.fraction = j.at( "split_fraction" ).get<double>();
    m.train_functions = j.at( "train_functions" ).get<std::vector<std::string>>();
    m.eval_functions = j.at( "eval_functions" ).get<std::vector<std::string>>();
    m.train = j.at( "train" ).get<std::vector<std::string>>();
    m.eval = j.at( "eval" ).get<std::vector<std::string>>();
    return m;
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw format_error( std::string( "malformed split manifest: " ) + e.what() );
  }
}

} // namespace topcell
