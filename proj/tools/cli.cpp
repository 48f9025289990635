#include "cli.hpp"

#include "topcell/dataset.hpp"
#include "topcell/error.hpp"
#include "topcell/grpo.hpp"
#include "topcell/logic.hpp"
#include "topcell/permute.hpp"
#include "topcell/reward.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace topcell
{

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace
{

std::string read_file( fs::path const& path )
{
  std::ifstream in( path, std::ios::binary );
  if ( !in )
    throw error( error_category::input, "cannot read " + path.string() );
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file( fs::path const& path, std::string const& text )
{
  if ( path.has_parent_path() )
    fs::create_directories( path.parent_path() );
  std::ofstream out( path, std::ios::binary );
  out << text;
  if ( !out )
    throw error( error_category::input, "cannot write " + path.string() );
}

std::uint64_t resolve_seed( std::optional<std::uint64_t> const& flag )
{
  if ( flag )
    return *flag;
  if ( char const* env = std::getenv( "TOPCELL_SEED" ) )
  {
    try
    {
      return std::stoull( env );
    }
    catch ( std::exception const& )
    {
      throw error( error_category::input, "TOPCELL_SEED is not an unsigned integer" );
    }
  }
  return 42;
}

void write_manifest( fs::path const& out_dir, std::string const& command, std::uint64_t seed, ordered_json config,
                     std::vector<std::string> const& outputs )
{
  ordered_json j;
  j["command"] = command;
  j["git_describe"] = TOPCELL_GIT_DESCRIBE;
  j["seed"] = seed;
  j["config"] = std::move( config );
  j["outputs"] = outputs;
  write_file( out_dir / "run_manifest.json", j.dump( 1 ) + "\n" );
}

reward_source parse_reward( std::string const& spec )
{
  if ( spec == "proxy" )
    return proxy_reward{};
  if ( spec.rfind( "gnn:", 0 ) == 0 )
    return load_model( read_file( spec.substr( 4 ) ) );
  throw error( error_category::input, "reward must be 'proxy' or 'gnn:<model file>'" );
}

std::map<std::string, corpus_record> index_records( std::vector<corpus_record> const& records )
{
  std::map<std::string, corpus_record> out;
  for ( auto const& r : records )
    out.emplace( r.key(), r );
  return out;
}

std::vector<corpus_record> pick( std::map<std::string, corpus_record> const& index, std::vector<std::string> const& keys )
{
  std::vector<corpus_record> out;
  for ( auto const& k : keys )
  {
    auto it = index.find( k );
    if ( it == index.end() )
      throw error( error_category::input, "split manifest refers to unknown record " + k );
    out.push_back( it->second );
  }
  return out;
}

ordered_json trace_to_json( optimization_trace const& t )
{
  ordered_json j;
  j["initial_breaks"] = t.initial_breaks;
  j["final_breaks"] = t.final_breaks;
  j["swaps"] = t.swaps;
  ordered_json steps = ordered_json::array();
  for ( auto const& s : t.steps )
  {
    steps.push_back( { { "pivot", s.pivot },
                       { "valid", s.valid },
                       { "accepted", s.accepted },
                       { "reward_before", s.reward_before },
                       { "reward_after", s.reward_after },
                       { "breaks_after", s.breaks_after } } );
  }
  j["steps"] = std::move( steps );
  return j;
}

/* subcommands */

struct options
{
  std::string function;
  std::string file;
  std::string out = ".";
  std::string pivot;
  std::string reward = "proxy";
  std::string corpus;
  std::string split_file;
  std::string model;
  std::string policy_file;
  std::string name;
  std::size_t cap = 100;
  std::size_t jobs = 1;
  std::size_t budget = 5;
  std::optional<std::uint64_t> seed;
  double fraction = 0.8;
  reward_train_config reward_cfg;
  grpo_config grpo_cfg;
  std::size_t max_cells = 0;
};

int cmd_synth( options const& o, std::ostream& out )
{
  auto tt = truth_table::parse( o.function );
  if ( tt.is_trivial() )
    throw trivial_function();
  auto name = o.name.empty() ? function_cell_name( tt ) : o.name;
  auto cell = synth_cell( name, factor_expr( minimize_sop( table_to_sop( tt ), tt.n_inputs() ) ), tt );
  auto report = equiv_check( cell, tt );
  if ( !report.pass )
    throw error( error_category::internal, "synthesized cell fails equivalence" );
  auto path = fs::path( o.out ) / ( name + ".sp" );
  write_file( path, serialize_spice( cell ) );
  write_manifest( o.out, "synth", 0, { { "function", tt.to_string() }, { "name", name } }, { path.filename().string() } );
  out << "transistors=" << cell.devices.size() << " pmos=" << cell.count( mos_type::pmos )
      << " nmos=" << cell.count( mos_type::nmos ) << " equiv=pass file=" << path.string() << "\n";
  return 0;
}

int cmd_swap( options const& o, std::ostream& out )
{
  auto cell = parse_spice( read_file( o.file ) );
  swap_region region;
  auto swapped = swap_net( cell, o.pivot, region );
  auto name = fs::path( o.file ).filename().string() + ".swapped.sp";
  auto path = o.out.empty() ? fs::path( o.file + ".swapped.sp" ) : fs::path( o.out ) / name;
  write_file( path, serialize_spice( swapped ) );
  out << "pivot=" << region.pivot.name << " nca=" << region.nca.name << " ncd=" << region.ncd.name
      << " delta=" << region.delta.size() << " file=" << path.string() << "\n";
  return 0;
}

int cmd_enumerate( options const& o, std::ostream& out )
{
  auto cell = parse_spice( read_file( o.file ) );
  auto en = enumerate_topologies( cell, o.cap );
  auto stem = fs::path( o.file ).stem().string();
  std::vector<std::string> files;
  for ( std::size_t i = 0; i < en.variants.size(); ++i )
  {
    auto name = stem + "_v" + std::to_string( i ) + ".sp";
    write_file( fs::path( o.out ) / name, serialize_spice( en.variants[i] ) );
    files.push_back( name );
  }
  write_manifest( o.out, "enumerate", 0, { { "input", o.file }, { "cap", o.cap } }, files );
  out << "n_pivots=" << en.pivots.size() << " emitted=" << en.variants.size() << " unique=" << en.unique.size()
      << "\n";
  return 0;
}

int cmd_verify( options const& o, std::ostream& out )
{
  auto cell = parse_spice( read_file( o.file ) );
  auto tt = truth_table::parse( o.function );
  auto report = equiv_check( cell, tt );
  if ( report.pass )
  {
    out << "PASS " << tt.to_string() << "\n";
    return 0;
  }
  out << "FAIL " << tt.to_string() << " failing assignments:";
  for ( auto a : report.failing )
    out << " " << a;
  out << "\n";
  return 3;
}

int cmd_score( options const& o, std::ostream& out )
{
  auto cell = parse_spice( read_file( o.file ) );
  if ( o.reward == "proxy" )
  {
    auto r = proxy_score( cell );
    out << "breaks=" << r.breaks << " score=" << r.score << "\n";
    return 0;
  }
  auto source = parse_reward( o.reward );
  out << "logit=" << reward_of( source, cell ) << "\n";
  return 0;
}

int cmd_dataset_build( options const& o, std::ostream& out )
{
  auto seed = resolve_seed( o.seed );
  build_config cfg;
  cfg.cap = o.cap;
  cfg.jobs = o.jobs;
  auto c = build_corpus( cfg );
  write_corpus( c, o.out );
  auto manifest = split( select_unroutable( c.records ), o.fraction, seed );
  write_file( fs::path( o.out ) / "split.json", manifest_to_json( manifest ) );
  write_manifest( o.out, "dataset build", seed, { { "cap", o.cap }, { "split_fraction", o.fraction } },
                  { "corpus.jsonl", "stats.json", "split.json" } );
  out << "functions=" << c.stats.functions << " emitted=" << c.stats.emitted << " records=" << c.stats.records
      << " duplicates=" << c.stats.duplicates << " routable=" << c.stats.routable
      << " unroutable=" << c.stats.unroutable << " train=" << manifest.train.size()
      << " eval=" << manifest.eval.size() << "\n";
  return 0;
}

int cmd_train_reward( options const& o, std::ostream& out )
{
  auto seed = resolve_seed( o.seed );
  auto records = read_corpus( o.corpus );
  auto manifest = split( records, o.fraction, seed );
  auto index = index_records( records );
  auto to_graphs = [&]( std::vector<std::string> const& keys ) {
    std::vector<labeled_graph> graphs;
    for ( auto const& r : pick( index, keys ) )
      graphs.push_back( { encode_cell_graph( r.cell() ), r.label } );
    return graphs;
  };
  auto train = to_graphs( manifest.train );
  auto eval = to_graphs( manifest.eval );

  auto cfg = o.reward_cfg;
  cfg.seed = seed;
  auto model = train_reward_model( train, cfg );
  write_file( fs::path( o.out ) / "model.json", save_model( model.params ) );
  std::ostringstream log;
  log.precision( 17 );
  log << "epoch,loss,accuracy\n";
  for ( auto const& e : model.log )
    log << e.epoch << ',' << e.loss << ',' << e.accuracy << '\n';
  write_file( fs::path( o.out ) / "reward_log.csv", log.str() );

  double train_acc = accuracy( train, model.params );
  double eval_acc = eval.empty() ? 0.0 : accuracy( eval, model.params );
  ordered_json metrics{ { "train_records", train.size() },
                        { "eval_records", eval.size() },
                        { "train_accuracy", train_acc },
                        { "eval_accuracy", eval_acc } };
  write_file( fs::path( o.out ) / "metrics.json", metrics.dump( 1 ) + "\n" );
  write_manifest( o.out, "train-reward", seed,
                  { { "d", cfg.d },
                    { "k_layers", cfg.k_layers },
                    { "lr", cfg.lr },
                    { "epochs", cfg.epochs },
                    { "batch_size", cfg.batch_size },
                    { "init_scale", cfg.init_scale },
                    { "split_fraction", o.fraction } },
                  { "model.json", "reward_log.csv", "metrics.json" } );
  out << "train_accuracy=" << train_acc << " eval_accuracy=" << eval_acc << "\n";
  return 0;
}

split_manifest load_or_make_split( options const& o, std::vector<corpus_record> const& records, std::uint64_t seed )
{
  if ( !o.split_file.empty() )
    return manifest_from_json( read_file( o.split_file ) );
  return split( select_unroutable( records ), o.fraction, seed );
}

int cmd_train_policy( options const& o, std::ostream& out )
{
  auto seed = resolve_seed( o.seed );
  auto records = read_corpus( o.corpus );
  auto manifest = load_or_make_split( o, records, seed );
  auto train = pick( index_records( records ), manifest.train );
  std::vector<cell_netlist> dataset;
  for ( auto const& r : train )
  {
    if ( r.label == -1 && ( o.max_cells == 0 || dataset.size() < o.max_cells ) )
      dataset.push_back( r.cell() );
  }

  auto cfg = o.grpo_cfg;
  cfg.seed = seed;
  toy_softmax_policy pi, reference;
  auto source = parse_reward( o.reward );
  auto result = train_policy( dataset, pi, reference, source, cfg );

  write_file( fs::path( o.out ) / "policy.json", save_policy( pi ) );
  write_file( fs::path( o.out ) / "history.csv", history_csv( result.history ) );
  std::string log;
  for ( auto const& line : result.log )
    log += line + "\n";
  write_file( fs::path( o.out ) / "train_policy.log", log );
  write_manifest( o.out, "train-policy", seed,
                  { { "M", cfg.M },
                    { "I", cfg.I },
                    { "K", cfg.K },
                    { "lambda", cfg.lambda },
                    { "kappa", cfg.kappa },
                    { "eps", cfg.eps },
                    { "lr", cfg.lr },
                    { "reward", o.reward },
                    { "cells", dataset.size() } },
                  { "policy.json", "history.csv", "train_policy.log" } );
  out << "cells=" << dataset.size() << " iterations=" << result.history.size();
  if ( !result.history.empty() )
    out << " last_mean_reward=" << result.history.back().mean_reward;
  out << "\n";
  return 0;
}

int cmd_optimize( options const& o, std::ostream& out )
{
  auto seed = resolve_seed( o.seed );
  toy_softmax_policy pi;
  if ( !o.policy_file.empty() )
    pi = load_policy( read_file( o.policy_file ) );
  auto source = parse_reward( o.reward );

  if ( !o.file.empty() )
  {
    auto cell = parse_spice( read_file( o.file ) );
    auto trace = optimize_cell( cell, pi, source, o.budget, proposal_mode::greedy, seed );
    auto stem = fs::path( o.file ).stem().string();
    write_file( fs::path( o.out ) / ( stem + ".optimized.sp" ), serialize_spice( trace.result ) );
    write_file( fs::path( o.out ) / ( stem + ".trace.json" ), trace_to_json( trace ).dump( 1 ) + "\n" );
    write_manifest( o.out, "optimize", seed, { { "input", o.file }, { "budget", o.budget }, { "reward", o.reward } },
                    { stem + ".optimized.sp", stem + ".trace.json" } );
    out << "initial_breaks=" << trace.initial_breaks << " final_breaks=" << trace.final_breaks
        << " swaps=" << trace.swaps << " proposals=" << trace.steps.size() << "\n";
    return 0;
  }

  auto records = read_corpus( o.corpus );
  auto manifest = load_or_make_split( o, records, seed );
  auto eval = pick( index_records( records ), manifest.eval );
  std::size_t cells = 0, converted = 0, converted_random = 0;
  std::string traces;
  for ( auto const& r : eval )
  {
    if ( r.label != -1 )
      continue;
    auto cell = r.cell();
    auto trained = optimize_cell( cell, pi, source, o.budget, proposal_mode::greedy, seed );
    auto random = optimize_cell( cell, pi, source, o.budget, proposal_mode::uniform, seed + cells );
    ++cells;
    converted += trained.final_breaks == 0;
    converted_random += random.final_breaks == 0;
    ordered_json line{ { "key", r.key() }, { "policy", trace_to_json( trained ) }, { "random", trace_to_json( random ) } };
    traces += line.dump() + "\n";
  }
  write_file( fs::path( o.out ) / "traces.jsonl", traces );
  auto rate = [&]( std::size_t n ) { return cells ? static_cast<double>( n ) / static_cast<double>( cells ) : 0.0; };
  ordered_json summary{ { "cells", cells },
                        { "converted_policy", converted },
                        { "converted_random", converted_random },
                        { "rate_policy", rate( converted ) },
                        { "rate_random", rate( converted_random ) } };
  write_file( fs::path( o.out ) / "summary.json", summary.dump( 1 ) + "\n" );
  write_manifest( o.out, "optimize", seed, { { "budget", o.budget }, { "reward", o.reward } },
                  { "traces.jsonl", "summary.json" } );
  out << "cells=" << cells << " converted_policy=" << converted << " converted_random=" << converted_random << "\n";
  return 0;
}

int exit_code( error const& e )
{
  switch ( e.category() )
  {
  case error_category::input:
    return 2;
  case error_category::domain:
    return 3;
  case error_category::internal:
    return 4;
  }
  return 4;
}

} // namespace

int run_cli( std::vector<std::string> const& args, std::ostream& out, std::ostream& err )
{
  CLI::App app{ "Transistor-level standard-cell topology toolkit", "topcell" };
  app.require_subcommand( 1 );
  options o;
  std::function<int( std::ostream& )> action;
  auto on = [&]( CLI::App* sub, auto fn ) { sub->callback( [&, fn]() { action = [&o, fn]( std::ostream& os ) { return fn( o, os ); }; } ); };

  auto* synth = app.add_subcommand( "synth", "Synthesize the seed netlist of a function" );
  synth->add_option( "--function", o.function, "Truth table as <n>:<hex>, e.g. 3:E8" )->required();
  synth->add_option( "--name", o.name, "Cell name" );
  synth->add_option( "--out", o.out, "Output directory" );
  on( synth, cmd_synth );

  auto* swap = app.add_subcommand( "swap", "Apply one pivot swap" );
  swap->add_option( "file", o.file, "Input .sp" )->required();
  swap->add_option( "--pivot", o.pivot, "Pivot net" )->required();
  o.out.clear();
  swap->add_option( "--out", o.out, "Output directory (default: next to the input)" );
  on( swap, cmd_swap );

  auto* enumerate = app.add_subcommand( "enumerate", "Enumerate pivot-subset variants" );
  enumerate->add_option( "file", o.file, "Input .sp" )->required();
  enumerate->add_option( "--cap", o.cap, "Maximum variants" );
  enumerate->add_option( "--out", o.out, "Output directory" );
  enumerate->add_option( "--jobs", o.jobs, "Worker threads" );
  on( enumerate, cmd_enumerate );

  auto* verify = app.add_subcommand( "verify", "Check a netlist against a truth table" );
  verify->add_option( "file", o.file, "Input .sp" )->required();
  verify->add_option( "--function", o.function, "Truth table as <n>:<hex>" )->required();
  on( verify, cmd_verify );

  auto* score = app.add_subcommand( "score", "Score a netlist" );
  score->add_option( "file", o.file, "Input .sp" )->required();
  score->add_option( "--reward", o.reward, "proxy or gnn:<model.json>" );
  on( score, cmd_score );

  auto* dataset = app.add_subcommand( "dataset", "Corpus commands" );
  dataset->require_subcommand( 1 );
  auto* build = dataset->add_subcommand( "build", "Build the 3-input corpus" );
  build->add_option( "--cap", o.cap, "Variants per function" );
  build->add_option( "--jobs", o.jobs, "Worker threads" );
  build->add_option( "--out", o.out, "Output directory" );
  build->add_option( "--seed", o.seed, "Split seed" );
  build->add_option( "--split-fraction", o.fraction, "Fraction of functions for training" );
  on( build, cmd_dataset_build );

  auto* train_reward = app.add_subcommand( "train-reward", "Train the GNN reward model" );
  train_reward->add_option( "--corpus", o.corpus, "corpus.jsonl" )->required();
  train_reward->add_option( "--out", o.out, "Output directory" );
  train_reward->add_option( "--seed", o.seed, "Seed" );
  train_reward->add_option( "--split-fraction", o.fraction, "Fraction of functions for training" );
  train_reward->add_option( "--epochs", o.reward_cfg.epochs, "Epochs" );
  train_reward->add_option( "--lr", o.reward_cfg.lr, "Learning rate" );
  train_reward->add_option( "--hidden", o.reward_cfg.d, "Hidden width d" );
  train_reward->add_option( "--layers", o.reward_cfg.k_layers, "Message-passing layers" );
  train_reward->add_option( "--batch", o.reward_cfg.batch_size, "Mini-batch size" );
  train_reward->add_option( "--init-scale", o.reward_cfg.init_scale, "Initial weight scale" );
  on( train_reward, cmd_train_reward );

  auto* train_pol = app.add_subcommand( "train-policy", "Train the pivot policy with GRPO" );
  train_pol->add_option( "--corpus", o.corpus, "corpus.jsonl" )->required();
  train_pol->add_option( "--split", o.split_file, "split.json (default: recomputed from the corpus)" );
  train_pol->add_option( "--reward", o.reward, "proxy or gnn:<model.json>" );
  train_pol->add_option( "--out", o.out, "Output directory" );
  train_pol->add_option( "--seed", o.seed, "Seed" );
  train_pol->add_option( "--max-cells", o.max_cells, "Use at most this many training cells (0: all)" );
  train_pol->add_option( "--group", o.grpo_cfg.M, "Group size M" );
  train_pol->add_option( "--iters", o.grpo_cfg.I, "Outer iterations I" );
  train_pol->add_option( "--inner", o.grpo_cfg.K, "Inner steps K" );
  train_pol->add_option( "--clip", o.grpo_cfg.lambda, "Clip range lambda" );
  train_pol->add_option( "--kl", o.grpo_cfg.kappa, "KL coefficient kappa" );
  train_pol->add_option( "--lr", o.grpo_cfg.lr, "Step size" );
  on( train_pol, cmd_train_policy );

  auto* optimize = app.add_subcommand( "optimize", "Run the swap-and-score loop" );
  auto* file_opt = optimize->add_option( "file", o.file, "Input .sp" );
  auto* corpus_opt = optimize->add_option( "--corpus", o.corpus, "corpus.jsonl: optimize its eval split" );
  file_opt->excludes( corpus_opt );
  optimize->add_option( "--split", o.split_file, "split.json" );
  optimize->add_option( "--policy", o.policy_file, "policy.json (default: uniform policy)" );
  optimize->add_option( "--reward", o.reward, "proxy or gnn:<model.json>" );
  optimize->add_option( "--budget", o.budget, "Maximum proposals" );
  optimize->add_option( "--out", o.out, "Output directory" );
  optimize->add_option( "--seed", o.seed, "Seed" );
  on( optimize, cmd_optimize );

  std::vector<std::string> storage{ "topcell" };
  storage.insert( storage.end(), args.begin(), args.end() );
  std::vector<char const*> argv;
  for ( auto const& s : storage )
    argv.push_back( s.c_str() );

  try
  {
    app.parse( static_cast<int>( argv.size() ), argv.data() );
    if ( o.out.empty() && !swap->parsed() )
      o.out = ".";
    if ( optimize->parsed() && o.file.empty() && o.corpus.empty() )
      throw error( error_category::input, "optimize needs a netlist file or --corpus" );
    return action( out );
  }
  catch ( CLI::CallForHelp const& )
  {
    out << app.help();
    return 0;
  }
  catch ( CLI::CallForAllHelp const& )
  {
    out << app.help( "", CLI::AppFormatMode::All );
    return 0;
  }
  catch ( CLI::ParseError const& e )
  {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  catch ( invalid_pivot const& e )
  {
    err << e.what() << "\n";
    return 3;
  }
  catch ( error const& e )
  {
    err << "error: " << e.what() << "\n";
    return exit_code( e );
  }
  catch ( std::exception const& e )
  {
    err << "internal error: " << e.what() << "\n";
    return 4;
  }
}

} // namespace topcell
