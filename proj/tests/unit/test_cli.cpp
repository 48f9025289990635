#include "helpers.hpp"

#include "cli.hpp"
#include "topcell/error.hpp"
#include "topcell/reward.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace topcell;
using namespace topcell::test;
namespace fs = std::filesystem;

namespace
{

struct run_result
{
  int code;
  std::string out;
  std::string err;
};

run_result run( std::vector<std::string> const& args )
{
  std::ostringstream out, err;
  int code = run_cli( args, out, err );
  return { code, out.str(), err.str() };
}

fs::path fresh_dir( std::string const& name )
{
  auto dir = fs::temp_directory_path() / ( "topcell_cli_" + name );
  fs::remove_all( dir );
  fs::create_directories( dir );
  return dir;
}

void write_text( fs::path const& p, std::string const& text )
{
  std::ofstream( p, std::ios::binary ) << text;
}

std::string read_text( fs::path const& p )
{
  std::ifstream in( p, std::ios::binary );
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE( "synth, verify and score" )
{
  auto dir = fresh_dir( "synth" );
  auto r = run( { "synth", "--function", aoi221_table().to_string(), "--name", "AOI221", "--out", dir.string() } );
  REQUIRE( r.code == 0 );
  CHECK( r.out.find( "transistors=10 pmos=5 nmos=5 equiv=pass" ) == 0 );
  auto cell = dir / "AOI221.sp";
  REQUIRE( fs::exists( cell ) );
  CHECK( fs::exists( dir / "run_manifest.json" ) );

  auto v = run( { "verify", cell.string(), "--function", aoi221_table().to_string() } );
  CHECK( v.code == 0 );
  CHECK( v.out == "PASS " + aoi221_table().to_string() + "\n" );

  auto s = run( { "score", cell.string() } );
  CHECK( s.code == 0 );
  CHECK( s.out == "breaks=" + std::to_string( proxy_score( aoi221_cell() ).breaks ) + " score=-" +
                      std::to_string( proxy_score( aoi221_cell() ).breaks ) + "\n" );

  auto manifest = nlohmann::json::parse( read_text( dir / "run_manifest.json" ) );
  CHECK( manifest["command"] == "synth" );
  CHECK( manifest.contains( "seed" ) );
  CHECK( manifest["outputs"].size() == 1 );

  CHECK( run( { "synth", "--function", "3:00", "--out", dir.string() } ).code == 2 );
  CHECK( run( { "synth", "--function", "bogus", "--out", dir.string() } ).code == 2 );
}

TEST_CASE( "verify reports mismatches" )
{
  auto dir = fresh_dir( "verify" );
  write_text( dir / "nand2.sp", nand2_text );
  auto f = run( { "verify", ( dir / "nand2.sp" ).string(), "--function", "2:8" } );
  CHECK( f.code == 3 );
  CHECK( f.out.find( "FAIL 2:8 failing assignments:" ) == 0 );
  CHECK( run( { "verify", ( dir / "nand2.sp" ).string(), "--function", "2:7" } ).code == 0 );
  CHECK( run( { "verify", ( dir / "nand2.sp" ).string(), "--function", "3:E8" } ).code == 2 );
}

TEST_CASE( "swap and enumerate" )
{
  auto dir = fresh_dir( "swap" );
  auto input = dir / "nand2.sp";
  write_text( input, nand2_text );
  auto s = run( { "swap", input.string(), "--pivot", "N1" } );
  REQUIRE( s.code == 0 );
  CHECK( s.out.find( "pivot=N1" ) == 0 );
  auto swapped = dir / "nand2.sp.swapped.sp";
  REQUIRE( fs::exists( swapped ) );
  CHECK( equiv_check( parse_spice( read_text( swapped ) ), truth_table( 2, 0x7 ) ).pass );
  CHECK( parse_spice( read_text( swapped ) ) == swap_net( parse_spice( nand2_text ), "N1" ) );

  auto bad = run( { "swap", input.string(), "--pivot", "Y" } );
  CHECK( bad.code == 3 );
  CHECK( bad.err.find( invalid_pivot_prompt ) == 0 );
  CHECK( bad.err.find( "(Y: " ) != std::string::npos );

  auto out = fresh_dir( "enumerate" );
  write_text( dir / "aoi.sp", serialize_spice( aoi221_cell() ) );
  auto e = run( { "enumerate", ( dir / "aoi.sp" ).string(), "--out", out.string(), "--jobs", "2" } );
  REQUIRE( e.code == 0 );
  CHECK( e.out.find( "n_pivots=4 emitted=16" ) == 0 );
  CHECK( fs::exists( out / "aoi_v0.sp" ) );
  CHECK( fs::exists( out / "aoi_v15.sp" ) );
  CHECK( !fs::exists( out / "aoi_v16.sp" ) );
  auto capped = run( { "enumerate", ( dir / "aoi.sp" ).string(), "--out", fresh_dir( "enum_cap" ).string(), "--cap", "5" } );
  CHECK( capped.out.find( "emitted=5" ) != std::string::npos );
}

TEST_CASE( "usage and input errors" )
{
  CHECK( run( {} ).code == 2 );
  CHECK( run( { "no-such-command" } ).code == 2 );
  CHECK( run( { "swap" } ).code == 2 );
  CHECK( run( { "--help" } ).code == 0 );
  CHECK( run( { "score", "/nonexistent/cell.sp" } ).code == 2 );
  CHECK( run( { "optimize" } ).code == 2 );
  CHECK( run( { "optimize", "x.sp", "--corpus", "c.jsonl" } ).code == 2 );

  auto dir = fresh_dir( "errors" );
  write_text( dir / "broken.sp", ".SUBCKT INV A Y VDD GND\nMP1 VDD A Y VDD\n.ENDS\n" );
  auto r = run( { "score", ( dir / "broken.sp" ).string() } );
  CHECK( r.code == 2 );
  CHECK( r.err.find( "line 2" ) != std::string::npos );
  write_text( dir / "inv.sp", inverter_text );
  CHECK( run( { "score", ( dir / "inv.sp" ).string(), "--reward", "gnn:/nonexistent.json" } ).code == 2 );
  CHECK( run( { "score", ( dir / "inv.sp" ).string(), "--reward", "oracle" } ).code == 2 );
}

TEST_CASE( "single-cell optimization" )
{
  auto dir = fresh_dir( "optimize_file" );
  write_text( dir / "aoi.sp", serialize_spice( aoi221_cell() ) );
  auto r = run( { "optimize", ( dir / "aoi.sp" ).string(), "--out", dir.string(), "--budget", "5" } );
  REQUIRE( r.code == 0 );
  CHECK( r.out.find( "initial_breaks=" ) == 0 );
  REQUIRE( fs::exists( dir / "aoi.optimized.sp" ) );
  CHECK( fs::exists( dir / "aoi.trace.json" ) );
  CHECK( equiv_check( parse_spice( read_text( dir / "aoi.optimized.sp" ) ), aoi221_table() ).pass );
}

TEST_CASE( "corpus pipeline" )
{
  auto dir = fresh_dir( "pipeline" );
  auto ds = dir / "ds";
  auto b = run( { "dataset", "build", "--out", ds.string(), "--jobs", "4" } );
  REQUIRE( b.code == 0 );
  CHECK( b.out.find( "functions=254" ) == 0 );
  for ( auto name : { "corpus.jsonl", "stats.json", "split.json", "run_manifest.json" } )
    CHECK( fs::exists( ds / name ) );

  auto rm = dir / "rm";
  auto t = run( { "train-reward", "--corpus", ( ds / "corpus.jsonl" ).string(), "--out", rm.string(), "--epochs", "2" } );
  REQUIRE( t.code == 0 );
  CHECK( t.out.find( "train_accuracy=" ) == 0 );
  CHECK( read_text( rm / "reward_log.csv" ).find( "epoch,loss,accuracy\n" ) == 0 );
  CHECK( fs::exists( rm / "model.json" ) );
  CHECK( fs::exists( rm / "metrics.json" ) );

  auto pol = dir / "pol";
  auto p = run( { "train-policy", "--corpus", ( ds / "corpus.jsonl" ).string(), "--split", ( ds / "split.json" ).string(),
                  "--out", pol.string(), "--iters", "5", "--max-cells", "10" } );
  REQUIRE( p.code == 0 );
  CHECK( p.out.find( "cells=10 iterations=5" ) == 0 );
  CHECK( read_text( pol / "history.csv" ).find( "iter,mean_reward,objective,kl,accepted_pivot\n" ) == 0 );

  auto opt = dir / "opt";
  auto o = run( { "optimize", "--corpus", ( ds / "corpus.jsonl" ).string(), "--split", ( ds / "split.json" ).string(),
                  "--policy", ( pol / "policy.json" ).string(), "--out", opt.string() } );
  REQUIRE( o.code == 0 );
  auto summary = nlohmann::json::parse( read_text( opt / "summary.json" ) );
  CHECK( summary["cells"].get<std::size_t>() > 0 );
  CHECK( summary["converted_policy"].get<std::size_t>() <= summary["cells"].get<std::size_t>() );
  CHECK( fs::exists( opt / "traces.jsonl" ) );

  auto g = run( { "score", "--reward", "gnn:" + ( rm / "model.json" ).string(),
                  ( dir / "cell.sp" ).string() } );
  CHECK( g.code == 2 );
  write_text( dir / "cell.sp", serialize_spice( aoi221_cell() ) );
  g = run( { "score", "--reward", "gnn:" + ( rm / "model.json" ).string(), ( dir / "cell.sp" ).string() } );
  CHECK( g.code == 0 );
  CHECK( g.out.find( "logit=" ) == 0 );
}
