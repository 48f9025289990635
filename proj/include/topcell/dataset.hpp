/*!
  \file dataset.hpp
  \brief The exhaustive 3-input corpus: synthesis, enumeration, verification,
         proxy labels, JSON-Lines persistence and function-level splits
*/

#pragma once

#include "topcell/logic.hpp"
#include "topcell/reward.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace topcell
{

/*! \brief The 254 non-constant 3-input functions, ascending by table bits. */
std::vector<truth_table> enumerate_functions();

/*! \brief Cell name used for a function, e.g. `F3_E8`. */
std::string function_cell_name( truth_table const& tt );

struct corpus_record
{
  truth_table function{ 3, 0 };
  std::size_t variant_index = 0;
  std::string netlist_text;
  std::uint64_t canonical_digest = 0;
  std::size_t proxy_breaks = 0;
  int label = 0; ///< +1 when proxy_breaks == 0, else -1
  bool equiv_verified = false;

  /*! \brief Stable identifier `<function>/<variant_index>`. */
  std::string key() const;
  cell_netlist cell() const;
};

std::string record_to_json( corpus_record const& record );
corpus_record record_from_json( std::string const& line );

struct build_config
{
  std::size_t cap = 100;
  std::size_t jobs = 1;
  std::vector<truth_table> functions; ///< empty: all of enumerate_functions()
  proxy_options proxy;
};

struct function_stats
{
  std::size_t pivots = 0;
  std::size_t emitted = 0;
  std::size_t unique = 0;
};

struct corpus_stats
{
  std::size_t functions = 0;
  std::size_t emitted = 0;
  std::size_t records = 0;
  std::size_t duplicates = 0;
  std::size_t routable = 0;
  std::size_t unroutable = 0;
  std::map<std::string, function_stats> per_function;
};

struct corpus
{
  std::vector<corpus_record> records;
  corpus_stats stats;
};

/*! \brief Runs synth, enumeration, equivalence checks and proxy labelling for
           every function.  Throws error(internal) on any failed check. */
corpus build_corpus( build_config const& config );

std::string stats_to_json( corpus_stats const& stats );

/*! \brief Writes corpus.jsonl and stats.json into `out_dir`. */
void write_corpus( corpus const& c, std::filesystem::path const& out_dir );
std::vector<corpus_record> read_corpus( std::filesystem::path const& jsonl );

std::vector<corpus_record> select_unroutable( std::vector<corpus_record> const& records );

struct split_manifest
{
  std::vector<std::string> train;
  std::vector<std::string> eval;
  std::vector<std::string> train_functions;
  std::vector<std::string> eval_functions;
  std::uint64_t seed = 42;
  double fraction = 0.8;
};

/*! \brief Shuffles the distinct functions with `seed` and sends the first
           ceil(fraction * F) of them, with all their records, to train. */
split_manifest split( std::vector<corpus_record> const& subset, double fraction = 0.8, std::uint64_t seed = 42 );

std::string manifest_to_json( split_manifest const& manifest );
split_manifest manifest_from_json( std::string const& text );

} // namespace topcell
