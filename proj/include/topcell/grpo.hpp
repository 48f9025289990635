/*!
  \file grpo.hpp
  \brief Pivot-selection policies, group-relative policy optimization and the
         swap-and-score inference loop
*/

#pragma once

#include "topcell/netlist.hpp"
#include "topcell/reward.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

namespace topcell
{

using token_seq = std::vector<std::string>;

/* policies */

/*! \brief Autoregressive policy over tokens, conditioned on a cell prompt.

  Implementations expose the next-token distribution and the Jacobian of its
  log-probabilities with respect to the trainable parameters; everything else
  (sampling, sequence log-probs, ratios, KL) is derived from these.
*/
class policy
{
public:
  virtual ~policy() = default;

  /*! \brief Tokens allowed after `prefix`; empty when the sequence is complete. */
  virtual std::vector<std::string> support( cell_netlist const& prompt, token_seq const& prefix ) const = 0;
  /*! \brief Log-probabilities aligned with support(). */
  virtual Eigen::VectorXd next_log_probs( cell_netlist const& prompt, token_seq const& prefix ) const = 0;
  /*! \brief Row i is the gradient of next_log_probs()[i] over params(). */
  virtual Eigen::MatrixXd next_log_prob_jacobian( cell_netlist const& prompt, token_seq const& prefix ) const = 0;

  virtual std::unique_ptr<policy> snapshot() const = 0;
  virtual Eigen::VectorXd params() const = 0;
  virtual void set_params( Eigen::VectorXd const& theta ) = 0;
};

/*! \brief Samples one complete token sequence. */
token_seq sample_tokens( policy const& pi, cell_netlist const& prompt, std::mt19937_64& rng );

/*! \brief Per-token log-probabilities; -infinity for tokens outside the support. */
std::vector<double> token_log_probs( policy const& pi, cell_netlist const& prompt, token_seq const& tokens );

/*! \brief Most probable token at each step (first on ties). */
token_seq greedy_tokens( policy const& pi, cell_netlist const& prompt );

inline constexpr std::size_t pivot_feature_count = 8;
inline constexpr int pivot_feature_map_version = 1;
inline constexpr int policy_format_version = 1;

/*! \brief Fixed feature map of one valid pivot:
           [pull-up, pull-down, up-degree/2, down-degree/2, |delta|/4,
            breaks now/4, breaks after swap/4, (after - now)/4]. */
std::vector<std::pair<std::string, Eigen::VectorXd>> pivot_features( cell_netlist const& cell );

/*! \brief Softmax over the valid pivots of the prompt, logits theta . phi. */
class toy_softmax_policy : public policy
{
public:
  toy_softmax_policy();
  explicit toy_softmax_policy( Eigen::VectorXd theta );

  std::vector<std::string> support( cell_netlist const& prompt, token_seq const& prefix ) const override;
  Eigen::VectorXd next_log_probs( cell_netlist const& prompt, token_seq const& prefix ) const override;
  Eigen::MatrixXd next_log_prob_jacobian( cell_netlist const& prompt, token_seq const& prefix ) const override;
  std::unique_ptr<policy> snapshot() const override;
  Eigen::VectorXd params() const override { return theta_; }
  void set_params( Eigen::VectorXd const& theta ) override;

private:
  struct feature_cache;
  std::vector<std::pair<std::string, Eigen::VectorXd>> const& features( cell_netlist const& prompt ) const;

  Eigen::VectorXd theta_;
  std::shared_ptr<feature_cache> cache_;
};

std::string save_policy( toy_softmax_policy const& pi );
toy_softmax_policy load_policy( std::string const& json_text );

/* GRPO pieces */

struct rollout_group
{
  cell_netlist const* prompt = nullptr;
  std::vector<token_seq> candidates;
  std::vector<cell_netlist> netlists;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<std::string> events; ///< invalid-pivot re-prompts and skipped slots
};

/*! \brief Draws M candidates from `old_policy`, swaps and scores each.
           Invalid pivots are re-drawn up to `max_retries` times. */
rollout_group sample_group( policy const& old_policy, cell_netlist const& cell, std::size_t M,
                            reward_source const& reward, std::uint64_t seed, std::size_t max_retries = 8 );

std::vector<double> compute_advantages( std::vector<double> const& rewards, double eps );

double clipped_term( double rho, double advantage, double lambda );

double is_ratio( policy const& pi, policy const& old_policy, cell_netlist const& prompt, token_seq const& tokens,
                 std::size_t t );

/*! \brief Exact KL(p || q) of two aligned categorical distributions. */
double categorical_kl( Eigen::VectorXd const& p, Eigen::VectorXd const& q );

double kl_penalty( policy const& pi, policy const& reference, cell_netlist const& prompt, token_seq const& prefix = {} );

struct objective_value
{
  double value = 0.0;
  double kl = 0.0; ///< mean per-token KL
  Eigen::VectorXd gradient;
};

objective_value grpo_objective( rollout_group const& group, policy const& pi, policy const& old_policy,
                                policy const& reference, double lambda, double kappa );

/* training */

struct grpo_config
{
  std::size_t M = 8;
  std::size_t I = 200;
  std::size_t K = 4;
  double lambda = 0.2;
  double kappa = 0.04;
  double eps = 1e-8;
  double lr = 0.1;
  std::uint64_t seed = 42;
  std::size_t max_retries = 8;

  void check() const;
};

struct history_row
{
  std::size_t iter;
  double mean_reward;
  double objective;
  double kl;
  std::string accepted_pivot; ///< highest-reward candidate of the group
};

struct training_result
{
  std::vector<history_row> history;
  std::vector<std::string> log;
};

training_result train_policy( std::vector<cell_netlist> const& dataset, policy& pi, policy const& reference,
                              reward_source const& reward, grpo_config const& config );

std::string history_csv( std::vector<history_row> const& history );

/* inference */

struct trace_step
{
  std::string pivot;
  bool valid;
  bool accepted;
  double reward_before;
  double reward_after;
  std::size_t breaks_after;
};

struct optimization_trace
{
  cell_netlist result;
  std::vector<trace_step> steps;
  std::size_t initial_breaks = 0;
  std::size_t final_breaks = 0;
  std::size_t swaps = 0;
};

enum class proposal_mode
{
  greedy,
  sample,
  uniform
};

/*! \brief Proposes pivots, accepting a swap only when the reward strictly improves.
           Stops at zero breaks, when every pivot of the current cell was rejected,
           or after `budget` proposals. */
optimization_trace optimize_cell( cell_netlist const& cell, policy const& pi, reward_source const& reward,
                                  std::size_t budget, proposal_mode mode = proposal_mode::greedy,
                                  std::uint64_t seed = 0 );

} // namespace topcell
