#pragma once

#include "gpode/common.hpp"
#include "gpode/kernels.hpp"
#include "gpode/obsmodel.hpp"

#include <Eigen/Cholesky>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gpode {

enum class KernelFamily { ARD, TaylorIndependent, TaylorAdapted };

std::string to_string(KernelFamily f);
KernelFamily kernel_family_from_string(const std::string& name);

/// Kernels of one output dimension. ARD uses levels[0]; TaylorIndependent has
/// one ARD kernel per Taylor level; TaylorAdapted derives every level from
/// the base kernels of all state dimensions.
struct KernelSpec {
  KernelFamily family = KernelFamily::ARD;
  int num_levels = 1;
  std::vector<ARDHypers> levels;
  std::vector<ARDHypers> base;
  Index output_dim = 0;

  double eval(int level, const Vector& x, const Vector& y) const;
  /// Signal variance of the level-1 kernel, used to scale jitter.
  double base_signal_variance() const;
};

/// Kernel evaluation with the ARD constants unpacked once.
class LevelKernel {
 public:
  LevelKernel(const KernelSpec& spec, int level);
  double operator()(const Vector& x, const Vector& y) const;
  /// Point Gram k(X_p, X_q) over the rows of `points`.
  Matrix gram(const Matrix& points) const;
  /// sum_p coefs(p) k(x, points.row(p)).
  double expand(const Matrix& points, const Vector& coefs, const Vector& x) const;

 private:
  int level_;
  bool ard_ = false;
  std::vector<ARDHypers> base_;
  Index output_dim_ = 0;
  double sf2_ = 1.0;
  Vector inv_l2_;
};

/// sum_p c_p k_level(x, X_p): a posterior-mean style expansion over data
/// points.
struct PointExpansion {
  Matrix points;
  Vector coefs;
  KernelSpec kernel;
  int level = 1;

  double eval(const Vector& x) const;
};

/// c_p = sum_{n, j : n + j = p} W(n, j) v_n, so that
/// sum_n v_n sum_j W(n, j) k(x, X_{n+j}) = sum_p c_p k(x, X_p).
Vector fold_to_points(const Matrix& weights, const Vector& v, Index n_points);

/// K_{nm} = sum_l sum_{i,j} W_l(n, j) W_l(m, i) k_l(X_{n+j}, X_{m+i}).
/// Covers both the multistep (one level, W = b) and the Taylor (W = h^l / l!)
/// composite kernels.
Matrix gram(const TransformedDataset& data, const KernelSpec& kernel);
Matrix gram_multistep(const KernelFn& k, const TransformedDataset& data);
Matrix gram_taylor(const std::vector<KernelFn>& level_kernels, const TransformedDataset& data);

/// cov(f^level(x*), Y_n) = sum_j W_level(n, j) k_level(x*, X_{n+j}).
Vector cross(const TransformedDataset& data, const KernelSpec& kernel, int level,
             const Vector& x_star);
Vector cross_multistep(const KernelFn& k, const TransformedDataset& data, const Vector& x_star);
Vector cross_taylor(const KernelFn& k_level, int level, const TransformedDataset& data,
                    const Vector& x_star);

/// Cholesky of K + noise + jitter I with jitter escalation (x10, at most three
/// times). Throws FactorizationFailed when every attempt fails.
struct Factorization {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;
  Vector alpha;  // (K + Lambda)^-1 Y
  double nll = 0.0;
};

Factorization factorize(const Matrix& K, const NoiseModel& noise, const Vector& Y,
                        double jitter);

/// -log N(Y | 0, K_y) for an SPD K_y.
double gaussian_nll(const Eigen::LLT<Matrix>& llt, const Vector& Y, Vector* alpha = nullptr);
double nll(const Matrix& K, const NoiseModel& noise, const Vector& Y, double jitter);

enum class GradientMode { Analytic, FiniteDifference };

struct TrainConfig {
  int iterations = 2000;
  int pretrain_iterations = 2000;
  double learning_rate = 0.05;
  double jitter = 1e-8;  // relative to the largest prior variance of the observations
  int restarts = 1;
  Seed seed = 0;
  GradientMode gradient = GradientMode::Analytic;
  bool pretrain_euler = true;
  /// Stop once the best objective has not improved by a relative 1e-6 for
  /// this many iterations; 0 disables early stopping.
  int patience = 100;
};

/// Trained GP for one output dimension, with cached factorization.
struct DimensionPosterior {
  TransformedDataset data;
  KernelSpec kernel;
  double log_sigma = 0.0;  // observation noise std sigma_u
  Factorization fact;

  double sigma() const { return std::exp(log_sigma); }
  NoiseModel noise() const { return data.noise.with_sigma2(sigma() * sigma()); }
};

struct ModelSpec {
  SchemeKind kind = SchemeKind::AB;
  int order = 1;
  KernelFamily family = KernelFamily::ARD;
  NoiseVariant noise = NoiseVariant::DiagTimeVarying;

  Pipeline pipeline() const {
    return kind == SchemeKind::Taylor ? Pipeline::Taylor : Pipeline::Multistep;
  }
};

struct TrainedModel {
  ModelSpec spec;
  std::vector<DimensionPosterior> dims;
  Seed seed = 0;
  std::uint64_t data_hash = 0;

  Index state_dim() const noexcept { return static_cast<Index>(dims.size()); }
  int num_levels() const { return dims.empty() ? 0 : dims.front().kernel.num_levels; }
};

/// One transformed dataset per state dimension.
std::vector<TransformedDataset> make_datasets(const Trajectory& traj, const ModelSpec& spec);

/// Flattened log-parameters of one dimension: the trainable kernel hypers
/// followed by log sigma_u.
Vector pack_parameters(const KernelSpec& kernel, double log_sigma);
void unpack_parameters(const Vector& theta, KernelSpec& kernel, double& log_sigma);

/// Negative log marginal likelihood of one dimension at `theta`; fills the
/// gradient when `grad` is non-null.
double nll_at(const TransformedDataset& data, const KernelSpec& structure, const Vector& theta,
              double jitter_rel, GradientMode mode, Vector* grad);

/// Builds the cached factorization for given hypers.
DimensionPosterior condition(TransformedDataset data, KernelSpec kernel, double log_sigma,
                             double jitter_rel);

/// Optimizes each dimension's log-hypers by Adam on the marginal likelihood,
/// starting from `init` (one KernelSpec + log sigma per dimension).
TrainedModel train(std::vector<TransformedDataset> datasets, const ModelSpec& spec,
                   const std::vector<KernelSpec>& init_kernels,
                   const std::vector<double>& init_log_sigma, const TrainConfig& config);

/// Heuristic starting point for an explicit-Euler model.
void default_initialization(const std::vector<TransformedDataset>& euler_data,
                            std::vector<KernelSpec>& kernels, std::vector<double>& log_sigma);

/// Two-stage training: an explicit-Euler model first, whose hypers then seed
/// the target scheme. Pass `pretrained` to reuse an existing Euler model.
TrainedModel train_model(const Trajectory& traj, const ModelSpec& spec,
                         const TrainConfig& config, const TrainedModel* pretrained = nullptr);

struct PosteriorMoments {
  Vector mean;
  Vector variance;
};

/// Posterior of f^level at x*, one entry per output dimension. Variance is
/// clamped at zero.
PosteriorMoments posterior(const TrainedModel& model, const Vector& x_star, int level = 1);

/// Joint posterior mean and covariance of f_u^level at the rows of `points`.
void joint_posterior(const DimensionPosterior& dim, int level, const Matrix& points,
                     Vector& mean, Matrix& cov);

std::uint64_t trajectory_hash(const Trajectory& traj);

/// Text (JSON) model file: spec, log-hypers, seed and the training-data hash.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
/// Rebuilds the factorization from `traj`; refuses a trajectory whose hash
/// differs from the stored one.
TrainedModel load_model(const std::filesystem::path& path, const Trajectory& traj,
                        double jitter_rel = 1e-8);

}  // namespace gpode
