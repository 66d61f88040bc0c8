#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pulsemae/amn.hpp"
#include "pulsemae/config.hpp"
#include "pulsemae/losses.hpp"
#include "pulsemae/optim.hpp"
#include "pulsemae/signal.hpp"
#include "pulsemae/student.hpp"
#include "pulsemae/teacher.hpp"

namespace pmae {

using Real = float;

struct LossWeights {
  double lambda_mae = 1.0;
  double lambda_dist = 1.0;
  double beta = 2.0;   // advantage scale (w_rppg)
  double alpha = 1.0;  // policy loss scale
  double lambda_hr = 0.5;
  static LossWeights from(const RunConfig& cfg);
};

// Linear warmup over W epochs, then cosine decay to zero at epoch E.
// Evaluated at integer epochs >= 1.
double lr_at(double epoch, double base, double warmup, double total);

enum class DataRegime { clean, occluded, domain_shift };

struct StageConfig {
  int stage = 1;
  size_t epochs = 0;
  DataRegime regime = DataRegime::clean;
  double lr_base = 1e-4;
  double warmup = 40;
};

struct StepRecord {
  double loss_pixel = 0, loss_corr = 0, loss_distill = 0, loss_pg = 0;
  double grad_norm_student = 0, grad_norm_amn = 0;
  double mask_ratio = 0;
};

struct StepOptions {
  bool update_amn = true;
  bool random_mask = false;  // uniform masking instead of AMN scores
  double lambda_mae = 1.0, lambda_dist = 1.0;
  uint64_t mask_counter = 0;
  uint64_t dropout_counter = 0;
  double lr_student = 1e-4;
  double lr_amn = 1e-5;
};

struct EvalResult {
  HrMetrics metrics;
  size_t clips = 0;
};

using ClipSet = std::vector<std::pair<VideoClip, ClipMeta>>;

struct TrainState {
  RunConfig cfg;
  StudentParams<Real> student;
  AmnParams<Real> amn;
  ParamSet<Real> student_set;   // all student parameters
  ParamSet<Real> amn_set;       // all masking-network parameters
  ParamSet<Real> finetune_set;  // encoder + rppg head only
  AdamW<Real> opt_student;
  AdamW<Real> opt_amn;
  size_t epoch = 0;  // global epoch counter across stages
  int stage = 1;
  uint64_t seed = 1;

  explicit TrainState(const RunConfig& cfg);
  TrainState(const TrainState&) = delete;
};

class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);

  TrainState& state() { return st_; }
  const RunConfig& cfg() const { return st_.cfg; }

  StepRecord pretrain_step(const ClipSet& batch, const StepOptions& opt);
  // supervised loss against the ground-truth BVP; updates encoder + head
  StepRecord finetune_step(const ClipSet& batch, double lr,
                           uint64_t dropout_counter);

  void run_stage(const StageConfig& sc, std::ostream* csv,
                 const std::string& checkpoint_dir = "",
                 size_t start_epoch = 0);
  struct StageEval {
    int stage = 0;
    EvalResult clean, occluded;
  };
  // Stages 1..3 per the config; checkpoints at stage boundaries. When the
  // state carries a nonzero epoch (a loaded checkpoint), completed epochs
  // are skipped and the run continues where it stopped.
  std::vector<StageEval> run_curriculum(std::ostream* csv,
                                        const std::string& checkpoint_dir);

  struct FinetuneReport {
    size_t epochs_run = 0;
    double best_val_mae = 0;
  };
  FinetuneReport run_finetune(std::ostream* csv);

  std::vector<double> predict_waveform(const VideoClip& clip);
  EvalResult evaluate(const ClipSet& clips);

  ClipSet make_clips(RunConfig::SeedRange seeds, DataRegime regime,
                     size_t stage_epoch) const;
  ClipSet val_clean() const;
  ClipSet val_occluded() const;

  static void csv_header(std::ostream& os);

 private:
  Tensor<Real> batch_video(const ClipSet& batch, size_t lo, size_t hi) const;
  Tensor<Real> teacher_batch(const ClipSet& batch, size_t lo,
                             size_t hi) const;
  void csv_row(std::ostream* os, int stage, double lr_s, double lr_a,
               const StepRecord& avg, const EvalResult& val) const;
  StepRecord run_epoch(const StageConfig& sc, size_t stage_epoch,
                       double lr_s);

  TrainState st_;
  LossWeights lw_;
  AdamW<Real> opt_finetune_;
};

// Checkpoint directory: one NDT1 file per tensor, a manifest describing
// name/file/shape/role/decay flag, optimizer moments, and a state file with
// epoch, stage, seed, and derived rng counters.
void save_checkpoint(const std::string& dir, const TrainState& st);
// Loads params + optimizer state into an initialized TrainState; shapes
// must match. Forward outputs after a round trip are bit-identical.
void load_checkpoint(const std::string& dir, TrainState& st);

}  // namespace pmae
