#include "pulsemae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pulsemae/ndt1.hpp"

namespace pmae {

namespace {

constexpr uint64_t kOccEvalCounter = 1ULL << 60;  // fixed occluded val set

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<double> to_double(const Var<Real>& wave, size_t row) {
  size_t T = wave->value.shape().back();
  std::vector<double> out(T);
  for (size_t t = 0; t < T; ++t) out[t] = wave->value[row * T + t];
  return out;
}

}  // namespace

LossWeights LossWeights::from(const RunConfig& cfg) {
  LossWeights lw;
  lw.lambda_mae = cfg.num("loss.lambda_mae");
  lw.lambda_dist = cfg.num("loss.lambda_dist");
  lw.beta = cfg.num("loss.beta");
  lw.alpha = cfg.num("loss.alpha");
  lw.lambda_hr = cfg.num("loss.lambda_hr");
  return lw;
}

double lr_at(double epoch, double base, double warmup, double total) {
  require(epoch >= 0, "lr_at: epoch must be >= 0");
  warmup = std::min(warmup, total);
  if (warmup > 0 && epoch <= warmup) return base * (epoch / warmup);
  if (total <= warmup) return base;
  double u = (epoch - warmup) / (total - warmup);
  u = std::clamp(u, 0.0, 1.0);
  return base * 0.5 * (1.0 + std::cos(M_PI * u));
}

TrainState::TrainState(const RunConfig& c)
    : cfg(c),
      seed(uint64_t(c.index("train.seed"))) {
  RngStream init_rng(seed, streams::kParamInit);
  student = StudentParams<Real>::init(cfg.student(), init_rng);
  amn = AmnParams<Real>::init(cfg.amn(), init_rng);
  student.register_params(student_set);
  amn.register_params(amn_set);
  student.register_encoder_and_head(finetune_set);
  OptimConfig oc;
  oc.beta1 = cfg.num("opt.beta1");
  oc.beta2 = cfg.num("opt.beta2");
  oc.weight_decay = cfg.num("opt.weight_decay");
  opt_student = AdamW<Real>(&student_set, oc);
  opt_amn = AdamW<Real>(&amn_set, oc);
}

Trainer::Trainer(const RunConfig& cfg) : st_(cfg), lw_(LossWeights::from(cfg)) {}

Tensor<Real> Trainer::batch_video(const ClipSet& batch, size_t lo,
                                  size_t hi) const {
  const Shape& s = batch[lo].first.data.shape();
  size_t B = hi - lo;
  Tensor<Real> video({B, s[0], s[1], s[2], s[3]});
  size_t per = batch[lo].first.data.numel();
  for (size_t b = 0; b < B; ++b) {
    require(batch[lo + b].first.data.shape() == s,
            "ragged clip shapes in one batch");
    std::copy_n(batch[lo + b].first.data.data(), per,
                video.data() + b * per);
  }
  return video;
}

Tensor<Real> Trainer::teacher_batch(const ClipSet& batch, size_t lo,
                                    size_t hi) const {
  TeacherKind kind = st_.cfg.teacher();
  double crop = st_.cfg.num("teacher.crop");
  size_t B = hi - lo, T = batch[lo].first.data.shape()[1];
  Tensor<Real> out({B, T});
  for (size_t b = 0; b < B; ++b) {
    auto y = teacher_forward(batch[lo + b].first, &batch[lo + b].second,
                             kind, crop);
    for (size_t t = 0; t < T; ++t) out[b * T + t] = Real(y[t]);
  }
  return out;
}

StepRecord Trainer::pretrain_step(const ClipSet& batch,
                                  const StepOptions& opt) {
  size_t B = batch.size();
  require(B >= 1, "empty batch");
  double rho = st_.cfg.num("amn.rho");
  double tau = st_.cfg.num("amn.tau");
  double clip_norm = st_.cfg.num("opt.clip_norm");
  size_t N = st_.student.cfg.tub.tokens();

  Tensor<Real> video = batch_video(batch, 0, B);
  Var<Real> scores = opt.random_mask
                         ? constant(Tensor<Real>({B, N}))
                         : importance_scores(video, st_.amn);
  RngStream mask_rng(st_.seed, streams::kMaskNoise, opt.mask_counter);
  MaskSample<Real> ms = sample_mask(scores, rho, tau, mask_rng);

  RngStream drop_rng(st_.seed, streams::kDropout, opt.dropout_counter);
  StudentForward<Real> out =
      student_forward(video, ms.mask, st_.student, drop_rng, true);
  ReconLoss<Real> rl = recon_loss(out.reconstructed, out.masked_targets);
  Tensor<Real> teach = teacher_batch(batch, 0, B);
  DistillLoss<Real> dl = distill_loss(out.waveform, teach);

  Var<Real> student_loss =
      add(mul_scalar(rl.total, Real(opt.lambda_mae)),
          mul_scalar(dl.mean, Real(opt.lambda_dist)));

  StepRecord rec;
  rec.loss_pixel = rl.pixel->value[0];
  rec.loss_corr = rl.corr->value[0];
  rec.loss_distill = dl.mean->value[0];
  rec.mask_ratio = double(ms.mask.n_masked()) / double(N);
  if (!std::isfinite(rec.loss_pixel) || !std::isfinite(rec.loss_corr) ||
      !std::isfinite(rec.loss_distill))
    fail_numeric("non-finite pretraining loss: pixel=", rec.loss_pixel,
                 " corr=", rec.loss_corr, " distill=", rec.loss_distill);

  st_.student_set.zero_grads();
  st_.amn_set.zero_grads();
  backward(student_loss);
  if (st_.amn_set.grad_norm() != 0.0)
    fail_numeric("gradient isolation violated: student loss reached AMN "
                 "parameters");
  rec.grad_norm_student = st_.student_set.clip_grad_norm(clip_norm);
  st_.opt_student.step(opt.lr_student);

  if (opt.update_amn && !opt.random_mask) {
    // reward: per-sample distillation losses as detached constants
    Tensor<Real> rewards = dl.per_sample->value;
    st_.student_set.zero_grads();
    st_.amn_set.zero_grads();
    Var<Real> logp = mask_log_prob(ms.logits, ms.mask);
    Var<Real> pg =
        policy_loss(logp, rewards, Real(lw_.beta), Real(lw_.alpha));
    rec.loss_pg = pg->value[0];
    if (!std::isfinite(rec.loss_pg))
      fail_numeric("non-finite policy loss: ", rec.loss_pg);
    backward(pg);
    if (st_.student_set.grad_norm() != 0.0)
      fail_numeric("gradient isolation violated: policy loss reached "
                   "student parameters");
    rec.grad_norm_amn = st_.amn_set.clip_grad_norm(clip_norm);
    st_.opt_amn.step(opt.lr_amn);
  }
  return rec;
}

StepRecord Trainer::finetune_step(const ClipSet& batch, double lr,
                                  uint64_t dropout_counter) {
  size_t B = batch.size();
  require(B >= 1, "empty batch");
  double clip_norm = st_.cfg.num("opt.clip_norm");
  size_t N = st_.student.cfg.tub.tokens();
  size_t T = st_.student.cfg.tub.T;
  double fs = st_.cfg.num("scene.fs");
  size_t pad = st_.cfg.index("eval.pad");
  double blo = st_.cfg.num("eval.band_lo"), bhi = st_.cfg.num("eval.band_hi");

  Tensor<Real> video = batch_video(batch, 0, B);
  RngStream drop_rng(st_.seed, streams::kDropout, dropout_counter);
  MaskBatch none = MaskBatch::none(B, N);
  StudentForward<Real> out =
      student_forward(video, none, st_.student, drop_rng, true);

  Tensor<Real> gt({B, T});
  Tensor<Real> hr_hard({B});
  for (size_t b = 0; b < B; ++b) {
    const auto& bvp = batch[b].second.bvp;
    require(bvp.size() == T, "labeled clip has BVP length ", bvp.size(),
            " but clips are length ", T);
    for (size_t t = 0; t < T; ++t) gt[b * T + t] = Real(bvp[t]);
    hr_hard[b] = Real(estimate_hr(bvp, fs, pad, blo, bhi).bpm);
  }

  Var<Real> rho = pearson_rows(out.waveform, constant(gt));
  Var<Real> corr_term = add_scalar(neg(mean_all(rho)), Real(1));
  Var<Real> soft = hr_soft(out.waveform, fs, blo, bhi, pad);
  Var<Real> hr_term = mean_all(vabs(sub(soft, constant(hr_hard))));
  Var<Real> loss = add(corr_term, mul_scalar(hr_term, Real(lw_.lambda_hr)));

  StepRecord rec;
  rec.loss_corr = corr_term->value[0];
  rec.loss_distill = lw_.lambda_hr * hr_term->value[0];
  if (!std::isfinite(rec.loss_corr) || !std::isfinite(rec.loss_distill))
    fail_numeric("non-finite fine-tuning loss: corr=", rec.loss_corr,
                 " hr=", rec.loss_distill);
  st_.student_set.zero_grads();
  backward(loss);
  rec.grad_norm_student = st_.finetune_set.clip_grad_norm(clip_norm);
  // only encoder + rppg head receive the update
  if (opt_finetune_.size() == 0)
    opt_finetune_ = AdamW<Real>(&st_.finetune_set, st_.opt_student.config());
  opt_finetune_.step(lr);
  return rec;
}

ClipSet Trainer::make_clips(RunConfig::SeedRange seeds, DataRegime regime,
                            size_t stage_epoch) const {
  SceneSpec scene = regime == DataRegime::domain_shift
                        ? st_.cfg.scene_stage3()
                        : st_.cfg.scene();
  CurriculumSchedule sched = st_.cfg.schedule();
  ClipSet out;
  out.reserve(seeds.count());
  for (uint64_t s = seeds.lo; s < seeds.hi; ++s) {
    auto [clip, meta] = gen_clip(s, scene);
    if (regime == DataRegime::occluded) {
      RngStream rng(st_.seed ^ (s * 0x9e3779b97f4a7c15ULL),
                    streams::kOcclusion, uint64_t(stage_epoch) << 24);
      apply_occlusions(clip, meta, double(stage_epoch), sched, rng);
    }
    out.emplace_back(std::move(clip), std::move(meta));
  }
  return out;
}

ClipSet Trainer::val_clean() const {
  return make_clips(st_.cfg.val_seeds(), DataRegime::clean, 0);
}

ClipSet Trainer::val_occluded() const {
  ClipSet clips = val_clean();
  CurriculumSchedule fixed;
  fixed.ramp_start = 0;
  fixed.ramp_end = 1;
  fixed.prob_lo = fixed.prob_hi = 1.0;
  fixed.cov_lo = fixed.cov_hi = st_.cfg.num("eval.occluded_cov");
  for (auto& [clip, meta] : clips) {
    RngStream rng(meta.seed, streams::kOcclusion, kOccEvalCounter);
    apply_occlusions(clip, meta, 1.0, fixed, rng);
  }
  return clips;
}

std::vector<double> Trainer::predict_waveform(const VideoClip& clip) {
  const Shape& s = clip.data.shape();
  Tensor<Real> video({1, s[0], s[1], s[2], s[3]});
  std::copy_n(clip.data.data(), clip.data.numel(), video.data());
  size_t N = st_.student.cfg.tub.tokens();
  MaskBatch none = MaskBatch::none(1, N);
  RngStream unused(0, streams::kDropout);
  Var<Real> tokens = tokenize(video, st_.student);
  Var<Real> enc = encode(tokens, none, st_.student);
  Var<Real> wave = rppg_head(enc, st_.student, unused, false);
  return to_double(wave, 0);
}

EvalResult Trainer::evaluate(const ClipSet& clips) {
  double fs = st_.cfg.num("scene.fs");
  size_t window = st_.cfg.index("eval.window");
  size_t stride = st_.cfg.index("eval.stride");
  size_t pad = st_.cfg.index("eval.pad");
  std::vector<double> pred_hr, ref_hr;
  std::vector<std::vector<double>> pred_sig, ref_sig;
  for (const auto& [clip, meta] : clips) {
    std::vector<double> wave = predict_waveform(clip);
    pred_hr.push_back(sliding_hr(wave, fs, window, stride, pad));
    ref_hr.push_back(sliding_hr(meta.bvp, fs, window, stride, pad));
    pred_sig.push_back(std::move(wave));
    ref_sig.push_back(meta.bvp);
  }
  EvalResult r;
  r.metrics = metrics(pred_hr, ref_hr, pred_sig, ref_sig);
  r.clips = clips.size();
  return r;
}

void Trainer::csv_header(std::ostream& os) {
  os << "epoch,stage,lr_student,lr_amn,loss_pixel,loss_corr,loss_distill,"
        "loss_pg,grad_norm_student,grad_norm_amn,mask_ratio_observed,"
        "val_mae,val_rmse,val_r\n";
}

void Trainer::csv_row(std::ostream* os, int stage, double lr_s, double lr_a,
                      const StepRecord& avg, const EvalResult& val) const {
  if (!os) return;
  *os << st_.epoch << "," << stage << "," << fmt9(lr_s) << "," << fmt9(lr_a)
      << "," << fmt9(avg.loss_pixel) << "," << fmt9(avg.loss_corr) << ","
      << fmt9(avg.loss_distill) << "," << fmt9(avg.loss_pg) << ","
      << fmt9(avg.grad_norm_student) << "," << fmt9(avg.grad_norm_amn)
      << "," << fmt9(avg.mask_ratio) << "," << fmt9(val.metrics.mae) << ","
      << fmt9(val.metrics.rmse) << "," << fmt9(val.metrics.r) << "\n";
}

StepRecord Trainer::run_epoch(const StageConfig& sc, size_t stage_epoch,
                              double lr_s) {
  ClipSet clips =
      make_clips(st_.cfg.train_seeds(), sc.regime, stage_epoch);
  size_t B = st_.cfg.index("train.batch");
  require(B >= 2, "train.batch must be at least 2 for the policy baseline");
  std::vector<size_t> order(clips.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngStream shuffle_rng(st_.seed, streams::kShuffle,
                        uint64_t(st_.epoch) << 20);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);

  StepRecord avg;
  size_t steps = 0;
  bool random_mask = st_.cfg.flag("train.random_mask");
  double lr_amn = st_.cfg.num("opt.lr_amn");
  for (size_t lo = 0; lo + 2 <= clips.size(); lo += B) {
    size_t hi = std::min(lo + B, clips.size());
    if (hi - lo < 2) break;
    ClipSet batch;
    for (size_t i = lo; i < hi; ++i) batch.push_back(clips[order[i]]);
    StepOptions o;
    o.lambda_mae = lw_.lambda_mae;
    o.lambda_dist = lw_.lambda_dist;
    o.random_mask = random_mask;
    o.mask_counter = (uint64_t(st_.epoch) << 40) | (uint64_t(steps) << 20);
    o.dropout_counter = o.mask_counter;
    o.lr_student = lr_s;
    o.lr_amn = lr_amn;
    StepRecord rec = pretrain_step(batch, o);
    avg.loss_pixel += rec.loss_pixel;
    avg.loss_corr += rec.loss_corr;
    avg.loss_distill += rec.loss_distill;
    avg.loss_pg += rec.loss_pg;
    avg.grad_norm_student += rec.grad_norm_student;
    avg.grad_norm_amn += rec.grad_norm_amn;
    avg.mask_ratio += rec.mask_ratio;
    ++steps;
  }
  require(steps > 0, "no full batches; check data ranges vs batch size");
  avg.loss_pixel /= double(steps);
  avg.loss_corr /= double(steps);
  avg.loss_distill /= double(steps);
  avg.loss_pg /= double(steps);
  avg.grad_norm_student /= double(steps);
  avg.grad_norm_amn /= double(steps);
  avg.mask_ratio /= double(steps);
  return avg;
}

void Trainer::run_stage(const StageConfig& sc, std::ostream* csv,
                        const std::string& checkpoint_dir,
                        size_t start_epoch) {
  size_t every = st_.cfg.index("train.checkpoint_every");
  double lr_amn = st_.cfg.num("opt.lr_amn");
  ClipSet val = val_clean();
  for (size_t e = start_epoch; e < sc.epochs; ++e) {
    double lr_s = lr_at(double(e + 1), sc.lr_base, sc.warmup,
                        double(sc.epochs));
    StepRecord avg = run_epoch(sc, e, lr_s);
    EvalResult v = evaluate(val);
    st_.stage = sc.stage;
    st_.epoch += 1;
    csv_row(csv, sc.stage, lr_s, lr_amn, avg, v);
    if (every > 0 && !checkpoint_dir.empty() && (e + 1) % every == 0)
      save_checkpoint(checkpoint_dir + "/epoch_" + std::to_string(st_.epoch),
                      st_);
  }
}

std::vector<Trainer::StageEval> Trainer::run_curriculum(
    std::ostream* csv, const std::string& checkpoint_dir) {
  double base = st_.cfg.num("opt.lr_student");
  double warmup = st_.cfg.num("opt.warmup_epochs");
  StageConfig stages[3] = {
      {1, st_.cfg.index("train.stage1_epochs"), DataRegime::clean, base,
       warmup},
      {2, st_.cfg.index("train.stage2_epochs"), DataRegime::occluded, base,
       warmup},
      {3, st_.cfg.index("train.stage3_epochs"), DataRegime::domain_shift,
       base, warmup},
  };
  std::vector<StageEval> evals;
  ClipSet vclean = val_clean();
  ClipSet voccl = val_occluded();
  for (const auto& sc : stages) {
    if (sc.epochs == 0) continue;
    run_stage(sc, csv, checkpoint_dir);
    StageEval se;
    se.stage = sc.stage;
    se.clean = evaluate(vclean);
    se.occluded = evaluate(voccl);
    evals.push_back(se);
    if (!checkpoint_dir.empty()) {
      std::string dir =
          checkpoint_dir + "/stage" + std::to_string(sc.stage);
      save_checkpoint(dir, st_);
      std::ostringstream os;
      os << "stage " << sc.stage << " clean_mae " << fmt9(se.clean.metrics.mae)
         << " clean_rmse " << fmt9(se.clean.metrics.rmse) << " clean_r "
         << fmt9(se.clean.metrics.r) << " occluded_mae "
         << fmt9(se.occluded.metrics.mae) << " occluded_rmse "
         << fmt9(se.occluded.metrics.rmse) << " occluded_r "
         << fmt9(se.occluded.metrics.r) << "\n";
      atomic_write_file(dir + "/eval.txt", os.str());
    }
  }
  return evals;
}

Trainer::FinetuneReport Trainer::run_finetune(std::ostream* csv) {
  size_t E = st_.cfg.index("finetune.epochs");
  size_t B = st_.cfg.index("finetune.batch");
  double base = st_.cfg.num("finetune.lr");
  size_t patience = st_.cfg.index("finetune.patience");
  double min_delta = st_.cfg.num("finetune.min_delta");

  ClipSet labeled = make_clips(st_.cfg.train_seeds(), DataRegime::clean, 0);
  ClipSet val = val_clean();

  std::vector<Tensor<Real>> best;
  for (const auto& e : st_.finetune_set.entries())
    best.push_back(e.var->value);
  double best_mae = 1e30;
  size_t best_epoch = 0;
  FinetuneReport report;

  for (size_t e = 0; e < E; ++e) {
    double lr = base * 0.5 * (1.0 + std::cos(M_PI * double(e) / double(E)));
    std::vector<size_t> order(labeled.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    RngStream shuffle_rng(st_.seed, streams::kShuffle,
                          (uint64_t(st_.epoch) << 20) ^ 0xf17e);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);
    StepRecord avg;
    size_t steps = 0;
    for (size_t lo = 0; lo < labeled.size(); lo += B) {
      size_t hi = std::min(lo + B, labeled.size());
      ClipSet batch;
      for (size_t i = lo; i < hi; ++i) batch.push_back(labeled[order[i]]);
      uint64_t dc = (uint64_t(st_.epoch) << 40) | (uint64_t(steps) << 20);
      StepRecord rec = finetune_step(batch, lr, dc);
      avg.loss_corr += rec.loss_corr;
      avg.loss_distill += rec.loss_distill;
      avg.grad_norm_student += rec.grad_norm_student;
      ++steps;
    }
    avg.loss_corr /= double(steps);
    avg.loss_distill /= double(steps);
    avg.grad_norm_student /= double(steps);
    EvalResult v = evaluate(val);
    st_.epoch += 1;
    report.epochs_run = e + 1;
    csv_row(csv, 4, lr, 0.0, avg, v);
    if (v.metrics.mae < best_mae - min_delta) {
      best_mae = v.metrics.mae;
      best_epoch = e;
      for (size_t i = 0; i < best.size(); ++i)
        best[i] = st_.finetune_set[i].var->value;
    } else if (e >= best_epoch + patience) {
      break;
    }
  }
  for (size_t i = 0; i < best.size(); ++i)
    st_.finetune_set[i].var->value = best[i];
  report.best_val_mae = best_mae;
  return report;
}

// ---- checkpointing ----

namespace {

void save_set(const std::string& dir, const ParamSet<Real>& set,
              const AdamW<Real>* opt, const std::string& prefix,
              std::ostringstream& manifest) {
  for (size_t i = 0; i < set.size(); ++i) {
    const auto& e = set[i];
    std::string file = prefix + e.name + ".ndt1";
    ndt1_write(dir + "/" + file, e.var->value);
    manifest << e.name << "\t" << file << "\t"
             << shape_str(e.var->value.shape()) << "\t" << e.role << "\t"
             << (e.decay_exempt ? 1 : 0) << "\n";
    if (opt) {
      ndt1_write(dir + "/" + prefix + e.name + ".m.ndt1",
                 opt->moment1(i));
      ndt1_write(dir + "/" + prefix + e.name + ".v.ndt1",
                 opt->moment2(i));
    }
  }
}

void load_set(const std::string& dir, const ParamSet<Real>& set,
              AdamW<Real>* opt, const std::string& prefix) {
  for (size_t i = 0; i < set.size(); ++i) {
    const auto& e = set[i];
    std::string file = dir + "/" + prefix + e.name + ".ndt1";
    Tensor<Real> t = ndt1_read_f32(file);
    require(t.shape() == e.var->value.shape(), "checkpoint shape mismatch for ",
            e.name, ": ", shape_str(t.shape()), " vs ",
            shape_str(e.var->value.shape()));
    e.var->value = std::move(t);
    if (opt) {
      opt->moment1(i) = ndt1_read_f32(dir + "/" + prefix + e.name + ".m.ndt1");
      opt->moment2(i) = ndt1_read_f32(dir + "/" + prefix + e.name + ".v.ndt1");
    }
  }
}

}  // namespace

void save_checkpoint(const std::string& dir, const TrainState& st) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  save_set(dir, st.student_set, &st.opt_student, "", manifest);
  save_set(dir, st.amn_set, &st.opt_amn, "", manifest);
  atomic_write_file(dir + "/manifest.txt", manifest.str());
  std::ostringstream state;
  state << "epoch = " << st.epoch << "\n";
  state << "stage = " << st.stage << "\n";
  state << "seed = " << st.seed << "\n";
  state << "opt_student_steps = " << st.opt_student.steps() << "\n";
  state << "opt_amn_steps = " << st.opt_amn.steps() << "\n";
  // rng counters are derived from (epoch, step); recorded for inspection
  state << "rng_mask_counter = " << (uint64_t(st.epoch) << 40) << "\n";
  state << "rng_dropout_counter = " << (uint64_t(st.epoch) << 40) << "\n";
  atomic_write_file(dir + "/state.txt", state.str());
}

void load_checkpoint(const std::string& dir, TrainState& st) {
  require(std::filesystem::exists(dir + "/state.txt"),
          "not a checkpoint directory: ", dir);
  load_set(dir, st.student_set, &st.opt_student, "");
  load_set(dir, st.amn_set, &st.opt_amn, "");
  std::ifstream in(dir + "/state.txt");
  std::string line;
  while (std::getline(in, line)) {
    size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq - 1);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    uint64_t val = std::stoull(line.substr(eq + 1));
    if (key == "epoch") st.epoch = size_t(val);
    else if (key == "stage") st.stage = int(val);
    else if (key == "seed") st.seed = val;
    else if (key == "opt_student_steps")
      st.opt_student.set_steps(int64_t(val));
    else if (key == "opt_amn_steps") st.opt_amn.set_steps(int64_t(val));
  }
}

}  // namespace pmae
