#include "pulsemae/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pulsemae/errors.hpp"
#include "pulsemae/ndt1.hpp"

namespace pmae {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::known_keys() {
  static const std::map<std::string, std::string> keys = {
      // scene / generator
      {"scene.h", "32"}, {"scene.w", "32"}, {"scene.t", "32"},
      {"scene.fs", "30"},
      {"scene.face_cx", "0.5"}, {"scene.face_cy", "0.5"},
      {"scene.face_ax", "0.32"}, {"scene.face_ay", "0.40"},
      {"scene.skin_r", "0.80"}, {"scene.skin_g", "0.55"},
      {"scene.skin_b", "0.45"},
      {"scene.perf_forehead", "1.5"}, {"scene.perf_cheek", "1.3"},
      {"scene.pulse_amp", "0.01"}, {"scene.noise", "0.01"},
      {"scene.drift_amp", "0.02"}, {"scene.drift_period", "8.0"},
      {"scene.jitter", "0.7"},
      {"scene.hr_lo", "60"}, {"scene.hr_hi", "200"},
      // tokenizer
      {"tubelet.t", "2"}, {"tubelet.h", "8"}, {"tubelet.w", "8"},
      // student
      {"student.dim", "64"}, {"student.enc_blocks", "4"},
      {"student.dec_dim", "32"}, {"student.dec_blocks", "2"},
      {"student.mlp_hidden", "128"}, {"student.state", "8"},
      {"student.dropout", "0.1"},
      // adaptive masking network
      {"amn.dim", "32"}, {"amn.blocks", "2"}, {"amn.state", "8"},
      {"amn.spatial_amp", "1.0"}, {"amn.tau", "1.0"}, {"amn.rho", "0.75"},
      // teacher
      {"teacher", "oracle"}, {"teacher.crop", "0.6"},
      // losses
      {"loss.lambda_mae", "1.0"}, {"loss.lambda_dist", "1.0"},
      {"loss.beta", "2.0"}, {"loss.alpha", "1.0"},
      {"loss.lambda_hr", "0.5"},
      // optimization
      {"opt.lr_student", "1e-4"}, {"opt.lr_amn", "1e-5"},
      {"opt.warmup_epochs", "40"}, {"opt.weight_decay", "0.05"},
      {"opt.beta1", "0.9"}, {"opt.beta2", "0.999"},
      {"opt.clip_norm", "1.0"},
      // training loop
      {"train.batch", "8"}, {"train.seed", "1"},
      {"train.stage1_epochs", "30"}, {"train.stage2_epochs", "50"},
      {"train.stage3_epochs", "40"},
      {"train.checkpoint_every", "0"},
      {"train.random_mask", "0"},  // 1 = replace AMN scores with zeros
      // data splits (half-open seed ranges)
      {"data.train_lo", "0"}, {"data.train_hi", "96"},
      {"data.val_lo", "1000"}, {"data.val_hi", "1016"},
      {"data.test_lo", "2000"}, {"data.test_hi", "2024"},
      // stage-2 occlusion schedule over stage-local epochs
      {"sched.ramp_start", "50"}, {"sched.ramp_end", "150"},
      {"sched.prob_lo", "0.0"}, {"sched.prob_hi", "0.5"},
      {"sched.cov_lo", "0.10"}, {"sched.cov_hi", "0.40"},
      // stage-3 domain-shift multipliers
      {"stage3.noise_scale", "3.0"}, {"stage3.drift_scale", "2.0"},
      {"stage3.jitter_scale", "2.0"},
      // supervised fine-tuning
      {"finetune.lr", "5e-5"}, {"finetune.epochs", "100"},
      {"finetune.patience", "10"}, {"finetune.min_delta", "0.1"},
      {"finetune.batch", "8"},
      // evaluation protocol
      {"eval.window", "128"}, {"eval.stride", "32"}, {"eval.pad", "2048"},
      {"eval.band_lo", "0.7"}, {"eval.band_hi", "3.0"},
      {"eval.occluded_cov", "0.30"},
  };
  return keys;
}

RunConfig::RunConfig() : values_(known_keys()) {}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file: ", path);
  RunConfig cfg;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    require(eq != std::string::npos, path, ":", lineno,
            ": expected key = value, got: ", t);
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::apply_overrides(const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    size_t eq = ov.find('=');
    require(eq != std::string::npos, "override must be key=value, got: ", ov);
    set(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  require(known_keys().count(key) == 1, "unknown config key: ", key);
  require(!value.empty(), "empty value for config key: ", key);
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const {
  return values_.count(key) == 1;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  require(it != values_.end(), "unknown config key: ", key);
  return it->second;
}

double RunConfig::num(const std::string& key) const {
  const std::string& v = get(key);
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    require(pos == v.size(), "trailing junk in numeric value");
    return d;
  } catch (const ValidationError&) {
    throw;
  } catch (...) {
    fail("config key ", key, " is not a number: ", v);
  }
}

size_t RunConfig::index(const std::string& key) const {
  double d = num(key);
  require(d >= 0 && d == double(size_t(d)), "config key ", key,
          " must be a non-negative integer, got ", get(key));
  return size_t(d);
}

bool RunConfig::flag(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  fail("config key ", key, " must be a boolean, got ", v);
}

std::string RunConfig::resolved() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

void RunConfig::write_resolved(const std::string& path) const {
  atomic_write_file(path, resolved());
}

SceneSpec RunConfig::scene() const {
  SceneSpec s;
  s.H = index("scene.h");
  s.W = index("scene.w");
  s.T = index("scene.t");
  s.fs = num("scene.fs");
  s.face_cx = num("scene.face_cx");
  s.face_cy = num("scene.face_cy");
  s.face_ax = num("scene.face_ax");
  s.face_ay = num("scene.face_ay");
  s.skin_r = num("scene.skin_r");
  s.skin_g = num("scene.skin_g");
  s.skin_b = num("scene.skin_b");
  s.perf_forehead = num("scene.perf_forehead");
  s.perf_cheek = num("scene.perf_cheek");
  s.pulse_amp = num("scene.pulse_amp");
  s.noise_sigma = num("scene.noise");
  s.drift_amp = num("scene.drift_amp");
  s.drift_period_s = num("scene.drift_period");
  s.jitter_amp = num("scene.jitter");
  s.hr_lo = num("scene.hr_lo");
  s.hr_hi = num("scene.hr_hi");
  s.validate();
  return s;
}

SceneSpec RunConfig::scene_stage3() const {
  SceneSpec s = scene();
  s.noise_sigma *= num("stage3.noise_scale");
  s.drift_amp *= num("stage3.drift_scale");
  s.jitter_amp *= num("stage3.jitter_scale");
  s.validate();
  return s;
}

TubeletConfig RunConfig::tubelet() const {
  TubeletConfig t;
  t.t = index("tubelet.t");
  t.h = index("tubelet.h");
  t.w = index("tubelet.w");
  t.C = 3;
  t.T = index("scene.t");
  t.H = index("scene.h");
  t.W = index("scene.w");
  t.embed_dim = index("student.dim");
  t.validate();
  return t;
}

StudentConfig RunConfig::student() const {
  StudentConfig c;
  c.tub = tubelet();
  c.enc_blocks = index("student.enc_blocks");
  c.dec_dim = index("student.dec_dim");
  c.dec_blocks = index("student.dec_blocks");
  c.mlp_hidden = index("student.mlp_hidden");
  c.state_size = index("student.state");
  c.dropout_p = num("student.dropout");
  return c;
}

AmnConfig RunConfig::amn() const {
  AmnConfig c;
  c.tub = tubelet();
  c.tub.embed_dim = index("amn.dim");
  c.blocks = index("amn.blocks");
  c.state_size = index("amn.state");
  c.spatial_amp = num("amn.spatial_amp");
  return c;
}

CurriculumSchedule RunConfig::schedule() const {
  CurriculumSchedule s;
  s.ramp_start = num("sched.ramp_start");
  s.ramp_end = num("sched.ramp_end");
  s.prob_lo = num("sched.prob_lo");
  s.prob_hi = num("sched.prob_hi");
  s.cov_lo = num("sched.cov_lo");
  s.cov_hi = num("sched.cov_hi");
  require(s.ramp_end >= s.ramp_start, "sched ramp must not be reversed");
  return s;
}

TeacherKind RunConfig::teacher() const { return teacher_kind_parse(get("teacher")); }

RunConfig::SeedRange RunConfig::train_seeds() const {
  return {uint64_t(index("data.train_lo")), uint64_t(index("data.train_hi"))};
}
RunConfig::SeedRange RunConfig::val_seeds() const {
  return {uint64_t(index("data.val_lo")), uint64_t(index("data.val_hi"))};
}
RunConfig::SeedRange RunConfig::test_seeds() const {
  return {uint64_t(index("data.test_lo")), uint64_t(index("data.test_hi"))};
}

void RunConfig::check_seed_discipline() const {
  SeedRange r[3] = {train_seeds(), val_seeds(), test_seeds()};
  const char* names[3] = {"train", "val", "test"};
  for (int i = 0; i < 3; ++i) {
    require(r[i].lo < r[i].hi, names[i], " seed range is empty: [", r[i].lo,
            ",", r[i].hi, ")");
    for (int j = i + 1; j < 3; ++j) {
      bool disjoint = r[i].hi <= r[j].lo || r[j].hi <= r[i].lo;
      require(disjoint, names[i], " and ", names[j],
              " seed ranges overlap: [", r[i].lo, ",", r[i].hi, ") vs [",
              r[j].lo, ",", r[j].hi, ")");
    }
  }
}

}  // namespace pmae
