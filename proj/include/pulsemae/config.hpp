#pragma once

#include <map>
#include <string>
#include <vector>

#include "pulsemae/amn.hpp"
#include "pulsemae/student.hpp"
#include "pulsemae/synthdata.hpp"
#include "pulsemae/teacher.hpp"

namespace pmae {

// Flat key=value run configuration. Unknown keys are rejected; every run
// writes its fully resolved config alongside its outputs.
class RunConfig {
 public:
  RunConfig();  // defaults

  static RunConfig from_file(const std::string& path);
  // "key=value" strings, e.g. from repeated --set flags
  void apply_overrides(const std::vector<std::string>& overrides);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  const std::string& get(const std::string& key) const;
  double num(const std::string& key) const;
  size_t index(const std::string& key) const;
  bool flag(const std::string& key) const;

  std::string resolved() const;  // sorted key=value text
  void write_resolved(const std::string& path) const;

  // typed views over the flat keys
  SceneSpec scene() const;
  SceneSpec scene_stage3() const;  // domain-shift regime
  TubeletConfig tubelet() const;
  StudentConfig student() const;
  AmnConfig amn() const;
  CurriculumSchedule schedule() const;
  TeacherKind teacher() const;

  struct SeedRange {
    uint64_t lo = 0, hi = 0;  // half-open
    size_t count() const { return size_t(hi - lo); }
  };
  SeedRange train_seeds() const;
  SeedRange val_seeds() const;
  SeedRange test_seeds() const;
  // overlapping train/val/test ranges refuse to run
  void check_seed_discipline() const;

  static const std::map<std::string, std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace pmae
