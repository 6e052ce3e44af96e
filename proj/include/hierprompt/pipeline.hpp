#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hierprompt/config.hpp"

namespace hierprompt {

// Staged runner over an output directory. Each stage records
// {config_hash, inputs, outputs, wall_time} in manifest.json and is skipped
// when the config hash and every input/output hash still match, unless
// `force` is set.
class Pipeline {
 public:
  Pipeline(RunConfig config, std::filesystem::path out_dir, bool force = false);

  void synth();
  void ingest();
  void summarize();
  void distill();
  void pretrain();
  void embed();
  void eval();
  void freerun();
  void ablate();
  void sweep(const std::string& key, const std::vector<json>& values);
  // Runs the named stage.
  void run(const std::string& stage);

  // True if the last stage invocation was skipped as up to date.
  bool last_skipped() const { return last_skipped_; }
  const std::filesystem::path& out_dir() const { return out_; }
  ordered_json manifest() const;

  static const std::vector<std::string>& stages();

 private:
  struct StageIo {
    std::vector<std::string> inputs;   // paths relative to out_dir
    std::vector<std::string> outputs;  // idem
    ordered_json config;               // section hashed into config_hash
  };
  template <class Body>
  void stage(const std::string& name, const StageIo& io, Body&& body);
  void require(const std::string& rel, const std::string& producer) const;

  RunConfig config_;
  std::filesystem::path out_;
  bool force_;
  bool last_skipped_ = false;
};

}  // namespace hierprompt
