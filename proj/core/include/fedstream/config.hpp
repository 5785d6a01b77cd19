#pragma once

#include <string>
#include <vector>

#include "fedstream/experiment.hpp"
#include "fedstream/pipeline.hpp"

namespace fedstream {

// CLI-facing run description: the pipeline config plus transport and
// feedback-inbox wiring that only matters to `fedstream run`.
struct RunSpec {
  PipelineConfig pipeline;
  std::string input_path;
  RecordFormat input_format = RecordFormat::jsonl;
  bool input_format_forced = false;
  std::string feedback_file;
  std::string file_drop_dir;   // community transport root for cross-process runs
  uint64_t drop_timeout_ms = 30000;
};

RunSpec load_run_spec(const std::string& path);
SyntheticConfig load_synth_config(const std::string& path);
ExperimentConfig load_experiment_config(const std::string& path);

// JSONL feedback inbox lines: {"org":..,"record":..,"label":..,"operator":..,"ts":..}
std::vector<FeedbackEvent> load_feedback_file(const std::string& path,
                                              const std::string& org_filter);
void append_feedback_file(const std::string& path, const std::string& org,
                          const FeedbackEvent& event);

}  // namespace fedstream
