#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "adrbm/numerics.hpp"

namespace adrbm {

struct StructureEvent {
  enum class Kind { generate, annihilate, add_layer };

  Kind kind;
  Index index;  ///< parent neuron, removed neuron, or new layer number
  double score; ///< trigger value that caused the event

  [[nodiscard]] std::string to_string() const;
};

/// One row per (layer, epoch).
struct LogRow {
  int epoch = 0;
  int layer = 0;
  double energy = 0.0;
  double error = 0.0;
  double wd_c = 0.0;
  double wd_w = 0.0;
  Index n_hidden = 0;
  Index n_layers = 0;
  std::vector<StructureEvent> events;
};

struct TrainLog {
  std::vector<LogRow> rows;

  void append(const TrainLog& other);
};

/// Fixed column order: epoch,layer,energy,error,wd_c,wd_w,n_hidden,n_layers,event
inline constexpr const char* kLogCsvHeader =
    "epoch,layer,energy,error,wd_c,wd_w,n_hidden,n_layers,event";

std::string format_log_row(const LogRow& row);
void write_log_csv(std::ostream& out, const TrainLog& log);

} // namespace adrbm
