#include "adrbm/train_log.hpp"

#include <ostream>

#include <fmt/format.h>

namespace adrbm {

std::string StructureEvent::to_string() const {
  switch (kind) {
  case Kind::generate:
    return fmt::format("generate:{}:{:.6g}", index, score);
  case Kind::annihilate:
    return fmt::format("annihilate:{}:{:.6g}", index, score);
  case Kind::add_layer:
    return fmt::format("add_layer:{}:{:.6g}", index, score);
  }
  return "unknown";
}

void TrainLog::append(const TrainLog& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

std::string format_log_row(const LogRow& row) {
  std::string events;
  for (const auto& e : row.events) {
    if (!events.empty()) {
      events += ';';
    }
    events += e.to_string();
  }
  return fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{}", row.epoch, row.layer,
                     row.energy, row.error, row.wd_c, row.wd_w, row.n_hidden, row.n_layers,
                     events);
}

void write_log_csv(std::ostream& out, const TrainLog& log) {
  out << kLogCsvHeader << '\n';
  for (const auto& row : log.rows) {
    out << format_log_row(row) << '\n';
  }
}

} // namespace adrbm
