#pragma once

// Per-slot event log: a header line followed by `slot,event,winner_id` records
// (winner_id is -1 for idle and collision slots), optionally gzip-compressed.

#include <memory>
#include <string>
#include <vector>

#include "gora/simulator.hpp"

namespace gora {

class EventLogWriter {
 public:
  EventLogWriter(const std::string& path, bool gzip);
  ~EventLogWriter();
  EventLogWriter(const EventLogWriter&) = delete;
  EventLogWriter& operator=(const EventLogWriter&) = delete;

  void write(const SlotOutcome& outcome);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct LoggedEvent {
  std::int64_t slot = 0;
  SlotEvent event = SlotEvent::idle;
  int winner = -1;
};

/// Reads plain or gzip-compressed logs.
std::vector<LoggedEvent> read_event_log(const std::string& path);

}  // namespace gora
