#include "gora/event_log.hpp"

#include <charconv>
#include <fmt/format.h>
#include <string_view>
#include <zlib.h>

#include "gora/errors.hpp"

namespace gora {

struct EventLogWriter::Impl {
  gzFile file = nullptr;
  fmt::memory_buffer buffer;

  void flush() {
    if (buffer.size() == 0) return;
    const auto n = static_cast<unsigned>(buffer.size());
    if (gzwrite(file, buffer.data(), n) != static_cast<int>(n)) throw Error("event log: write failed");
    buffer.clear();
  }
};

EventLogWriter::EventLogWriter(const std::string& path, bool gzip) : impl_(std::make_unique<Impl>()) {
  impl_->file = gzopen(path.c_str(), gzip ? "wb6" : "wbT");
  if (!impl_->file) throw Error(fmt::format("event log: cannot open '{}'", path));
  fmt::format_to(std::back_inserter(impl_->buffer), "slot,event,winner_id\n");
}

EventLogWriter::~EventLogWriter() {
  try {
    close();
  } catch (...) {
  }
}

void EventLogWriter::write(const SlotOutcome& o) {
  fmt::format_to(std::back_inserter(impl_->buffer), "{},{},{}\n", o.slot, to_string(o.event), o.winner);
  if (impl_->buffer.size() > (1U << 16)) impl_->flush();
}

void EventLogWriter::close() {
  if (!impl_ || !impl_->file) return;
  impl_->flush();
  gzclose(impl_->file);
  impl_->file = nullptr;
}

std::vector<LoggedEvent> read_event_log(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw Error(fmt::format("event log: cannot open '{}'", path));
  std::string text;
  char chunk[1 << 16];
  int got;
  while ((got = gzread(f, chunk, sizeof chunk)) > 0) text.append(chunk, static_cast<std::size_t>(got));
  gzclose(f);
  if (got < 0) throw Error(fmt::format("event log: read error in '{}'", path));

  std::vector<LoggedEvent> out;
  std::string_view rest(text);
  bool header = true;
  while (!rest.empty()) {
    const auto eol = rest.find('\n');
    const std::string_view line = rest.substr(0, eol);
    rest = (eol == std::string_view::npos) ? std::string_view{} : rest.substr(eol + 1);
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.rfind(',');
    if (c1 == std::string_view::npos || c1 == c2) throw Error(fmt::format("event log: malformed line '{}'", line));
    LoggedEvent e;
    std::from_chars(line.data(), line.data() + c1, e.slot);
    const auto ev = line.substr(c1 + 1, c2 - c1 - 1);
    if (ev == "idle") e.event = SlotEvent::idle;
    else if (ev == "success") e.event = SlotEvent::success;
    else if (ev == "collision") e.event = SlotEvent::collision;
    else throw Error(fmt::format("event log: unknown event '{}'", ev));
    std::from_chars(line.data() + c2 + 1, line.data() + line.size(), e.winner);
    out.push_back(e);
  }
  return out;
}

}  // namespace gora
