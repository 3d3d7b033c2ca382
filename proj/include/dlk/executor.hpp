#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dlk/numerics.hpp"

namespace dlk {

// Named set of shared buffers a program runs against.
class BufferSet {
 public:
  Grid2D& add(std::string name, Grid2D grid);

  const Grid2D& at(std::string_view name) const;
  Grid2D& at(std::string_view name);
  bool contains(std::string_view name) const;

  // Slot index for a name, or npos. Slots are stable once added.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t slot(std::string_view name) const;

  std::size_t count() const { return items_.size(); }
  const std::string& name_of(std::size_t slot) const { return items_[slot].first; }
  const Grid2D& grid_of(std::size_t slot) const { return items_[slot].second; }
  Grid2D& grid_of(std::size_t slot) { return items_[slot].second; }

 private:
  std::vector<std::pair<std::string, Grid2D>> items_;
};

// One write issued by a thread during a phase. Only the real part of the
// target cell is replaced; the imaginary part is left untouched.
struct WriteRecord {
  std::string buffer;
  std::size_t index = 0;
  float value = 0.0f;
};

namespace detail {
struct AccessLog;
}

// Read access a phase function gets to the shared buffers. Reads observe
// the buffer state as of the previous barrier; all writes go through the
// returned WriteRecords and land when the phase's barrier is crossed.
class PhaseView {
 public:
  // Real part of buffer[index]; throws IndexFault on a bad name or index.
  float read(std::string_view buffer, std::size_t index) const;

  std::size_t thread_id() const { return thread_id_; }

 private:
  friend class Executor;
  PhaseView(const BufferSet* buffers, std::size_t phase, std::string_view phase_name,
            std::size_t thread_id, detail::AccessLog* log)
      : buffers_(buffers), phase_(phase), phase_name_(phase_name),
        thread_id_(thread_id), log_(log) {}

  const BufferSet* buffers_;
  std::size_t phase_;
  std::string_view phase_name_;
  std::size_t thread_id_;
  detail::AccessLog* log_;
};

using PhaseFn = std::function<std::vector<WriteRecord>(std::size_t id, const PhaseView&)>;

// One barrier-delimited step: every thread runs `fn` exactly once, then
// all writes are applied before any thread enters the next phase.
struct Phase {
  std::string name;
  PhaseFn fn;
};

// A kernel as an ordered list of barrier-separated phases over N threads.
struct ThreadgroupProgram {
  std::size_t thread_count = 0;
  std::vector<Phase> phases;

  void add_phase(std::string name, PhaseFn fn) {
    phases.push_back({std::move(name), std::move(fn)});
  }
};

// A same-phase collision: one thread wrote a cell another thread read or
// wrote. `thread_a` is a writer; `thread_b` is the other party.
struct Conflict {
  std::size_t phase = 0;
  std::string phase_name;
  std::string buffer;
  std::size_t index = 0;
  std::size_t thread_a = 0;
  std::size_t thread_b = 0;
  bool write_write = false;

  std::string describe() const;
};

// Runs the program to completion and returns the final buffer contents.
// Threads of one phase may be split across `workers` OS threads; for any
// program that is race-free the result is bit-identical for every worker
// count, because all cross-thread ordering comes from the barriers.
BufferSet run(const ThreadgroupProgram& program, BufferSet buffers,
              std::size_t workers = 1);

// Executes the program instrumented and reports every same-phase conflict.
// An empty list certifies the program race-free under barrier semantics.
std::vector<Conflict> check_races(const ThreadgroupProgram& program,
                                  BufferSet buffers);

}  // namespace dlk
