#include "dlk/executor.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <tuple>
#include <unordered_map>

namespace dlk {

namespace detail {
// Per-thread, per-phase list of cells read: (buffer slot, flat index).
struct AccessLog {
  std::vector<std::pair<std::size_t, std::size_t>> reads;
};
}  // namespace detail

Grid2D& BufferSet::add(std::string name, Grid2D grid) {
  if (contains(name)) {
    throw InternalError("buffer '" + name + "' already exists in this set");
  }
  items_.emplace_back(std::move(name), std::move(grid));
  return items_.back().second;
}

std::size_t BufferSet::slot(std::string_view name) const {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].first == name) return i;
  }
  return npos;
}

bool BufferSet::contains(std::string_view name) const { return slot(name) != npos; }

const Grid2D& BufferSet::at(std::string_view name) const {
  std::size_t s = slot(name);
  if (s == npos) throw InternalError("no buffer named '" + std::string(name) + "'");
  return items_[s].second;
}

Grid2D& BufferSet::at(std::string_view name) {
  std::size_t s = slot(name);
  if (s == npos) throw InternalError("no buffer named '" + std::string(name) + "'");
  return items_[s].second;
}

float PhaseView::read(std::string_view buffer, std::size_t index) const {
  std::size_t s = buffers_->slot(buffer);
  if (s == BufferSet::npos) {
    throw IndexFault("read of unknown buffer '" + std::string(buffer) + "' in phase " +
                     std::to_string(phase_) + " '" + std::string(phase_name_) +
                     "' by thread " + std::to_string(thread_id_));
  }
  const Grid2D& grid = buffers_->grid_of(s);
  if (index >= grid.size()) {
    throw IndexFault("out-of-bounds read of buffer '" + std::string(buffer) + "' index " +
                     std::to_string(index) + " (size " + std::to_string(grid.size()) +
                     ") in phase " + std::to_string(phase_) + " '" +
                     std::string(phase_name_) + "' by thread " + std::to_string(thread_id_));
  }
  if (log_) log_->reads.emplace_back(s, index);
  return grid[index].real;
}

// PhaseView's constructor is private; this is the one place views are made.
class Executor {
 public:
  static PhaseView view(const BufferSet* buffers, std::size_t phase,
                        std::string_view phase_name, std::size_t id,
                        detail::AccessLog* log) {
    return PhaseView(buffers, phase, phase_name, id, log);
  }
};

namespace {

void validate(const ThreadgroupProgram& program, std::size_t workers) {
  if (program.thread_count == 0) {
    throw ShapeError("threadgroup program needs a positive thread count");
  }
  if (workers == 0) throw ShapeError("worker count must be positive");
}

// Runs one phase for every thread and collects the write records, without
// applying them. Reads therefore observe the previous-barrier state. The
// thread range is statically partitioned across workers; a fault is
// rethrown from the lowest faulting thread id so the outcome does not
// depend on the worker count.
std::vector<std::vector<WriteRecord>> execute_phase(
    const ThreadgroupProgram& program, std::size_t phase_idx, const BufferSet& buffers,
    std::size_t workers, std::vector<detail::AccessLog>* logs) {
  const Phase& phase = program.phases[phase_idx];
  const std::size_t n = program.thread_count;
  std::vector<std::vector<WriteRecord>> records(n);

  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t id = begin; id < end; ++id) {
      PhaseView view = Executor::view(&buffers, phase_idx, phase.name, id,
                                      logs ? &(*logs)[id] : nullptr);
      records[id] = phase.fn(id, view);
    }
  };

  const std::size_t w = std::min(workers, n);
  if (w <= 1) {
    run_range(0, n);
    return records;
  }

  std::vector<std::exception_ptr> faults(w);
  std::vector<std::size_t> fault_ids(w, BufferSet::npos);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    const std::size_t begin = n * k / w;
    const std::size_t end = n * (k + 1) / w;
    pool.emplace_back([&, k, begin, end] {
      for (std::size_t id = begin; id < end; ++id) {
        try {
          PhaseView view = Executor::view(&buffers, phase_idx, phase.name, id,
                                          logs ? &(*logs)[id] : nullptr);
          records[id] = phase.fn(id, view);
        } catch (...) {
          faults[k] = std::current_exception();
          fault_ids[k] = id;
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();

  std::size_t first = BufferSet::npos;
  for (std::size_t k = 0; k < w; ++k) {
    if (faults[k] && fault_ids[k] < first) {
      first = fault_ids[k];
    }
  }
  if (first != BufferSet::npos) {
    for (std::size_t k = 0; k < w; ++k) {
      if (faults[k] && fault_ids[k] == first) std::rethrow_exception(faults[k]);
    }
  }
  return records;
}

// Barrier: land every thread's writes, in thread-id order. Race-free
// programs have disjoint write sets, so the order is immaterial for them.
void apply_writes(BufferSet& buffers, const std::vector<std::vector<WriteRecord>>& records,
                  std::size_t phase_idx, const std::string& phase_name) {
  for (std::size_t id = 0; id < records.size(); ++id) {
    for (const WriteRecord& w : records[id]) {
      std::size_t s = buffers.slot(w.buffer);
      if (s == BufferSet::npos) {
        throw IndexFault("write to unknown buffer '" + w.buffer + "' in phase " +
                         std::to_string(phase_idx) + " '" + phase_name + "' by thread " +
                         std::to_string(id));
      }
      Grid2D& grid = buffers.grid_of(s);
      if (w.index >= grid.size()) {
        throw IndexFault("out-of-bounds write to buffer '" + w.buffer + "' index " +
                         std::to_string(w.index) + " (size " + std::to_string(grid.size()) +
                         ") in phase " + std::to_string(phase_idx) + " '" + phase_name +
                         "' by thread " + std::to_string(id));
      }
      grid[w.index].real = w.value;
    }
  }
}

}  // namespace

BufferSet run(const ThreadgroupProgram& program, BufferSet buffers, std::size_t workers) {
  validate(program, workers);
  for (std::size_t k = 0; k < program.phases.size(); ++k) {
    auto records = execute_phase(program, k, buffers, workers, nullptr);
    apply_writes(buffers, records, k, program.phases[k].name);
  }
  return buffers;
}

std::string Conflict::describe() const {
  std::string where = "phase " + std::to_string(phase) + " '" + phase_name + "': ";
  if (write_write) {
    return where + "threads " + std::to_string(thread_a) + " and " +
           std::to_string(thread_b) + " both write " + buffer + "[" +
           std::to_string(index) + "]";
  }
  return where + "thread " + std::to_string(thread_a) + " writes " + buffer + "[" +
         std::to_string(index) + "] read by thread " + std::to_string(thread_b);
}

std::vector<Conflict> check_races(const ThreadgroupProgram& program, BufferSet buffers) {
  validate(program, 1);

  struct Cell {
    std::size_t writer = BufferSet::npos;
    std::size_t second_writer = BufferSet::npos;
    std::size_t reader = BufferSet::npos;  // a reader distinct from `writer`
  };

  std::vector<Conflict> conflicts;
  std::vector<detail::AccessLog> logs(program.thread_count);

  for (std::size_t k = 0; k < program.phases.size(); ++k) {
    for (auto& log : logs) log.reads.clear();
    auto records = execute_phase(program, k, buffers, 1, &logs);
    apply_writes(buffers, records, k, program.phases[k].name);

    // Cell key: buffer slot in the high bits, flat index in the low bits.
    std::unordered_map<std::uint64_t, Cell> cells;
    auto key = [](std::size_t slot, std::size_t index) {
      return (static_cast<std::uint64_t>(slot) << 48) | static_cast<std::uint64_t>(index);
    };

    for (std::size_t id = 0; id < records.size(); ++id) {
      for (const WriteRecord& w : records[id]) {
        Cell& c = cells[key(buffers.slot(w.buffer), w.index)];
        if (c.writer == BufferSet::npos) {
          c.writer = id;
        } else if (c.writer != id && c.second_writer == BufferSet::npos) {
          c.second_writer = id;
        }
      }
    }
    for (std::size_t id = 0; id < logs.size(); ++id) {
      for (const auto& [slot, index] : logs[id].reads) {
        auto it = cells.find(key(slot, index));
        if (it == cells.end()) continue;
        Cell& c = it->second;
        if (c.writer != BufferSet::npos && c.writer != id && c.reader == BufferSet::npos) {
          c.reader = id;
        }
      }
    }

    for (const auto& [cell_key, c] : cells) {
      const std::size_t slot = static_cast<std::size_t>(cell_key >> 48);
      const std::size_t index = static_cast<std::size_t>(cell_key & ((1ull << 48) - 1));
      if (c.second_writer != BufferSet::npos) {
        conflicts.push_back({k, program.phases[k].name, buffers.name_of(slot), index,
                             c.writer, c.second_writer, true});
      } else if (c.reader != BufferSet::npos) {
        conflicts.push_back({k, program.phases[k].name, buffers.name_of(slot), index,
                             c.writer, c.reader, false});
      }
    }
  }

  std::sort(conflicts.begin(), conflicts.end(), [](const Conflict& a, const Conflict& b) {
    return std::tie(a.phase, a.buffer, a.index, a.thread_a) <
           std::tie(b.phase, b.buffer, b.index, b.thread_a);
  });
  return conflicts;
}

}  // namespace dlk
