#include "vgpu/device.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace vgpu {

const char* to_string(CommandKind k) {
    switch (k) {
        case CommandKind::SendData: return "SendData";
        case CommandKind::Compute: return "Compute";
        case CommandKind::RtrvData: return "RtrvData";
    }
    return "?";
}

Micros Timeline::task_end(std::uint64_t task_id) const {
    Micros end = 0;
    for (const auto& e : entries)
        if (e.task_id == task_id) end = std::max(end, e.end);
    return end;
}

Micros Timeline::task_start(std::uint64_t task_id) const {
    Micros start = ~Micros{0};
    for (const auto& e : entries)
        if (e.task_id == task_id) start = std::min(start, e.start);
    return start == ~Micros{0} ? 0 : start;
}

WorkQueue build_work_queue(ProgrammingStyle style,
                           std::span<const KernelProfile> profiles) {
    std::vector<std::uint64_t> ids(profiles.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    return build_work_queue(style, profiles, ids);
}

WorkQueue build_work_queue(ProgrammingStyle style,
                           std::span<const KernelProfile> profiles,
                           std::span<const std::uint64_t> task_ids) {
    if (profiles.empty())
        throw std::invalid_argument("build_work_queue: no profiles");
    if (task_ids.size() != profiles.size())
        throw std::invalid_argument("build_work_queue: task id count mismatch");

    WorkQueue q;
    q.style = style;
    q.commands.reserve(profiles.size() * 3);

    auto cmd = [&](std::size_t i, CommandKind kind) {
        return StreamCommand{static_cast<std::uint32_t>(i), kind, task_ids[i],
                             profiles[i]};
    };

    if (style == ProgrammingStyle::PS1) {
        for (std::size_t i = 0; i < profiles.size(); ++i)
            q.commands.push_back(cmd(i, CommandKind::SendData));
        for (std::size_t i = 0; i < profiles.size(); ++i)
            q.commands.push_back(cmd(i, CommandKind::Compute));
        for (std::size_t i = 0; i < profiles.size(); ++i)
            q.commands.push_back(cmd(i, CommandKind::RtrvData));
    } else {
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            q.commands.push_back(cmd(i, CommandKind::SendData));
            q.commands.push_back(cmd(i, CommandKind::Compute));
            q.commands.push_back(cmd(i, CommandKind::RtrvData));
        }
    }
    return q;
}

namespace {

struct ComputeInterval {
    Micros start;
    Micros end;
    std::uint32_t slots;
};

// Earliest t >= ready where a new kernel fits: at least one free block
// slot and fewer than max_concurrent_kernels resident. Candidates are the
// ready time itself and the end times of already-placed computes.
Micros earliest_fit(const std::vector<ComputeInterval>& running, Micros ready,
                    const DeviceSpec& dev, std::uint32_t* granted,
                    std::uint32_t grid) {
    std::vector<Micros> candidates{ready};
    for (const auto& c : running)
        if (c.end > ready) candidates.push_back(c.end);
    std::sort(candidates.begin(), candidates.end());

    for (Micros t : candidates) {
        std::uint32_t used_slots = 0;
        std::uint32_t resident = 0;
        for (const auto& c : running) {
            if (c.start <= t && t < c.end) {
                used_slots += c.slots;
                ++resident;
            }
        }
        if (resident < dev.max_concurrent_kernels &&
            used_slots < dev.total_block_slots()) {
            *granted = std::min(grid, dev.total_block_slots() - used_slots);
            return t;
        }
    }
    throw std::logic_error("simulate: no feasible compute start");  // unreachable
}

} // namespace

Timeline simulate(const WorkQueue& queue, const DeviceSpec& device) {
    if (queue.commands.empty())
        throw std::invalid_argument("simulate: empty work queue");

    std::uint32_t n_streams = 0;
    for (const auto& c : queue.commands)
        n_streams = std::max(n_streams, c.stream_id + 1);
    for (const auto& c : queue.commands)
        if (c.profile.grid_size < 1)
            throw std::invalid_argument("simulate: grid_size must be >= 1");

    Timeline tl;
    tl.mode = ScheduleMode::Virtualized;
    tl.style = queue.style;
    tl.entries.reserve(queue.commands.size());

    std::vector<Micros> send_end(n_streams, 0);
    std::vector<Micros> comp_end(n_streams, 0);
    std::vector<ComputeInterval> computes;

    Micros h2d_free = 0;
    Micros d2h_free = 0;
    Micros all_comp_done = 0;   // latest completion among computes enqueued so far
    Micros rtrv_comp_gate = 0;  // computes that prior retrieves depend on
    Micros last_comp_start = 0; // kernels dispatch in queue order

    for (const auto& c : queue.commands) {
        Micros start = 0, end = 0;
        switch (c.kind) {
            case CommandKind::SendData: {
                start = h2d_free;
                end = start + c.profile.t_data_in;
                h2d_free = end;
                send_end[c.stream_id] = end;
                break;
            }
            case CommandKind::Compute: {
                const Micros ready =
                    std::max({send_end[c.stream_id], rtrv_comp_gate,
                              last_comp_start});
                std::uint32_t granted = 0;
                start = earliest_fit(computes, ready, device, &granted,
                                     c.profile.grid_size);
                const Micros waves =
                    (c.profile.grid_size + granted - 1) / granted;
                end = start + c.profile.t_comp * waves;
                computes.push_back({start, end, granted});
                comp_end[c.stream_id] = end;
                all_comp_done = std::max(all_comp_done, end);
                last_comp_start = std::max(last_comp_start, start);
                break;
            }
            case CommandKind::RtrvData: {
                const Micros ready =
                    std::max(comp_end[c.stream_id], all_comp_done);
                start = std::max(ready, d2h_free);
                end = start + c.profile.t_data_out;
                d2h_free = end;
                rtrv_comp_gate =
                    std::max(rtrv_comp_gate, comp_end[c.stream_id]);
                break;
            }
        }
        tl.entries.push_back({c.task_id, c.stream_id, c.kind, start, end});
        tl.makespan = std::max(tl.makespan, end);
    }
    return tl;
}

Timeline simulate_native(std::span<const KernelProfile> profiles,
                         Micros t_init, Micros t_ctx_switch) {
    if (profiles.empty())
        throw std::invalid_argument("simulate_native: no profiles");

    Timeline tl;
    tl.mode = ScheduleMode::NativeSharing;
    tl.entries.reserve(profiles.size() * 3);

    Micros t = 0;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto& p = profiles[i];
        if (i > 0) t += t_ctx_switch;
        t += t_init;
        const auto sid = static_cast<std::uint32_t>(i);
        const auto tid = static_cast<std::uint64_t>(i);
        tl.entries.push_back(
            {tid, sid, CommandKind::SendData, t, t + p.t_data_in});
        t += p.t_data_in;
        tl.entries.push_back({tid, sid, CommandKind::Compute, t, t + p.t_comp});
        t += p.t_comp;
        tl.entries.push_back(
            {tid, sid, CommandKind::RtrvData, t, t + p.t_data_out});
        t += p.t_data_out;
    }
    tl.makespan = t;
    return tl;
}

void write_timeline_csv(const Timeline& timeline, std::ostream& out) {
    out << "task_id,stream_id,kind,start_us,end_us\n";
    for (const auto& e : timeline.entries)
        out << e.task_id << ',' << e.stream_id << ',' << to_string(e.kind)
            << ',' << e.start << ',' << e.end << '\n';
}

} // namespace vgpu
