#include <algorithm>
#include <limits>
#include <set>

#include "lt/compiler.h"
#include "lt/error.h"

namespace lt {

BufferPlan PlanMemory(const StepSchedule& schedule, std::span<const Donation> donations) {
  const int num_steps = static_cast<int>(schedule.steps.size());
  const int num_params = static_cast<int>(schedule.param_shapes.size());
  const int num_temps = static_cast<int>(schedule.temp_shapes.size());
  const int num_outputs = static_cast<int>(schedule.outputs.size());
  constexpr int kForever = std::numeric_limits<int>::max();
  auto output_shape = [&](int k) -> const Shape& {
    const ValueRef& out = schedule.outputs[k];
    return out.is_param() ? schedule.param_shapes[out.index] : schedule.temp_shapes[out.index];
  };

  std::vector<Donation> donated(donations.begin(), donations.end());
  std::sort(donated.begin(), donated.end());
  std::set<int> seen_params;
  for (const Donation& d : donated) {
    const int p = d.param;
    if (p < 0 || p >= num_params) {
      Fail(ErrorCode::kInvalidDonation, "donated param " + std::to_string(p) + " out of range");
    }
    if (!seen_params.insert(p).second) {
      Fail(ErrorCode::kInvalidDonation, "param " + std::to_string(p) + " donated twice");
    }
    bool matches = false;
    if (d.output >= 0) {
      if (d.output >= num_outputs) {
        Fail(ErrorCode::kInvalidDonation, "donation names output " + std::to_string(d.output) +
                                              " of " + std::to_string(num_outputs));
      }
      matches = output_shape(d.output) == schedule.param_shapes[p];
    } else {
      for (int k = 0; k < num_outputs && !matches; ++k) {
        matches = output_shape(k) == schedule.param_shapes[p];
      }
    }
    if (!matches) {
      Fail(ErrorCode::kInvalidDonation, "donated param " + std::to_string(p) + " of shape " +
                                            schedule.param_shapes[p].ToString() +
                                            " matches no output");
    }
  }

  std::vector<int> param_last_use(num_params, -1);
  std::vector<int> temp_last_use(num_temps, -1);
  for (int i = 0; i < num_steps; ++i) {
    for (const ValueRef& in : StepInputs(schedule.steps[i])) {
      auto& last = in.is_param() ? param_last_use[in.index] : temp_last_use[in.index];
      last = std::max(last, i);
    }
  }
  // Outputs stay live past the last step; the first occurrence of each temp
  // output is the one an alias may back.
  std::vector<int> output_index(num_temps, -1);
  for (size_t k = 0; k < schedule.outputs.size(); ++k) {
    const ValueRef& out = schedule.outputs[k];
    if (out.is_param()) {
      param_last_use[out.index] = kForever;
    } else {
      temp_last_use[out.index] = kForever;
      if (output_index[out.index] < 0) output_index[out.index] = static_cast<int>(k);
    }
  }

  BufferPlan plan;
  plan.temp_location.assign(num_temps, Location{});
  std::set<int> free_slots;
  std::set<int> aliased;
  std::vector<std::vector<int>> release_after(num_steps);
  for (int t = 0; t < num_temps; ++t) {
    if (temp_last_use[t] >= 0 && temp_last_use[t] != kForever) {
      release_after[temp_last_use[t]].push_back(t);
    }
  }

  for (int i = 0; i < num_steps; ++i) {
    const PlanStep& step = schedule.steps[i];
    for (int t : StepOutputs(step)) {
      std::optional<int> host;
      if (output_index[t] >= 0) {
        for (const Donation& d : donated) {
          const int p = d.param;
          if (aliased.contains(p) || schedule.param_shapes[p] != schedule.temp_shapes[t]) continue;
          if (d.output >= 0) {
            const ValueRef& named = schedule.outputs[d.output];
            if (named.is_param() || named.index != t) continue;
          }
          int last = param_last_use[p];
          // A fused loop reads each element before writing it, so it may
          // overwrite an input it is still reading.
          if (last < i || (last == i && IsFusedStep(step))) {
            host = p;
            break;
          }
        }
      }
      if (host) {
        aliased.insert(*host);
        plan.temp_location[t] = Location{true, *host};
        plan.alias_map.emplace_back(*host, output_index[t]);
        continue;
      }
      int slot;
      if (!free_slots.empty()) {
        slot = *free_slots.begin();
        free_slots.erase(free_slots.begin());
      } else {
        slot = plan.slot_count++;
      }
      plan.temp_location[t] = Location{false, slot};
      // Never read: the slot is free again right after this step.
      if (temp_last_use[t] < 0) release_after[i].push_back(t);
    }
    for (int t : release_after[i]) {
      if (!plan.temp_location[t].in_param) free_slots.insert(plan.temp_location[t].index);
    }
  }
  std::sort(plan.alias_map.begin(), plan.alias_map.end());
  return plan;
}

StepSchedule OrderForDonation(StepSchedule schedule, std::span<const Donation> donations) {
  const int n = static_cast<int>(schedule.steps.size());
  if (donations.empty() || n < 2) return schedule;

  std::vector<int> producer(schedule.temp_shapes.size(), -1);
  for (int i = 0; i < n; ++i) {
    for (int t : StepOutputs(schedule.steps[i])) producer[t] = i;
  }
  std::vector<bool> is_output(schedule.temp_shapes.size(), false);
  for (const ValueRef& out : schedule.outputs) {
    if (!out.is_param()) is_output[out.index] = true;
  }
  auto may_host = [&](const Donation& d, int t) {
    int p = d.param;
    if (p < 0 || p >= static_cast<int>(schedule.param_shapes.size())) return false;
    if (schedule.param_shapes[p] != schedule.temp_shapes[t]) return false;
    if (d.output < 0) return true;
    if (d.output >= static_cast<int>(schedule.outputs.size())) return false;
    const ValueRef& named = schedule.outputs[d.output];
    return !named.is_param() && named.index == t;
  };

  std::vector<std::vector<int>> users(n);
  std::vector<int> pending_deps(n, 0);
  // Per donation: steps reading its param, and steps that could host it.
  std::vector<std::set<int>> readers(donations.size());
  std::vector<std::vector<int>> hosts_for(n);
  for (int i = 0; i < n; ++i) {
    std::set<int> deps;
    for (const ValueRef& in : StepInputs(schedule.steps[i])) {
      if (!in.is_param()) {
        deps.insert(producer[in.index]);
        continue;
      }
      for (size_t k = 0; k < donations.size(); ++k) {
        if (donations[k].param == in.index) readers[k].insert(i);
      }
    }
    for (int d : deps) users[d].push_back(i);
    pending_deps[i] = static_cast<int>(deps.size());
    for (int t : StepOutputs(schedule.steps[i])) {
      if (!is_output[t]) continue;
      for (size_t k = 0; k < donations.size(); ++k) {
        if (may_host(donations[k], t)) hosts_for[i].push_back(static_cast<int>(k));
      }
    }
  }

  // A step is deferred while some param it could host has readers other than
  // itself still unscheduled.
  auto blocked = [&](int i) {
    for (int k : hosts_for[i]) {
      for (int r : readers[k]) {
        if (r != i) return true;
      }
    }
    return false;
  };

  std::set<int> ready;
  for (int i = 0; i < n; ++i) {
    if (pending_deps[i] == 0) ready.insert(i);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    int pick = *ready.begin();
    for (int i : ready) {
      if (!blocked(i)) {
        pick = i;
        break;
      }
    }
    ready.erase(pick);
    order.push_back(pick);
    for (auto& r : readers) r.erase(pick);
    for (int u : users[pick]) {
      if (--pending_deps[u] == 0) ready.insert(u);
    }
  }

  std::vector<PlanStep> steps;
  steps.reserve(n);
  for (int i : order) steps.push_back(std::move(schedule.steps[i]));
  schedule.steps = std::move(steps);
  return schedule;
}

}  // namespace lt
