#include "lt/compiler.h"

#include <algorithm>
#include <mutex>
#include <sstream>

#include "lt/eager.h"
#include "lt/elementwise.h"
#include "lt/error.h"

namespace lt {
namespace {

constexpr int64_t kBlock = 256;

template <typename T>
void RunFused(const FusedElementwise& step, std::span<const Buffer* const> inputs,
              std::span<const std::span<T>> outputs) {
  const int64_t total = step.shape.element_count();
  const size_t ninstr = step.instrs.size();
  std::vector<std::vector<T>> regs(ninstr, std::vector<T>(kBlock));
  std::vector<std::vector<T>> in_regs(inputs.size(), std::vector<T>(kBlock));
  std::vector<std::span<const T>> in_data;
  for (const Buffer* in : inputs) in_data.push_back(in->data<T>());

  for (int64_t j0 = 0; j0 < total; j0 += kBlock) {
    const int64_t len = std::min(kBlock, total - j0);
    // All inputs are loaded before any output of this block is written, so an
    // output may share storage with an input.
    for (size_t k = 0; k < inputs.size(); ++k) {
      std::span<const T> src = in_data[k];
      if (static_cast<int64_t>(src.size()) == total) {
        std::copy_n(src.begin() + j0, len, in_regs[k].begin());
      } else {
        std::fill_n(in_regs[k].begin(), len, src[0]);
      }
    }
    auto operand = [&](int ref) -> const std::vector<T>& {
      return ref >= 0 ? regs[ref] : in_regs[-1 - ref];
    };
    for (size_t i = 0; i < ninstr; ++i) {
      const FusedInstr& instr = step.instrs[i];
      std::vector<T>& r = regs[i];
      if (instr.kind == OpKind::kConstant) {
        std::fill_n(r.begin(), len, static_cast<T>(instr.constant));
      } else if (instr.kind == OpKind::kExpand) {
        const auto& a = operand(instr.a);
        std::copy_n(a.begin(), len, r.begin());
      } else if constexpr (std::is_same_v<T, uint8_t>) {
        Fail(ErrorCode::kDTypeMismatch, "arithmetic on pred in a fused loop");
      } else if (IsBinaryElementwise(instr.kind)) {
        const auto& a = operand(instr.a);
        const auto& b = operand(instr.b);
        for (int64_t j = 0; j < len; ++j) r[j] = ApplyBinary<T>(instr.kind, a[j], b[j]);
      } else {
        const auto& a = operand(instr.a);
        for (int64_t j = 0; j < len; ++j) r[j] = ApplyUnary<T>(instr.kind, a[j]);
      }
    }
    for (size_t k = 0; k < outputs.size(); ++k) {
      std::copy_n(regs[step.outputs[k].first].begin(), len, outputs[k].begin() + j0);
    }
  }
}

void CopyInto(const Buffer& src, Buffer& dst) {
  std::visit(
      [&](const auto& values) {
        using T = typename std::decay_t<decltype(values)>::value_type;
        auto out = dst.mutable_data<T>();
        std::copy(values.begin(), values.end(), out.begin());
      },
      src.storage());
}

BufferPtr CopyOf(const Buffer& b) {
  return std::make_shared<Buffer>(b.shape(), b.device(), b.storage());
}

std::string RefName(const ValueRef& ref, const BufferPlan& plan) {
  if (ref.is_param()) return "p" + std::to_string(ref.index);
  const Location& loc = plan.temp_location[ref.index];
  return (loc.in_param ? "p" : "s") + std::to_string(loc.index);
}

}  // namespace

CompilerOptions& GlobalCompilerOptions() {
  static CompilerOptions options;
  return options;
}

namespace {

// Plans program.schedule (in fusion order) for the donations. Reordering lets
// more donations land but can lengthen lifetimes, so the reordered plan is
// kept only when it needs no more slots than the original order.
void ApplyDonations(CompiledProgram& program, std::span<const Donation> donations) {
  BufferPlan plan = PlanMemory(program.schedule, donations);
  if (!donations.empty()) {
    StepSchedule reordered = OrderForDonation(program.schedule, donations);
    BufferPlan alt = PlanMemory(reordered, donations);
    if (alt.slot_count < plan.slot_count ||
        (alt.slot_count == plan.slot_count && alt.alias_map.size() > plan.alias_map.size())) {
      program.schedule = std::move(reordered);
      plan = std::move(alt);
    }
  }
  program.buffer_plan = std::move(plan);
  program.donations.assign(donations.begin(), donations.end());
}

}  // namespace

std::shared_ptr<CompiledProgram> CompileCanonical(const RootedGraph& canonical,
                                                  const CanonicalForm& form,
                                                  std::span<const Donation> donations,
                                                  const CompilerOptions& options) {
  auto program = std::make_shared<CompiledProgram>();
  program->key = form.key;
  program->device = canonical.graph.device();
  program->param_order = form.params;
  program->recorded_nodes = canonical.graph.size();
  RootedGraph g = options.simplify ? Simplify(canonical, options) : Dce(canonical);
  if (options.cse) g = Cse(g);
  g = Dce(g);
  program->optimized_nodes = g.graph.size();
  std::vector<Shape> param_shapes;
  for (const ParamDescriptor& p : form.params) param_shapes.push_back(p.shape);
  program->schedule = FuseElementwise(g, std::move(param_shapes));
  ApplyDonations(*program, donations);
  return program;
}

std::shared_ptr<CompiledProgram> WithDonations(const CompiledProgram& program,
                                               std::span<const Donation> donations) {
  auto variant = std::make_shared<CompiledProgram>(program);
  ApplyDonations(*variant, donations);
  return variant;
}

CompileCache::Result CompileCache::GetOrCompile(const IrGraph& graph,
                                                std::span<const NodeId> roots,
                                                std::span<const Donation> donations) {
  Result result;
  result.form = Canonicalize(graph, roots);
  const CacheKey& key = result.form.key;
  std::vector<Donation> donation_key(donations.begin(), donations.end());
  std::sort(donation_key.begin(), donation_key.end());

  std::shared_ptr<const CompiledProgram> base;
  {
    std::shared_lock lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      base = it->second.base;
      if (!donation_key.empty()) {
        auto v = it->second.variants.find(donation_key);
        if (v != it->second.variants.end()) result.program = v->second;
      }
    }
  }
  if (base) {
    if (base->key.param_arity != key.param_arity) {
      Fail(ErrorCode::kInternal, "cache key collision: param arity differs");
    }
    hit_count_.fetch_add(1);
    result.hit = true;
  } else {
    RootedGraph snapshot = CanonicalSnapshot(graph, roots, result.form);
    std::shared_ptr<const CompiledProgram> compiled =
        CompileCanonical(snapshot, result.form, {});
    std::unique_lock lock(mu_);
    auto [it, inserted] = entries_.try_emplace(key);
    if (inserted) {
      it->second.base = compiled;
      compile_count_.fetch_add(1);
    } else {
      // Another thread compiled the same key first; keep its program.
      hit_count_.fetch_add(1);
      result.hit = true;
    }
    base = it->second.base;
  }

  if (donation_key.empty()) {
    result.program = base;
  } else if (!result.program) {
    std::shared_ptr<const CompiledProgram> variant = WithDonations(*base, donation_key);
    std::unique_lock lock(mu_);
    auto [it, inserted] = entries_[key].variants.try_emplace(donation_key, variant);
    result.program = it->second;
  }
  return result;
}

size_t CompileCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::vector<BufferPtr> Execute(const CompiledProgram& program,
                               std::span<const BufferPtr> bindings) {
  const StepSchedule& schedule = program.schedule;
  const BufferPlan& plan = program.buffer_plan;
  if (bindings.size() != schedule.param_shapes.size()) {
    Fail(ErrorCode::kArityMismatch, "program expects " +
                                        std::to_string(schedule.param_shapes.size()) +
                                        " bindings, got " + std::to_string(bindings.size()));
  }
  for (size_t i = 0; i < bindings.size(); ++i) {
    if (!bindings[i]) Fail(ErrorCode::kArityMismatch, "null binding " + std::to_string(i));
    if (bindings[i]->donated()) {
      Fail(ErrorCode::kUseAfterDonation,
           "binding " + std::to_string(i) + " was donated to an earlier execution");
    }
    if (bindings[i]->shape() != schedule.param_shapes[i]) {
      Fail(ErrorCode::kShapeMismatch, "binding " + std::to_string(i) + " has shape " +
                                          bindings[i]->shape().ToString() + ", expected " +
                                          schedule.param_shapes[i].ToString());
    }
  }

  const int num_steps = static_cast<int>(schedule.steps.size());
  const int num_temps = static_cast<int>(schedule.temp_shapes.size());
  std::vector<int> last_use(num_temps, -1);
  std::vector<bool> is_output(num_temps, false);
  for (int i = 0; i < num_steps; ++i) {
    for (const ValueRef& in : StepInputs(schedule.steps[i])) {
      if (!in.is_param()) last_use[in.index] = std::max(last_use[in.index], i);
    }
  }
  for (const ValueRef& out : schedule.outputs) {
    if (!out.is_param()) is_output[out.index] = true;
  }

  std::vector<BufferPtr> temps(num_temps);
  std::vector<std::optional<Storage>> pool(plan.slot_count);
  auto resolve = [&](const ValueRef& ref) -> const BufferPtr& {
    return ref.is_param() ? bindings[ref.index] : temps[ref.index];
  };
  auto fresh_storage = [&](int slot, const Shape& shape) {
    std::optional<Storage>& pooled = pool[slot];
    if (pooled && StorageDType(*pooled) == shape.dtype) {
      Storage s = std::move(*pooled);
      pooled.reset();
      std::visit([&](auto& v) { v.resize(shape.element_count()); }, s);
      return s;
    }
    pooled.reset();
    return MakeStorage(shape.dtype, shape.element_count());
  };

  for (int i = 0; i < num_steps; ++i) {
    const PlanStep& step = schedule.steps[i];
    if (const auto* fused = std::get_if<FusedElementwise>(&step)) {
      std::vector<const Buffer*> inputs;
      for (const ValueRef& in : fused->inputs) inputs.push_back(resolve(in).get());
      std::vector<BufferPtr> outs;
      for (const auto& [instr, t] : fused->outputs) {
        const Location& loc = plan.temp_location[t];
        if (loc.in_param) {
          temps[t] = bindings[loc.index];
        } else {
          const Shape& shape = schedule.temp_shapes[t];
          temps[t] = std::make_shared<Buffer>(shape, program.device,
                                              fresh_storage(loc.index, shape));
        }
        outs.push_back(temps[t]);
      }
      switch (fused->shape.dtype) {
        case DType::kF32: {
          std::vector<std::span<float>> spans;
          for (auto& b : outs) spans.push_back(b->mutable_data<float>());
          RunFused<float>(*fused, inputs, spans);
          break;
        }
        case DType::kI64: {
          std::vector<std::span<int64_t>> spans;
          for (auto& b : outs) spans.push_back(b->mutable_data<int64_t>());
          RunFused<int64_t>(*fused, inputs, spans);
          break;
        }
        case DType::kPred: {
          std::vector<std::span<uint8_t>> spans;
          for (auto& b : outs) spans.push_back(b->mutable_data<uint8_t>());
          RunFused<uint8_t>(*fused, inputs, spans);
          break;
        }
      }
    } else {
      const auto& single = std::get<SingleOp>(step);
      std::vector<BufferPtr> inputs;
      for (const ValueRef& in : single.inputs) inputs.push_back(resolve(in));
      BufferPtr result = Dispatch(single.kind, inputs, single.attrs);
      const Location& loc = plan.temp_location[single.output];
      if (loc.in_param) {
        CopyInto(*result, *bindings[loc.index]);
        temps[single.output] = bindings[loc.index];
      } else {
        temps[single.output] = std::move(result);
      }
    }

    // Dead temporaries hand their storage back to their slot.
    for (int t : StepOutputs(step)) {
      if (last_use[t] < 0 && !is_output[t]) last_use[t] = i;
    }
    for (int t = 0; t < num_temps; ++t) {
      if (last_use[t] != i || is_output[t] || !temps[t]) continue;
      const Location& loc = plan.temp_location[t];
      if (!loc.in_param && temps[t].use_count() == 1) pool[loc.index] = temps[t]->Release();
      temps[t].reset();
    }
  }

  std::vector<BufferPtr> outputs(schedule.outputs.size());
  std::vector<int> first_output(num_temps, -1);
  for (size_t k = 0; k < schedule.outputs.size(); ++k) {
    const ValueRef& ref = schedule.outputs[k];
    if (ref.is_param()) {
      outputs[k] = CopyOf(*bindings[ref.index]);
      continue;
    }
    int& first = first_output[ref.index];
    if (first >= 0) {
      outputs[k] = CopyOf(*outputs[first]);
      continue;
    }
    first = static_cast<int>(k);
    const Location& loc = plan.temp_location[ref.index];
    if (loc.in_param) {
      const BufferPtr& donor = bindings[loc.index];
      outputs[k] = Buffer::Aliasing(donor->id(), donor->shape(), donor->device(), donor->Donate());
    } else {
      outputs[k] = temps[ref.index];
    }
  }
  return outputs;
}

std::string DumpPlan(const CompiledProgram& program) {
  std::ostringstream out;
  const auto& plan = program.buffer_plan;
  for (size_t k = 0; k < program.schedule.steps.size(); ++k) {
    const PlanStep& step = program.schedule.steps[k];
    out << "step" << k << ": ";
    if (const auto* fused = std::get_if<FusedElementwise>(&step)) {
      out << "fused[" << fused->instrs.size() << " ops]";
    } else {
      out << OpName(std::get<SingleOp>(step).kind);
    }
    out << " slots(in=";
    auto inputs = StepInputs(step);
    for (size_t i = 0; i < inputs.size(); ++i) out << (i ? " " : "") << RefName(inputs[i], plan);
    out << ", out=";
    auto outputs = StepOutputs(step);
    for (size_t i = 0; i < outputs.size(); ++i) {
      out << (i ? " " : "") << RefName(ValueRef::Temp(outputs[i]), plan);
    }
    out << ")\n";
  }
  return out.str();
}

}  // namespace lt
