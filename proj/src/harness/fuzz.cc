#include "lt/harness/fuzz.h"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>
#include <sstream>

#include "lt/error.h"
#include "lt/tensor.h"

namespace lt::harness {
namespace {

using Kind = FuzzInstr::Kind;

std::string DimsText(const std::vector<int64_t>& dims) {
  std::string out = "[";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(dims[i]);
  }
  return out + "]";
}

std::string Reg(int r) { return "%" + std::to_string(r); }

std::string Num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct RegInfo {
  Shape shape;
  bool alive = false;
};

class Generator {
 public:
  Generator(uint64_t seed, int max_nodes) : rng_(seed), budget_(max_nodes) {}

  FuzzProgram Run() {
    int initial = Uniform(1, 3);
    for (int i = 0; i < initial; ++i) NewRandn(RandomDims());
    while (program_.node_count < budget_) Step();
    program_.num_regs = static_cast<int>(regs_.size());
    return std::move(program_);
  }

 private:
  int Uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool Chance(double p) { return std::bernoulli_distribution(p)(rng_); }

  Dims RandomDims() {
    Dims dims(Uniform(0, 3));
    for (auto& d : dims) d = Uniform(1, 4);
    return dims;
  }

  double RandomScalar(DType dtype) {
    static const double kFloat[] = {0.0, 1.0, 2.0, -1.5, 0.5, 3.0, -0.0};
    static const double kInt[] = {0.0, 1.0, 2.0, -3.0};
    if (dtype == DType::kI64) return kInt[Uniform(0, 3)];
    return kFloat[Uniform(0, 6)];
  }

  int NewReg(const Shape& shape) {
    regs_.push_back({shape, true});
    return static_cast<int>(regs_.size()) - 1;
  }

  void Emit(FuzzInstr instr, int nodes) {
    program_.instrs.push_back(std::move(instr));
    program_.node_count += nodes;
  }

  int NewRandn(const Dims& dims) {
    FuzzInstr in;
    in.kind = Kind::kRandn;
    in.dims = dims;
    in.seed = rng_() % 1000;
    in.dst = NewReg(Shape{DType::kF32, dims});
    Emit(in, 1);
    return in.dst;
  }

  int NewFull(const Dims& dims, DType dtype) {
    FuzzInstr in;
    in.kind = Kind::kFull;
    in.dims = dims;
    in.dtype = dtype;
    in.scalar = RandomScalar(dtype);
    in.dst = NewReg(Shape{dtype, dims});
    Emit(in, 1);
    return in.dst;
  }

  std::vector<int> Alive(const std::function<bool(const Shape&)>& pred = nullptr) {
    std::vector<int> out;
    for (size_t i = 0; i < regs_.size(); ++i) {
      if (regs_[i].alive && (!pred || pred(regs_[i].shape))) out.push_back(static_cast<int>(i));
    }
    return out;
  }

  int Pick(const std::vector<int>& from) { return from[Uniform(0, static_cast<int>(from.size()) - 1)]; }

  // A register sharing `shape`, creating one when none exists.
  int Partner(const Shape& shape) {
    auto same = Alive([&](const Shape& s) { return s == shape; });
    if (!same.empty() && Chance(0.7)) return Pick(same);
    if (shape.dtype == DType::kF32) return NewRandn(shape.dims);
    return NewFull(shape.dims, shape.dtype);
  }

  void Step() {
    auto alive = Alive();
    if (alive.empty()) {
      NewRandn(RandomDims());
      return;
    }
    int a = Pick(alive);
    Shape sa = regs_[a].shape;
    bool is_float = sa.dtype == DType::kF32;
    int choice = Uniform(0, 99);
    FuzzInstr in;
    in.a = a;

    if (choice < 22) {
      static const OpKind kOps[] = {OpKind::kAdd, OpKind::kSub, OpKind::kMul,
                                    OpKind::kDiv, OpKind::kMax};
      in.op = kOps[Uniform(0, is_float ? 4 : 2)];
      if (!is_float && Chance(0.3)) in.op = OpKind::kMax;
      in.b = Partner(sa);
      in.kind = Kind::kBinary;
      if ((in.op == OpKind::kAdd || in.op == OpKind::kSub) && Chance(0.25)) {
        in.alpha = RandomScalar(sa.dtype);
      }
      in.dst = NewReg(sa);
      Emit(in, in.alpha ? 3 : 1);
    } else if (choice < 38) {
      static const OpKind kOps[] = {OpKind::kAdd, OpKind::kSub, OpKind::kMul,
                                    OpKind::kDiv, OpKind::kMax};
      in.op = kOps[Uniform(0, 4)];
      if (!is_float && in.op == OpKind::kDiv) in.op = OpKind::kMul;
      in.kind = Kind::kBinaryScalar;
      in.scalar = RandomScalar(sa.dtype);
      in.dst = NewReg(sa);
      Emit(in, 2);
    } else if (choice < 46) {
      in.kind = Kind::kUnary;
      in.op = Chance(0.5) ? OpKind::kNeg : OpKind::kRelu;
      in.dst = NewReg(sa);
      Emit(in, 1);
    } else if (choice < 51) {
      if (sa.rank() != 2 || !is_float) return;
      Dims rhs = {sa.dims[1], Uniform(1, 4)};
      in.b = Chance(0.5) ? Partner(Shape{DType::kF32, rhs}) : NewRandn(rhs);
      in.kind = Kind::kMatMul;
      in.dst = NewReg(Shape{DType::kF32, {sa.dims[0], rhs[1]}});
      Emit(in, 1);
    } else if (choice < 56) {
      std::vector<int64_t> dims;
      for (int64_t i = 0; i < sa.rank(); ++i) {
        if (Chance(0.5)) dims.push_back(i);
      }
      in.kind = Kind::kSum;
      in.ints = dims;
      Dims out;
      for (int64_t i = 0; i < sa.rank(); ++i) {
        if (std::find(dims.begin(), dims.end(), i) == dims.end()) out.push_back(sa.dims[i]);
      }
      in.dst = NewReg(Shape{sa.dtype, out});
      Emit(in, 1);
    } else if (choice < 62) {
      int64_t n = sa.element_count();
      Dims out;
      if (sa.rank() != 1) {
        out = {n};
      } else if (n % 2 == 0) {
        out = {2, n / 2};
      } else {
        out = {n, 1};
      }
      in.kind = Kind::kReshape;
      in.dims = out;
      in.dst = NewReg(Shape{sa.dtype, out});
      Emit(in, 1);
    } else if (choice < 68) {
      if (sa.rank() < 2) return;
      std::vector<int64_t> perm(sa.rank());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng_);
      Dims out;
      for (int64_t p : perm) out.push_back(sa.dims[p]);
      in.kind = Kind::kPermute;
      in.ints = perm;
      in.dst = NewReg(Shape{sa.dtype, out});
      Emit(in, 1);
    } else if (choice < 74) {
      if (sa.rank() < 1) return;
      int64_t dim = Uniform(0, static_cast<int>(sa.rank()) - 1);
      int64_t size = sa.dims[dim];
      int64_t start = Uniform(0, static_cast<int>(size) - 1);
      int64_t length = Uniform(1, static_cast<int>(size - start));
      in.kind = Kind::kNarrow;
      in.ints = {dim, start, length};
      Dims out = sa.dims;
      out[dim] = length;
      in.dst = NewReg(Shape{sa.dtype, out});
      Emit(in, 1);
    } else if (choice < 86) {
      static const char* kNames[] = {"add_", "sub_", "mul_", "assign_"};
      in.name = kNames[Uniform(0, 3)];
      if (Chance(0.4)) {
        in.kind = Kind::kInPlaceScalar;
        in.scalar = RandomScalar(sa.dtype);
        Emit(in, 2);
      } else {
        in.kind = Kind::kInPlace;
        in.b = Partner(sa);
        if (in.name == "add_" && Chance(0.25)) in.alpha = RandomScalar(sa.dtype);
        Emit(in, 1);
      }
    } else if (choice < 90) {
      if (!is_float || sa.rank() < 1) return;
      in.kind = Kind::kFallback;
      if (Chance(0.5)) {
        in.name = "argsort";
        in.ints = {Uniform(0, static_cast<int>(sa.rank()) - 1)};
        in.dst = NewReg(Shape{DType::kI64, sa.dims});
      } else {
        in.name = "nonzero_count";
        in.dst = NewReg(Shape{DType::kI64, {}});
      }
      Emit(in, 1);
    } else if (choice < 94) {
      in.kind = Kind::kBranch;
      Emit(in, 3);
    } else if (choice < 97) {
      in.kind = Kind::kMarkStep;
      in.wait = Chance(0.5);
      Emit(in, 0);
    } else {
      if (alive.size() < 2) return;
      in.kind = Kind::kDrop;
      regs_[a].alive = false;
      Emit(in, 0);
    }
  }

  std::mt19937_64 rng_;
  int budget_;
  std::vector<RegInfo> regs_;
  FuzzProgram program_;
};

LazyTensor ApplyBinary(OpKind op, const LazyTensor& a, const LazyTensor& b,
                       std::optional<double> alpha) {
  switch (op) {
    case OpKind::kAdd: return Add(a, b, alpha);
    case OpKind::kSub: return Sub(a, b, alpha);
    case OpKind::kMul: return Mul(a, b);
    case OpKind::kDiv: return Div(a, b);
    case OpKind::kMax: return Maximum(a, b);
    default: Fail(ErrorCode::kUnknownOp, OpName(op));
  }
}

LazyTensor ApplyScalar(OpKind op, const LazyTensor& a, double b) {
  switch (op) {
    case OpKind::kAdd: return Add(a, b);
    case OpKind::kSub: return Sub(a, b);
    case OpKind::kMul: return Mul(a, b);
    case OpKind::kDiv: return Div(a, b);
    case OpKind::kMax: return Maximum(a, b);
    default: Fail(ErrorCode::kUnknownOp, OpName(op));
  }
}

std::string Render(const Storage& storage, const Shape& shape) {
  std::string out = shape.ToString() + ":";
  std::visit(
      [&](const auto& v) {
        out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(v[0]));
      },
      storage);
  return out;
}

std::string Printable(const std::string& value) {
  size_t colon = value.find(':');
  std::string out = value.substr(0, colon + 1);
  static const char* kHex = "0123456789abcdef";
  for (size_t i = colon + 1; i < value.size(); ++i) {
    auto c = static_cast<unsigned char>(value[i]);
    out += kHex[c >> 4];
    out += kHex[c & 15];
  }
  return out;
}

}  // namespace

std::string FuzzInstr::ToText() const {
  switch (kind) {
    case Kind::kRandn:
      return Reg(dst) + " = randn " + DimsText(dims) + " seed=" + std::to_string(seed);
    case Kind::kFull:
      return Reg(dst) + " = full " + DimsText(dims) + " " + Num(scalar) + " " +
             DTypeName(dtype);
    case Kind::kBinary: {
      std::string s = Reg(dst) + " = " + OpName(op) + " " + Reg(a) + " " + Reg(b);
      if (alpha) s += " alpha=" + Num(*alpha);
      return s;
    }
    case Kind::kBinaryScalar:
      return Reg(dst) + " = " + OpName(op) + " " + Reg(a) + " " + Num(scalar);
    case Kind::kUnary:
      return Reg(dst) + " = " + OpName(op) + " " + Reg(a);
    case Kind::kMatMul:
      return Reg(dst) + " = matmul " + Reg(a) + " " + Reg(b);
    case Kind::kSum:
      return Reg(dst) + " = reduce_sum " + Reg(a) + " dims=" + DimsText(ints);
    case Kind::kReshape:
      return Reg(dst) + " = view " + Reg(a) + " " + DimsText(dims);
    case Kind::kPermute:
      return Reg(dst) + " = permute " + Reg(a) + " " + DimsText(ints);
    case Kind::kNarrow:
      return Reg(dst) + " = narrow " + Reg(a) + " dim=" + std::to_string(ints[0]) +
             " start=" + std::to_string(ints[1]) + " length=" + std::to_string(ints[2]);
    case Kind::kInPlace: {
      std::string s = Reg(a) + "." + name + "(" + Reg(b);
      if (alpha) s += ", alpha=" + Num(*alpha);
      return s + ")";
    }
    case Kind::kInPlaceScalar:
      return Reg(a) + "." + name + "(" + Num(scalar) + ")";
    case Kind::kFallback: {
      std::string s = Reg(dst) + " = " + name + " " + Reg(a);
      if (!ints.empty()) s += " dim=" + std::to_string(ints[0]);
      return s;
    }
    case Kind::kBranch:
      return "if item(sum " + Reg(a) + ") > 0: " + Reg(a) + ".add_(1) else " + Reg(a) +
             ".mul_(2)";
    case Kind::kMarkStep:
      return std::string("mark_step wait=") + (wait ? "1" : "0");
    case Kind::kDrop:
      return "drop " + Reg(a);
  }
  return "?";
}

std::string FuzzProgram::ToText() const {
  std::string out;
  for (const auto& in : instrs) out += in.ToText() + "\n";
  return out;
}

FuzzProgram GenerateProgram(uint64_t seed, int max_nodes) {
  return Generator(seed, max_nodes).Run();
}

std::vector<std::string> RunProgram(const FuzzProgram& program, Device device) {
  std::vector<std::string> observed;
  std::vector<LazyTensor> regs(program.num_regs);
  try {
    for (const auto& in : program.instrs) {
      switch (in.kind) {
        case Kind::kRandn:
          regs[in.dst] = Randn(in.dims, in.seed, device);
          break;
        case Kind::kFull:
          regs[in.dst] = Full(in.dims, in.scalar, device, in.dtype);
          break;
        case Kind::kBinary:
          regs[in.dst] = ApplyBinary(in.op, regs[in.a], regs[in.b], in.alpha);
          break;
        case Kind::kBinaryScalar:
          regs[in.dst] = ApplyScalar(in.op, regs[in.a], in.scalar);
          break;
        case Kind::kUnary:
          regs[in.dst] = in.op == OpKind::kNeg ? Neg(regs[in.a]) : Relu(regs[in.a]);
          break;
        case Kind::kMatMul:
          regs[in.dst] = MatMul(regs[in.a], regs[in.b]);
          break;
        case Kind::kSum:
          regs[in.dst] = Sum(regs[in.a], in.ints);
          break;
        case Kind::kReshape:
          regs[in.dst] = View(regs[in.a], in.dims);
          break;
        case Kind::kPermute:
          regs[in.dst] = Permute(regs[in.a], in.ints);
          break;
        case Kind::kNarrow:
          regs[in.dst] = Narrow(regs[in.a], in.ints[0], in.ints[1], in.ints[2]);
          break;
        case Kind::kInPlace: {
          LazyTensor& t = regs[in.a];
          if (in.name == "add_") t.add_(regs[in.b], in.alpha);
          else if (in.name == "sub_") t.sub_(regs[in.b]);
          else if (in.name == "mul_") t.mul_(regs[in.b]);
          else t.assign_(regs[in.b]);
          break;
        }
        case Kind::kInPlaceScalar: {
          LazyTensor& t = regs[in.a];
          if (in.name == "add_") t.add_(in.scalar);
          else if (in.name == "sub_") t.sub_(in.scalar);
          else if (in.name == "mul_") t.mul_(in.scalar);
          else t.assign_(in.scalar);
          break;
        }
        case Kind::kFallback:
          regs[in.dst] = FallbackOp(in.name, regs[in.a], in.ints.empty() ? -1 : in.ints[0]);
          break;
        case Kind::kBranch: {
          double v = Item(SumAll(regs[in.a]));
          std::string bits(sizeof(v), '\0');
          std::memcpy(bits.data(), &v, sizeof(v));
          observed.push_back("item:" + bits);
          if (v > 0) regs[in.a].add_(1.0);
          else regs[in.a].mul_(2.0);
          break;
        }
        case Kind::kMarkStep:
          MarkStep(device, in.wait);
          break;
        case Kind::kDrop:
          regs[in.a] = LazyTensor();
          break;
      }
    }
    for (const auto& t : regs) {
      if (t.defined()) observed.push_back(Render(ToHost(t), t.shape()));
    }
  } catch (const Error& e) {
    observed.push_back(std::string("error:") + ErrorCodeName(e.code()));
  }
  regs.clear();
  MarkStep(device);
  return observed;
}

FuzzOutcome RunFuzz(const FuzzOptions& options) {
  SetExecutionMode(options.lazy_device, ExecutionMode::kLazy);
  SetExecutionMode(options.eager_device, ExecutionMode::kEager);
  FuzzOutcome outcome;
  for (int i = 0; i < options.count; ++i) {
    uint64_t program_seed = options.seed * 1000003ULL + static_cast<uint64_t>(i);
    FuzzProgram program = GenerateProgram(program_seed, options.max_nodes);
    auto lazy = RunProgram(program, options.lazy_device);
    auto eager = RunProgram(program, options.eager_device);
    ++outcome.programs_run;
    if (lazy == eager) continue;
    outcome.diverged = true;
    std::ostringstream os;
    os << "seed=" << options.seed << " program=" << i << " program_seed=" << program_seed
       << " max_nodes=" << options.max_nodes << "\n"
       << program.ToText();
    size_t n = std::max(lazy.size(), eager.size());
    for (size_t k = 0; k < n; ++k) {
      std::string l = k < lazy.size() ? Printable(lazy[k]) : "<missing>";
      std::string e = k < eager.size() ? Printable(eager[k]) : "<missing>";
      if (l == e) continue;
      os << "output " << k << " differs\n  lazy:  " << l << "\n  eager: " << e << "\n";
      break;
    }
    outcome.reproducer = os.str();
    break;
  }
  return outcome;
}

}  // namespace lt::harness
