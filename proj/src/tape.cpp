#include "cda/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace cda::ad {

namespace {

std::atomic<std::uint64_t> g_cosine_guard_hits{0};

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

[[noreturn]] void shape_error(const char* prim, const std::string& detail) {
  throw std::invalid_argument(std::string(prim) + ": " + detail);
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamStore / GradientStore
// ---------------------------------------------------------------------------

int ParamStore::add(std::string name, Tensor value, bool trainable) {
  items_.push_back(Param{std::move(name), std::move(value), trainable});
  return static_cast<int>(items_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (items_[i].name == name) return static_cast<int>(i);
  return -1;
}

void GradientStore::clear() {
  for (auto& g : grads_) std::fill(g.v.begin(), g.v.end(), 0.0);
}

Tensor& GradientStore::ensure(const ParamStore& ps, int pid) {
  if (static_cast<std::size_t>(pid) >= grads_.size()) grads_.resize(ps.size());
  Tensor& g = grads_[static_cast<std::size_t>(pid)];
  const Tensor& p = ps[pid].value;
  if (g.shape != p.shape) {
    g.shape = p.shape;
    g.v.assign(p.numel(), 0.0);
  }
  return g;
}

const Tensor* GradientStore::find(int pid) const {
  if (static_cast<std::size_t>(pid) >= grads_.size()) return nullptr;
  const Tensor& g = grads_[static_cast<std::size_t>(pid)];
  return g.v.empty() ? nullptr : &g;
}

double* GradientStore::row_ptr(const ParamStore& ps, int pid, std::size_t row) {
  return ensure(ps, pid).row_ptr(row);
}

// ---------------------------------------------------------------------------
// Arena
// ---------------------------------------------------------------------------

double* Tape::Arena::alloc(std::size_t n) {
  constexpr std::size_t kChunkDoubles = 1 << 16;
  while (cur_ < chunks_.size() && used_ + n > chunks_[cur_].cap) {
    ++cur_;
    used_ = 0;
  }
  if (cur_ == chunks_.size()) {
    Chunk c;
    c.cap = std::max(kChunkDoubles, n);
    c.data = std::make_unique<double[]>(c.cap);
    chunks_.push_back(std::move(c));
    used_ = 0;
  }
  double* p = chunks_[cur_].data.get() + used_;
  used_ += n;
  return p;
}

void Tape::Arena::reset() {
  cur_ = 0;
  used_ = 0;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::Tape(const ParamStore* params) : params_(params) {}

std::uint64_t Tape::cosine_guard_hits() { return g_cosine_guard_hits.load(); }

void Tape::clear() {
  nodes_.clear();
  rowsets_.clear();
  param_node_cache_.assign(params_ ? params_->size() : 0, -1);
  vals_.reset();
  min_kink_ = 1e300;
}

const Tape::Node& Tape::checked(int id, const char* who) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    shape_error(who, "input node " + std::to_string(id) + " is not recorded on this tape");
  return nodes_[static_cast<std::size_t>(id)];
}

std::size_t Tape::value_len(int id) const { return checked(id, "value_len").len; }

const double* Tape::value(int id) const { return checked(id, "value").val; }

std::vector<double> Tape::value_vec(int id) const {
  const Node& n = checked(id, "value_vec");
  return std::vector<double>(n.val, n.val + n.len);
}

double Tape::scalar(int id) const {
  const Node& n = checked(id, "scalar");
  if (n.len != 1) shape_error("scalar", "node value has length " + std::to_string(n.len));
  return n.val[0];
}

int Tape::push(Node n) {
  nodes_.push_back(n);
  forward_node(nodes_.back());
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(const double* data, std::size_t n) {
  Node nd;
  nd.op = Op::Constant;
  nd.len = static_cast<std::uint32_t>(n);
  nd.rows = nd.len;
  nd.cols = 1;
  nd.val = vals_.alloc(n);
  std::memcpy(nd.val, data, n * sizeof(double));
  nodes_.push_back(nd);
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::param(int pid) {
  if (!params_ || pid < 0 || static_cast<std::size_t>(pid) >= params_->size())
    shape_error("param", "unknown parameter id " + std::to_string(pid));
  if (param_node_cache_.size() != params_->size())
    param_node_cache_.resize(params_->size(), -1);
  int& cached = param_node_cache_[static_cast<std::size_t>(pid)];
  if (cached >= 0) return cached;
  const Tensor& t = (*params_)[pid].value;
  Node nd;
  nd.op = Op::ParamRef;
  nd.i0 = pid;
  nd.len = static_cast<std::uint32_t>(t.numel());
  nd.rows = static_cast<std::uint32_t>(t.rows());
  nd.cols = static_cast<std::uint32_t>(t.cols());
  nd.val = const_cast<double*>(t.v.data());
  nodes_.push_back(nd);
  cached = static_cast<int>(nodes_.size()) - 1;
  return cached;
}

int Tape::gather(int pid, std::size_t row) {
  const Tensor& t = (*params_)[pid].value;
  if (!t.is_matrix()) shape_error("gather", "parameter " + (*params_)[pid].name + " is not a matrix");
  if (row >= t.rows())
    shape_error("gather", "row " + std::to_string(row) + " out of range for " + t.shape_str());
  Node nd;
  nd.op = Op::Gather;
  nd.i0 = pid;
  nd.i1 = static_cast<int>(row);
  nd.len = static_cast<std::uint32_t>(t.cols());
  nd.rows = nd.len;
  nd.cols = 1;
  nd.val = const_cast<double*>(t.row_ptr(row));
  nodes_.push_back(nd);
  return static_cast<int>(nodes_.size()) - 1;
}

static void require_same_len(const char* prim, std::size_t la, std::size_t lb) {
  if (la != lb)
    shape_error(prim, "shape mismatch [" + std::to_string(la) + "] vs [" + std::to_string(lb) + "]");
}

int Tape::add(int a, int b) {
  const Node& na = checked(a, "add");
  const Node& nb = checked(b, "add");
  require_same_len("add", na.len, nb.len);
  Node nd;
  nd.op = Op::Add;
  nd.a = a;
  nd.b = b;
  nd.len = na.len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::sub(int a, int b) {
  const Node& na = checked(a, "sub");
  const Node& nb = checked(b, "sub");
  require_same_len("sub", na.len, nb.len);
  Node nd;
  nd.op = Op::Sub;
  nd.a = a;
  nd.b = b;
  nd.len = na.len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::mul(int a, int b) {
  const Node& na = checked(a, "mul");
  const Node& nb = checked(b, "mul");
  require_same_len("mul", na.len, nb.len);
  Node nd;
  nd.op = Op::Mul;
  nd.a = a;
  nd.b = b;
  nd.len = na.len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::div(int a, int b) {
  const Node& na = checked(a, "div");
  const Node& nb = checked(b, "div");
  require_same_len("div", na.len, nb.len);
  Node nd;
  nd.op = Op::Div;
  nd.a = a;
  nd.b = b;
  nd.len = na.len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::affine(int a, double scale, double shift) {
  const Node& na = checked(a, "affine");
  Node nd;
  nd.op = Op::Affine;
  nd.a = a;
  nd.c0 = scale;
  nd.c1 = shift;
  nd.len = na.len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::max_const(int a, double c) {
  const Node& na = checked(a, "max_const");
  Node nd;
  nd.op = Op::MaxConst;
  nd.a = a;
  nd.c0 = c;
  nd.len = na.len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::scalar_mul(int vec, int scalar) {
  const Node& nv = checked(vec, "scalar_mul");
  const Node& ns = checked(scalar, "scalar_mul");
  if (ns.len != 1) shape_error("scalar_mul", "scalar operand has length " + std::to_string(ns.len));
  Node nd;
  nd.op = Op::ScalarMul;
  nd.a = vec;
  nd.b = scalar;
  nd.len = nv.len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::matvec(int w, int x) {
  const Node& nw = checked(w, "matvec");
  const Node& nx = checked(x, "matvec");
  if (nw.cols != nx.len)
    shape_error("matvec", "matrix [" + std::to_string(nw.rows) + "x" + std::to_string(nw.cols) +
                              "] vs vector [" + std::to_string(nx.len) + "]");
  Node nd;
  nd.op = Op::MatVec;
  nd.a = w;
  nd.b = x;
  nd.len = nw.rows;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::concat(int a, int b) {
  const Node& na = checked(a, "concat");
  const Node& nb = checked(b, "concat");
  Node nd;
  nd.op = Op::Concat;
  nd.a = a;
  nd.b = b;
  nd.len = na.len + nb.len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::slice(int a, std::size_t begin, std::size_t len) {
  const Node& na = checked(a, "slice");
  if (begin + len > na.len)
    shape_error("slice", "range [" + std::to_string(begin) + ", " + std::to_string(begin + len) +
                             ") out of bounds for length " + std::to_string(na.len));
  Node nd;
  nd.op = Op::Slice;
  nd.a = a;
  nd.i0 = static_cast<int>(begin);
  nd.len = static_cast<std::uint32_t>(len);
  nd.val = na.val + begin;
  nodes_.push_back(nd);
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::sigmoid(int a) {
  Node nd;
  nd.op = Op::Sigmoid;
  nd.a = a;
  nd.len = checked(a, "sigmoid").len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::tanh(int a) {
  Node nd;
  nd.op = Op::Tanh;
  nd.a = a;
  nd.len = checked(a, "tanh").len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::exp(int a) {
  Node nd;
  nd.op = Op::Exp;
  nd.a = a;
  nd.len = checked(a, "exp").len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::softplus(int a) {
  Node nd;
  nd.op = Op::Softplus;
  nd.a = a;
  nd.len = checked(a, "softplus").len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::selu(int a) {
  Node nd;
  nd.op = Op::Selu;
  nd.a = a;
  nd.len = checked(a, "selu").len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::softmax(int a) {
  const Node& na = checked(a, "softmax");
  if (na.len == 0) shape_error("softmax", "empty input");
  Node nd;
  nd.op = Op::Softmax;
  nd.a = a;
  nd.len = na.len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::dot(int a, int b) {
  const Node& na = checked(a, "dot");
  const Node& nb = checked(b, "dot");
  require_same_len("dot", na.len, nb.len);
  Node nd;
  nd.op = Op::Dot;
  nd.a = a;
  nd.b = b;
  nd.len = 1;
  nd.val = vals_.alloc(1);
  return push(nd);
}

int Tape::l2norm(int a) {
  Node nd;
  nd.op = Op::L2Norm;
  nd.a = a;
  nd.len = 1;
  checked(a, "l2norm");
  nd.val = vals_.alloc(1);
  return push(nd);
}

int Tape::cosine(int a, int b) {
  const Node& na = checked(a, "cosine");
  const Node& nb = checked(b, "cosine");
  require_same_len("cosine", na.len, nb.len);
  Node nd;
  nd.op = Op::Cosine;
  nd.a = a;
  nd.b = b;
  nd.len = 1;
  nd.val = vals_.alloc(1);
  return push(nd);
}

int Tape::sum(int a) {
  Node nd;
  nd.op = Op::Sum;
  nd.a = a;
  nd.len = 1;
  checked(a, "sum");
  nd.val = vals_.alloc(1);
  return push(nd);
}

int Tape::lstm_cell(int pre, int c_prev) {
  const Node& np = checked(pre, "lstm_cell");
  const Node& nc = checked(c_prev, "lstm_cell");
  if (np.len != 4 * nc.len)
    shape_error("lstm_cell", "preactivation [" + std::to_string(np.len) + "] vs cell state [" +
                                 std::to_string(nc.len) + "]");
  Node nd;
  nd.op = Op::LstmCell;
  nd.a = pre;
  nd.b = c_prev;
  nd.len = 2 * nc.len;
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::rowset(std::vector<int> param_ids) {
  std::size_t width = 0;
  for (int pid : param_ids) {
    const Tensor& t = (*params_)[pid].value;
    if (!t.is_vector()) shape_error("rowset", (*params_)[pid].name + " is not a vector");
    if (width == 0) width = t.numel();
    require_same_len("rowset", width, t.numel());
  }
  rowsets_.push_back(std::move(param_ids));
  return static_cast<int>(rowsets_.size()) - 1;
}

int Tape::score_rows(int h, int rowset_id, bool cosine_mode) {
  const Node& nh = checked(h, "score_rows");
  const auto& rows = rowsets_.at(static_cast<std::size_t>(rowset_id));
  for (int pid : rows) require_same_len("score_rows", nh.len, (*params_)[pid].value.numel());
  Node nd;
  nd.op = Op::ScoreRows;
  nd.a = h;
  nd.i0 = rowset_id;
  nd.c0 = cosine_mode ? 1.0 : 0.0;
  nd.len = static_cast<std::uint32_t>(rows.size());
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::rows_weighted_sum(int weights, int rowset_id) {
  const Node& nw = checked(weights, "rows_weighted_sum");
  const auto& rows = rowsets_.at(static_cast<std::size_t>(rowset_id));
  if (nw.len != rows.size())
    shape_error("rows_weighted_sum", "weights [" + std::to_string(nw.len) + "] vs " +
                                         std::to_string(rows.size()) + " rows");
  if (rows.empty()) shape_error("rows_weighted_sum", "empty rowset");
  Node nd;
  nd.op = Op::RowsWeightedSum;
  nd.a = weights;
  nd.i0 = rowset_id;
  nd.len = static_cast<std::uint32_t>((*params_)[rows[0]].value.numel());
  nd.val = vals_.alloc(nd.len);
  return push(nd);
}

int Tape::hinge_margins(int scores, std::size_t true_idx, double delta_pos, double delta_neg) {
  const Node& ns = checked(scores, "hinge_margins");
  if (true_idx >= ns.len)
    shape_error("hinge_margins", "true index " + std::to_string(true_idx) + " out of range for " +
                                     std::to_string(ns.len) + " scores");
  Node nd;
  nd.op = Op::HingeMargins;
  nd.a = scores;
  nd.i0 = static_cast<int>(true_idx);
  nd.c0 = delta_pos;
  nd.c1 = delta_neg;
  nd.len = 1;
  nd.val = vals_.alloc(1);
  return push(nd);
}

int Tape::log_sigmoid_loss(int scores, std::size_t true_idx) {
  const Node& ns = checked(scores, "log_sigmoid_loss");
  if (true_idx >= ns.len)
    shape_error("log_sigmoid_loss", "true index " + std::to_string(true_idx) +
                                        " out of range for " + std::to_string(ns.len) + " scores");
  Node nd;
  nd.op = Op::LogSigmoidLoss;
  nd.a = scores;
  nd.i0 = static_cast<int>(true_idx);
  nd.len = 1;
  nd.val = vals_.alloc(1);
  return push(nd);
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

void Tape::forward_node(Node& n) {
  const double* a = n.a >= 0 ? nodes_[static_cast<std::size_t>(n.a)].val : nullptr;
  const double* b = n.b >= 0 ? nodes_[static_cast<std::size_t>(n.b)].val : nullptr;
  const std::uint32_t la = n.a >= 0 ? nodes_[static_cast<std::size_t>(n.a)].len : 0;
  switch (n.op) {
    case Op::Constant:
    case Op::ParamRef:
    case Op::Gather:
    case Op::Slice:
      break;  // value is stored or aliased
    case Op::Add:
      for (std::uint32_t i = 0; i < n.len; ++i) n.val[i] = a[i] + b[i];
      break;
    case Op::Sub:
      for (std::uint32_t i = 0; i < n.len; ++i) n.val[i] = a[i] - b[i];
      break;
    case Op::Mul:
      for (std::uint32_t i = 0; i < n.len; ++i) n.val[i] = a[i] * b[i];
      break;
    case Op::Div:
      for (std::uint32_t i = 0; i < n.len; ++i) {
        n.val[i] = a[i] / b[i];
        min_kink_ = std::min(min_kink_, std::abs(b[i]));
      }
      break;
    case Op::Affine:
      for (std::uint32_t i = 0; i < n.len; ++i) n.val[i] = n.c0 * a[i] + n.c1;
      break;
    case Op::MaxConst:
      for (std::uint32_t i = 0; i < n.len; ++i) {
        n.val[i] = std::max(a[i], n.c0);
        min_kink_ = std::min(min_kink_, std::abs(a[i] - n.c0));
      }
      break;
    case Op::ScalarMul: {
      const double s = b[0];
      for (std::uint32_t i = 0; i < n.len; ++i) n.val[i] = a[i] * s;
      break;
    }
    case Op::MatVec: {
      const Node& nw = nodes_[static_cast<std::size_t>(n.a)];
      const std::uint32_t cols = nw.cols;
      for (std::uint32_t r = 0; r < n.len; ++r) {
        const double* wr = a + static_cast<std::size_t>(r) * cols;
        // four independent accumulators; fixed order keeps results reproducible
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::uint32_t c = 0;
        for (; c + 4 <= cols; c += 4) {
          s0 += wr[c] * b[c];
          s1 += wr[c + 1] * b[c + 1];
          s2 += wr[c + 2] * b[c + 2];
          s3 += wr[c + 3] * b[c + 3];
        }
        for (; c < cols; ++c) s0 += wr[c] * b[c];
        n.val[r] = (s0 + s1) + (s2 + s3);
      }
      break;
    }
    case Op::Concat: {
      std::memcpy(n.val, a, la * sizeof(double));
      std::memcpy(n.val + la, b, (n.len - la) * sizeof(double));
      break;
    }
    case Op::Sigmoid:
      for (std::uint32_t i = 0; i < n.len; ++i) n.val[i] = stable_sigmoid(a[i]);
      break;
    case Op::Tanh:
      for (std::uint32_t i = 0; i < n.len; ++i) n.val[i] = std::tanh(a[i]);
      break;
    case Op::Exp:
      for (std::uint32_t i = 0; i < n.len; ++i) n.val[i] = std::exp(a[i]);
      break;
    case Op::Softplus:
      for (std::uint32_t i = 0; i < n.len; ++i) n.val[i] = stable_softplus(a[i]);
      break;
    case Op::Selu:
      for (std::uint32_t i = 0; i < n.len; ++i) {
        const double x = a[i];
        n.val[i] = x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x);
        min_kink_ = std::min(min_kink_, std::abs(x));
      }
      break;
    case Op::Softmax: {
      double mx = a[0];
      for (std::uint32_t i = 1; i < n.len; ++i) mx = std::max(mx, a[i]);
      double z = 0.0;
      for (std::uint32_t i = 0; i < n.len; ++i) {
        n.val[i] = std::exp(a[i] - mx);
        z += n.val[i];
      }
      for (std::uint32_t i = 0; i < n.len; ++i) n.val[i] /= z;
      break;
    }
    case Op::Dot: {
      double s = 0.0;
      for (std::uint32_t i = 0; i < la; ++i) s += a[i] * b[i];
      n.val[0] = s;
      break;
    }
    case Op::L2Norm: {
      double s = 0.0;
      for (std::uint32_t i = 0; i < la; ++i) s += a[i] * a[i];
      n.val[0] = std::sqrt(s);
      min_kink_ = std::min(min_kink_, n.val[0]);
      break;
    }
    case Op::Cosine: {
      double ab = 0.0, aa = 0.0, bb = 0.0;
      for (std::uint32_t i = 0; i < la; ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
      }
      const double na = std::sqrt(aa), nb = std::sqrt(bb);
      double denom = na * nb;
      if (denom < kNormGuard) {
        denom = kNormGuard;
        g_cosine_guard_hits.fetch_add(1, std::memory_order_relaxed);
      }
      n.val[0] = ab / denom;
      min_kink_ = std::min(min_kink_, std::min(na, nb));
      break;
    }
    case Op::Sum: {
      double s = 0.0;
      for (std::uint32_t i = 0; i < la; ++i) s += a[i];
      n.val[0] = s;
      break;
    }
    case Op::LstmCell: {
      const std::uint32_t h = n.len / 2;
      const double* cp = b;
      for (std::uint32_t j = 0; j < h; ++j) {
        const double ig = stable_sigmoid(a[j]);
        const double fg = stable_sigmoid(a[h + j]);
        const double gg = std::tanh(a[2 * h + j]);
        const double og = stable_sigmoid(a[3 * h + j]);
        const double c_new = fg * cp[j] + ig * gg;
        n.val[h + j] = c_new;
        n.val[j] = og * std::tanh(c_new);
      }
      break;
    }
    case Op::ScoreRows: {
      const auto& rows = rowsets_[static_cast<std::size_t>(n.i0)];
      const bool cos_mode = n.c0 != 0.0;
      double hh = 0.0;
      if (cos_mode)
        for (std::uint32_t i = 0; i < la; ++i) hh += a[i] * a[i];
      const double nh = std::sqrt(hh);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const double* w = (*params_)[rows[r]].value.v.data();
        double wh = 0.0;
        for (std::uint32_t i = 0; i < la; ++i) wh += w[i] * a[i];
        if (!cos_mode) {
          n.val[r] = wh;
          continue;
        }
        double ww = 0.0;
        for (std::uint32_t i = 0; i < la; ++i) ww += w[i] * w[i];
        const double nw = std::sqrt(ww);
        double denom = nh * nw;
        if (denom < kNormGuard) {
          denom = kNormGuard;
          g_cosine_guard_hits.fetch_add(1, std::memory_order_relaxed);
        }
        n.val[r] = wh / denom;
        min_kink_ = std::min(min_kink_, std::min(nh, nw));
      }
      break;
    }
    case Op::RowsWeightedSum: {
      const auto& rows = rowsets_[static_cast<std::size_t>(n.i0)];
      std::fill(n.val, n.val + n.len, 0.0);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const double* t = (*params_)[rows[r]].value.v.data();
        const double w = a[r];
        for (std::uint32_t i = 0; i < n.len; ++i) n.val[i] += w * t[i];
      }
      break;
    }
    case Op::HingeMargins: {
      const std::uint32_t t = static_cast<std::uint32_t>(n.i0);
      double loss = 0.0;
      for (std::uint32_t i = 0; i < la; ++i) {
        if (i == t) {
          loss += std::max(n.c0 - a[i], 0.0);
          min_kink_ = std::min(min_kink_, std::abs(n.c0 - a[i]));
        } else {
          loss += std::max(a[i] - n.c1, 0.0);
          min_kink_ = std::min(min_kink_, std::abs(a[i] - n.c1));
        }
      }
      n.val[0] = loss;
      break;
    }
    case Op::LogSigmoidLoss: {
      const std::uint32_t t = static_cast<std::uint32_t>(n.i0);
      double loss = 0.0;
      for (std::uint32_t i = 0; i < la; ++i)
        loss += i == t ? stable_softplus(-a[i]) : stable_softplus(a[i]);
      n.val[0] = loss;
      break;
    }
  }
}

void Tape::recompute() {
  min_kink_ = 1e300;
  for (Node& n : nodes_) forward_node(n);
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void Tape::backward(int loss, GradientStore& grads) {
  const Node& ln = checked(loss, "backward");
  if (ln.len != 1) shape_error("backward", "loss node must be a scalar");

  adjs_.reset();
  // Assign adjoint buffers in forward order so aliases can reference the
  // already-assigned parent buffer. Parameter adjoints point straight into
  // the gradient store, so Gather/ParamRef need no backward step at all.
  for (Node& n : nodes_) {
    switch (n.op) {
      case Op::ParamRef:
        n.adj = grads.ensure(*params_, n.i0).v.data();
        break;
      case Op::Gather:
        n.adj = grads.row_ptr(*params_, n.i0, static_cast<std::size_t>(n.i1));
        break;
      case Op::Slice:
        n.adj = nodes_[static_cast<std::size_t>(n.a)].adj + n.i0;
        break;
      default: {
        n.adj = adjs_.alloc(n.len);
        std::fill(n.adj, n.adj + n.len, 0.0);
        break;
      }
    }
  }
  nodes_[static_cast<std::size_t>(loss)].adj[0] += 1.0;

  for (std::size_t k = nodes_.size(); k-- > 0;) {
    Node& n = nodes_[k];
    double* ga = n.a >= 0 ? nodes_[static_cast<std::size_t>(n.a)].adj : nullptr;
    double* gb = n.b >= 0 ? nodes_[static_cast<std::size_t>(n.b)].adj : nullptr;
    const double* a = n.a >= 0 ? nodes_[static_cast<std::size_t>(n.a)].val : nullptr;
    const double* b = n.b >= 0 ? nodes_[static_cast<std::size_t>(n.b)].val : nullptr;
    const std::uint32_t la = n.a >= 0 ? nodes_[static_cast<std::size_t>(n.a)].len : 0;
    const double* g = n.adj;
    switch (n.op) {
      case Op::Constant:
      case Op::ParamRef:
      case Op::Gather:
      case Op::Slice:
        break;
      case Op::Add:
        for (std::uint32_t i = 0; i < n.len; ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      case Op::Sub:
        for (std::uint32_t i = 0; i < n.len; ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      case Op::Mul:
        for (std::uint32_t i = 0; i < n.len; ++i) {
          ga[i] += g[i] * b[i];
          gb[i] += g[i] * a[i];
        }
        break;
      case Op::Div:
        for (std::uint32_t i = 0; i < n.len; ++i) {
          ga[i] += g[i] / b[i];
          gb[i] -= g[i] * a[i] / (b[i] * b[i]);
        }
        break;
      case Op::Affine:
        for (std::uint32_t i = 0; i < n.len; ++i) ga[i] += n.c0 * g[i];
        break;
      case Op::MaxConst:
        for (std::uint32_t i = 0; i < n.len; ++i)
          if (a[i] > n.c0) ga[i] += g[i];
        break;
      case Op::ScalarMul: {
        const double s = b[0];
        double gs = 0.0;
        for (std::uint32_t i = 0; i < n.len; ++i) {
          ga[i] += g[i] * s;
          gs += g[i] * a[i];
        }
        gb[0] += gs;
        break;
      }
      case Op::MatVec: {
        const Node& nw = nodes_[static_cast<std::size_t>(n.a)];
        const std::uint32_t cols = nw.cols;
        for (std::uint32_t r = 0; r < n.len; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          double* gwr = ga + static_cast<std::size_t>(r) * cols;
          const double* wr = a + static_cast<std::size_t>(r) * cols;
          for (std::uint32_t c = 0; c < cols; ++c) gwr[c] += gr * b[c];
          for (std::uint32_t c = 0; c < cols; ++c) gb[c] += gr * wr[c];
        }
        break;
      }
      case Op::Concat: {
        for (std::uint32_t i = 0; i < la; ++i) ga[i] += g[i];
        for (std::uint32_t i = la; i < n.len; ++i) gb[i - la] += g[i];
        break;
      }
      case Op::Sigmoid:
        for (std::uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * n.val[i] * (1.0 - n.val[i]);
        break;
      case Op::Tanh:
        for (std::uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * (1.0 - n.val[i] * n.val[i]);
        break;
      case Op::Exp:
        for (std::uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * n.val[i];
        break;
      case Op::Softplus:
        for (std::uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * stable_sigmoid(a[i]);
        break;
      case Op::Selu:
        for (std::uint32_t i = 0; i < n.len; ++i)
          ga[i] += g[i] * (a[i] > 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(a[i]));
        break;
      case Op::Softmax: {
        double gy = 0.0;
        for (std::uint32_t i = 0; i < n.len; ++i) gy += g[i] * n.val[i];
        for (std::uint32_t i = 0; i < n.len; ++i) ga[i] += n.val[i] * (g[i] - gy);
        break;
      }
      case Op::Dot: {
        const double gs = g[0];
        for (std::uint32_t i = 0; i < la; ++i) {
          ga[i] += gs * b[i];
          gb[i] += gs * a[i];
        }
        break;
      }
      case Op::L2Norm: {
        const double nv = std::max(n.val[0], kNormGuard);
        const double gs = g[0];
        for (std::uint32_t i = 0; i < la; ++i) ga[i] += gs * a[i] / nv;
        break;
      }
      case Op::Cosine: {
        double aa = 0.0, bb = 0.0;
        for (std::uint32_t i = 0; i < la; ++i) {
          aa += a[i] * a[i];
          bb += b[i] * b[i];
        }
        const double na = std::sqrt(aa), nb = std::sqrt(bb);
        const double denom = std::max(na * nb, kNormGuard);
        const double c = n.val[0];
        const double ka = c / std::max(aa, kNormGuard * kNormGuard);
        const double kb = c / std::max(bb, kNormGuard * kNormGuard);
        const double gs = g[0];
        for (std::uint32_t i = 0; i < la; ++i) {
          ga[i] += gs * (b[i] / denom - ka * a[i]);
          gb[i] += gs * (a[i] / denom - kb * b[i]);
        }
        break;
      }
      case Op::Sum: {
        const double gs = g[0];
        for (std::uint32_t i = 0; i < la; ++i) ga[i] += gs;
        break;
      }
      case Op::LstmCell: {
        const std::uint32_t h = n.len / 2;
        const double* cp = b;
        for (std::uint32_t j = 0; j < h; ++j) {
          const double ig = stable_sigmoid(a[j]);
          const double fg = stable_sigmoid(a[h + j]);
          const double gg = std::tanh(a[2 * h + j]);
          const double og = stable_sigmoid(a[3 * h + j]);
          const double c_new = n.val[h + j];
          const double tc = std::tanh(c_new);
          const double gh = g[j];
          const double gc = g[h + j] + gh * og * (1.0 - tc * tc);
          ga[3 * h + j] += gh * tc * og * (1.0 - og);       // output gate
          ga[h + j] += gc * cp[j] * fg * (1.0 - fg);        // forget gate
          ga[j] += gc * gg * ig * (1.0 - ig);               // input gate
          ga[2 * h + j] += gc * ig * (1.0 - gg * gg);       // candidate
          gb[j] += gc * fg;
        }
        break;
      }
      case Op::ScoreRows: {
        const auto& rows = rowsets_[static_cast<std::size_t>(n.i0)];
        const bool cos_mode = n.c0 != 0.0;
        double hh = 0.0;
        if (cos_mode)
          for (std::uint32_t i = 0; i < la; ++i) hh += a[i] * a[i];
        const double nh = std::sqrt(hh);
        for (std::size_t r = 0; r < rows.size(); ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          const double* w = (*params_)[rows[r]].value.v.data();
          double* gw = grads.row_ptr(*params_, rows[r], 0);
          if (!cos_mode) {
            for (std::uint32_t i = 0; i < la; ++i) {
              ga[i] += gr * w[i];
              gw[i] += gr * a[i];
            }
            continue;
          }
          double ww = 0.0;
          for (std::uint32_t i = 0; i < la; ++i) ww += w[i] * w[i];
          const double nw = std::sqrt(ww);
          const double denom = std::max(nh * nw, kNormGuard);
          const double c = n.val[r];
          const double kh = c / std::max(hh, kNormGuard * kNormGuard);
          const double kw = c / std::max(ww, kNormGuard * kNormGuard);
          for (std::uint32_t i = 0; i < la; ++i) {
            ga[i] += gr * (w[i] / denom - kh * a[i]);
            gw[i] += gr * (a[i] / denom - kw * w[i]);
          }
        }
        break;
      }
      case Op::RowsWeightedSum: {
        const auto& rows = rowsets_[static_cast<std::size_t>(n.i0)];
        for (std::size_t r = 0; r < rows.size(); ++r) {
          const double* t = (*params_)[rows[r]].value.v.data();
          double* gt = grads.row_ptr(*params_, rows[r], 0);
          const double w = a[r];
          double gw = 0.0;
          for (std::uint32_t i = 0; i < n.len; ++i) {
            gw += g[i] * t[i];
            gt[i] += g[i] * w;
          }
          ga[r] += gw;
        }
        break;
      }
      case Op::HingeMargins: {
        const std::uint32_t t = static_cast<std::uint32_t>(n.i0);
        const double gs = g[0];
        for (std::uint32_t i = 0; i < la; ++i) {
          if (i == t) {
            if (n.c0 - a[i] > 0.0) ga[i] -= gs;
          } else {
            if (a[i] - n.c1 > 0.0) ga[i] += gs;
          }
        }
        break;
      }
      case Op::LogSigmoidLoss: {
        const std::uint32_t t = static_cast<std::uint32_t>(n.i0);
        const double gs = g[0];
        for (std::uint32_t i = 0; i < la; ++i) {
          const double s = stable_sigmoid(a[i]);
          ga[i] += gs * (i == t ? s - 1.0 : s);
        }
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------

const char* op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::ParamRef: return "param";
    case Op::Gather: return "gather";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Affine: return "affine";
    case Op::MaxConst: return "max_const";
    case Op::ScalarMul: return "scalar_mul";
    case Op::MatVec: return "matvec";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Softplus: return "softplus";
    case Op::Selu: return "selu";
    case Op::Softmax: return "softmax";
    case Op::Dot: return "dot";
    case Op::L2Norm: return "l2norm";
    case Op::Cosine: return "cosine";
    case Op::Sum: return "sum";
    case Op::LstmCell: return "lstm_cell";
    case Op::ScoreRows: return "score_rows";
    case Op::RowsWeightedSum: return "rows_weighted_sum";
    case Op::HingeMargins: return "hinge_margins";
    case Op::LogSigmoidLoss: return "log_sigmoid_loss";
  }
  return "?";
}

double finite_difference_check(Tape& tape, int loss, ParamStore& params,
                               const std::vector<int>& pids, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_difference_check: eps must be positive");
  if (tape.value_len(loss) != 1)
    throw std::invalid_argument("finite_difference_check: loss must be scalar");

  GradientStore grads;
  tape.recompute();
  tape.backward(loss, grads);

  double worst = 0.0;
  for (int pid : pids) {
    Tensor& p = params[pid].value;
    const Tensor* g = grads.find(pid);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double saved = p.v[i];
      p.v[i] = saved + eps;
      tape.recompute();
      const double fp = tape.scalar(loss);
      p.v[i] = saved - eps;
      tape.recompute();
      const double fm = tape.scalar(loss);
      p.v[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = g ? g->v[i] : 0.0;
      // Relative where the gradient has size, absolute at 1e-6 scale below.
      const double rel =
          std::abs(analytic - numeric) / std::max({1e-6, std::abs(analytic), std::abs(numeric)});
      worst = std::max(worst, rel);
    }
  }
  tape.recompute();
  return worst;
}

}  // namespace cda::ad
