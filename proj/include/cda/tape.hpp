#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cda/tensor.hpp"

namespace cda::ad {

// ---------------------------------------------------------------------------
// Parameters and gradients
// ---------------------------------------------------------------------------

struct Param {
  std::string name;
  Tensor value;
  bool trainable = true;
};

class ParamStore {
 public:
  int add(std::string name, Tensor value, bool trainable = true);
  int find(const std::string& name) const;  // -1 if absent

  Param& operator[](int id) { return items_[static_cast<std::size_t>(id)]; }
  const Param& operator[](int id) const { return items_[static_cast<std::size_t>(id)]; }

  std::size_t size() const { return items_.size(); }
  void set_trainable(int id, bool on) { (*this)[id].trainable = on; }

 private:
  std::vector<Param> items_;
};

// Accumulated gradients, indexed by param id. Gradients are produced for
// every parameter reached by the backward sweep, frozen or not; freezing is
// enforced at the optimizer boundary.
class GradientStore {
 public:
  void clear();
  Tensor& ensure(const ParamStore& ps, int pid);
  const Tensor* find(int pid) const;
  double* row_ptr(const ParamStore& ps, int pid, std::size_t row);

 private:
  std::vector<Tensor> grads_;
};

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

enum class Op : std::uint8_t {
  Constant,
  ParamRef,   // aliases a parameter tensor
  Gather,     // aliases one row of a matrix parameter
  Add,
  Sub,
  Mul,
  Div,
  Affine,     // c0 * x + c1, elementwise
  MaxConst,   // max(x, c0), elementwise
  ScalarMul,  // vector * scalar node
  MatVec,
  Concat,
  Slice,      // aliases a contiguous range of the input
  Sigmoid,
  Tanh,
  Exp,
  Softplus,
  Selu,
  Softmax,
  Dot,
  L2Norm,
  Cosine,
  Sum,
  LstmCell,        // (preactivation [4H], c_prev [H]) -> [h; c] of length 2H
  ScoreRows,       // cosine or dot of a vector against a set of row params
  RowsWeightedSum, // sum_j weights[j] * row_j over a set of row params
  HingeMargins,    // two-threshold margin loss over a score vector
  LogSigmoidLoss,  // per-class sigmoid cross entropy over a score vector
};

const char* op_name(Op op);

// Reverse-mode tape over dense vectors. Values live in a chunked arena so a
// cleared tape reuses its memory; gather/slice outputs alias their source
// and cost nothing. Forward values are computed eagerly at emit time;
// recompute() replays the recorded ops in place (used by the finite
// difference checker after perturbing parameters).
class Tape {
 public:
  explicit Tape(const ParamStore* params);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void clear();

  // --- emitters, each returns a node id ---
  int constant(const double* data, std::size_t n);
  int constant(const std::vector<double>& x) { return constant(x.data(), x.size()); }
  int scalar_const(double x) { return constant(&x, 1); }
  int param(int pid);
  int gather(int pid, std::size_t row);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int div(int a, int b);
  int affine(int a, double scale, double shift);
  int max_const(int a, double c);
  int relu(int a) { return max_const(a, 0.0); }
  int scalar_mul(int vec, int scalar);
  int matvec(int w, int x);
  int concat(int a, int b);
  int slice(int a, std::size_t begin, std::size_t len);
  int pick(int a, std::size_t i) { return slice(a, i, 1); }
  int sigmoid(int a);
  int tanh(int a);
  int exp(int a);
  int softplus(int a);
  int selu(int a);
  int softmax(int a);
  int dot(int a, int b);
  int l2norm(int a);
  int cosine(int a, int b);
  int sum(int a);
  int lstm_cell(int pre, int c_prev);

  int rowset(std::vector<int> param_ids);  // returns a rowset handle
  int score_rows(int h, int rowset_id, bool cosine_mode);
  int rows_weighted_sum(int weights, int rowset_id);
  int hinge_margins(int scores, std::size_t true_idx, double delta_pos, double delta_neg);
  int log_sigmoid_loss(int scores, std::size_t true_idx);

  // --- inspection ---
  std::size_t size() const { return nodes_.size(); }
  std::size_t value_len(int id) const;
  const double* value(int id) const;
  std::vector<double> value_vec(int id) const;
  double scalar(int id) const;

  // Smallest distance to a nondifferentiable point (hinge/relu/selu kink,
  // division or norm guard) seen during the last forward pass. The finite
  // difference harness uses this to sample away from kinks.
  double min_kink_distance() const { return min_kink_; }

  void recompute();
  void backward(int loss, GradientStore& grads);

  static std::uint64_t cosine_guard_hits();

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int i0 = 0;            // param id / slice begin / rowset id / true index
    int i1 = 0;            // gather row
    double c0 = 0.0;
    double c1 = 0.0;
    double* val = nullptr;
    double* adj = nullptr;
    std::uint32_t len = 0;
    std::uint32_t rows = 0;  // matrix-shaped leaves only
    std::uint32_t cols = 0;
  };

  class Arena {
   public:
    double* alloc(std::size_t n);
    void reset();

   private:
    struct Chunk {
      std::unique_ptr<double[]> data;
      std::size_t cap = 0;
    };
    std::vector<Chunk> chunks_;
    std::size_t cur_ = 0;
    std::size_t used_ = 0;
  };

  int push(Node n);
  void forward_node(Node& n);
  const Node& checked(int id, const char* who) const;

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::vector<std::vector<int>> rowsets_;
  std::vector<int> param_node_cache_;
  Arena vals_;
  Arena adjs_;
  double min_kink_ = 1e300;
};

// Central-difference gradient check for a scalar-valued recorded
// computation. Returns the worst relative error over every coordinate of
// the given parameters. Throws if the loss node is not scalar or eps <= 0.
double finite_difference_check(Tape& tape, int loss, ParamStore& params,
                               const std::vector<int>& pids, double eps);

// SELU constants. The activation's defining publication fixes them; restated
// here because the classifier head depends on the exact values.
inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluScale = 1.0507009873554805;

inline constexpr double kNormGuard = 1e-12;

}  // namespace cda::ad
