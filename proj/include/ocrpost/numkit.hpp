#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ocrpost::numkit {

using Shape = std::vector<size_t>;

// Dense row-major tensor of 64-bit reals.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);
    explicit Tensor(Shape shape);  // zero-filled

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const Shape& shape() const { return shape_; }
    size_t numel() const { return data_.size(); }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }
    double& at(size_t i) { return data_[i]; }
    double at(size_t i) const { return data_[i]; }

private:
    Shape shape_;
    std::vector<double> data_;
};

size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    size_t id = 0;

    const Tensor& value() const;
};

// Records primitive operations for reverse-mode differentiation. Every op
// validates shapes and rejects non-finite outputs. A tape is single-
// threaded; run independent tapes for parallel evaluation.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value);

    size_t size() const { return nodes_.size(); }
    const Tensor& value(Var v) const;

    // Reverse-mode pass from a scalar loss; throws NotScalar otherwise.
    // Leaves not on the path get zero gradients.
    void backward(Var loss);

    Tensor grad(Var v) const;

private:
    friend struct OpAccess;
    struct Node {
        Tensor value;
        std::vector<double> grad;
        std::function<void(Tape&)> back;
    };
    std::vector<Node> nodes_;

    std::vector<double>& grad_buffer(size_t id);
    void accumulate(size_t id, const std::vector<double>& g);
};

// --- primitives (each records its backward rule on the tape) ---

Var add(Var a, Var b);        // same shape
Var sub(Var a, Var b);        // same shape
Var mul(Var a, Var b);        // elementwise, same shape
Var scale(Var a, double c);   // constant scale
Var matmul(Var a, Var b);     // (m,k)x(k,n)->(m,n) or (m,k)x(k)->(m)
Var transpose(Var a);         // 2-D
Var concat(const std::vector<Var>& parts);      // 1-D
Var stack_rows(const std::vector<Var>& rows);   // n x d from n 1-D vectors
Var slice(Var a, size_t begin, size_t end);     // 1-D range or 2-D row range
Var embedding_lookup(Var table, size_t row);    // (V,E) -> (E)
Var pick(Var a, size_t index);                  // 1-D -> scalar
Var sigmoid(Var a);
Var tanh(Var a);
Var softmax(Var a);              // 1-D
Var softmax(Var a, size_t axis); // 2-D, axis 0 = down columns, 1 = along rows
Var elementwise_min(Var a, Var b);  // gradient to the smaller operand; ties to a
Var sum(Var a);                 // -> scalar
Var log(Var a);
Var dot(Var a, Var b);          // 1-D x 1-D -> scalar
Var add_rowvec(Var m, Var v);   // add v to every row of m
Var reshape(Var a, Shape shape);

struct GradCheckResult {
    double max_rel_err = 0.0;
    size_t n_checked = 0;
};

// Compares backward() against central finite differences, coordinate by
// coordinate. `build` must construct the scalar loss from the leaf vars it
// is handed (one per parameter tensor, same order).
GradCheckResult finite_diff_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& build,
    const std::vector<Tensor>& params, double h = 1e-5);

// --- parameter checkpoints ---
// Versioned binary blob: header with names and shapes, then row-major
// 64-bit values; endianness declared in the header.

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

// --- optimizer (adaptive per-parameter learning rate) ---

class AdamOptimizer {
public:
    AdamOptimizer(double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);

    // params[i] is updated in place with grads[i]; call once per step with
    // a consistent parameter order.
    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

private:
    double lr_, beta1_, beta2_, eps_;
    size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace ocrpost::numkit
